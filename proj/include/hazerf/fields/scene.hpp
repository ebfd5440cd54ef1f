#pragma once

#include "hazerf/fields/radiance.hpp"
#include "hazerf/fields/scattering.hpp"
#include "hazerf/fields/sdf.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>

namespace hazerf {

/// Surface, radiance, medium, airlight and sharpness plus the parameter
/// store that holds every learnable value among them.
struct SceneModel {
    ParamStore params;
    SdfField sdf;
    RadianceField radiance;
    ScatteringField scattering;
    AtmosphericLight airlight;
    Sharpness sharpness{50.0};
    Rgb background = Rgb::Zero();

    bool is_analytic() const { return sdf.is_analytic() && radiance.is_analytic() && !scattering.is_learnable(); }
};

inline constexpr int kSceneFileVersion = 1;

/// Builds a scene from its description. Learnable components are created
/// with initial values from the description; `seed` drives network init.
SceneModel scene_from_json(const nlohmann::json& j, std::uint64_t seed);
SceneModel load_scene_file(const std::filesystem::path& path, std::uint64_t seed);

/// Description that rebuilds an identically shaped scene (values of
/// learnable parameters come from a checkpoint).
nlohmann::json scene_to_json(const SceneModel& scene);

nlohmann::json vec_to_json(const Vec3& v);
Vec3 vec_from_json(const nlohmann::json& j);

}  // namespace hazerf
