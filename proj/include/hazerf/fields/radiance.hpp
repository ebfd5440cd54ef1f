#pragma once

#include "hazerf/diffcore/tape.hpp"
#include "hazerf/fields/mlp.hpp"
#include "hazerf/util/vec.hpp"

#include <array>
#include <variant>
#include <vector>

namespace hazerf {

struct ConstantRadiance {
    Rgb color = Rgb::Constant(0.5);
};

/// View-independent procedural palette:
///   c_k(p) = clamp(offset + amplitude * sin(frequency * axis_k . p + phase_k), 0, 1)
/// Channels clip to zero over a large fraction of the surface, so the clear
/// image has a dark channel near zero almost everywhere.
struct TextureRadiance {
    double frequency = 4.0;
    double amplitude = 0.6;
    double offset = 0.35;
    std::array<Vec3, 3> axes = {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
    Rgb phases = Rgb(0.0, 2.0, 4.0);

    Rgb eval(const Vec3& p) const;
};

/// Piecewise constant colour, one per octant (index bit0: x >= 0, bit1: y >= 0, bit2: z >= 0).
struct OctantRadiance {
    std::array<Rgb, 8> colors;

    Rgb eval(const Vec3& p) const;
};

struct NeuralRadianceConfig {
    int position_frequencies = 6;
    int direction_frequencies = 4;
    int hidden = 64;
    int layers = 3;
    /// Off: the view direction is not an input (Lambertian radiance).
    bool view_dependent = true;
};

/// (encoded p, encoded d) -> ReLU MLP -> sigmoid RGB.
class NeuralRadiance {
public:
    NeuralRadiance() = default;
    NeuralRadiance(NeuralRadianceConfig cfg, ParamStore& params, std::uint64_t seed,
                   const std::string& prefix = "radiance");

    const NeuralRadianceConfig& config() const { return cfg_; }
    Var evaluate(Tape& tape, const ParamStore& params, const Matrix& points, const Matrix& dirs) const;

private:
    NeuralRadianceConfig cfg_;
    std::vector<Dense> layers_;
};

class RadianceField {
public:
    using Variant = std::variant<ConstantRadiance, TextureRadiance, OctantRadiance, NeuralRadiance>;

    RadianceField() : impl_(ConstantRadiance{}) {}
    template <typename T>
    RadianceField(T v) : impl_(std::move(v)) {}

    bool is_analytic() const { return !std::holds_alternative<NeuralRadiance>(impl_); }
    const Variant& variant() const { return impl_; }

    /// Analytic variants only.
    Rgb eval(const Vec3& p, const Vec3& d) const;
    /// B x 3 colours for rows of `points` / `dirs`.
    Var evaluate(Tape& tape, const ParamStore& params, const Matrix& points, const Matrix& dirs) const;

private:
    Variant impl_;
};

}  // namespace hazerf
