#pragma once

#include "hazerf/fields/scene.hpp"
#include "hazerf/renderer/camera.hpp"
#include "hazerf/renderer/image_io.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hazerf {

struct CameraRig {
    std::vector<Camera> views;
};

/// n_views cameras on a Fibonacci sphere of the given radius, each looking
/// at the origin with the unit sphere filling ~90% of the frame. The
/// azimuth offset of the spiral comes from `seed`.
CameraRig make_rig(int n_views, double radius, int resolution, std::uint64_t seed);

struct HazeSpec {
    enum class Kind { None, Homogeneous, Blobs };
    Kind kind = Kind::None;
    double sigma = 0.0;  // homogeneous coefficient
    std::vector<GaussianBlob> blobs;
    Rgb c_s = Rgb::Zero();
    /// Homogeneous only: synthesize with the 2-D law from traced depth
    /// instead of integrating the medium.
    bool koschmieder = false;
    /// Box the blob centres were drawn from.
    Vec3 box_min = Vec3::Constant(-1.0);
    Vec3 box_max = Vec3::Constant(1.0);

    static HazeSpec none();
    static HazeSpec homogeneous(double sigma, const Rgb& c_s);
    /// `count` blobs with centres uniform in the box, std ~ U[1, 3], each
    /// with the given amplitude; c_s ~ U[0.7, 0.9]^3.
    static HazeSpec random_blobs(double amplitude, int count, std::uint64_t seed);
    /// c_s ~ U[0.7, 0.9]^3 from `seed`.
    static Rgb random_airlight(std::uint64_t seed);

    ScatteringField field() const;
};

/// Text forms:
///   none
///   homogeneous:SIGMA            (c_s drawn from the seed)
///   homogeneous:SIGMA:C          (grey c_s)
///   homogeneous:SIGMA:R,G,B
///   koschmieder:...              (as homogeneous, 2-D synthesis)
///   blobs:amp=A[:n=COUNT]        (COUNT defaults to 4)
HazeSpec parse_haze_spec(std::string_view text, std::uint64_t seed);

nlohmann::json haze_to_json(const HazeSpec& h);
HazeSpec haze_from_json(const nlohmann::json& j);

/// Names accepted by standard_scene.
const std::vector<std::string>& standard_scene_names();

/// Analytic scenes inside the unit sphere, with a black background and no medium:
///   sphere      textured sphere of radius 0.5
///   sphere_box  textured union of a sphere and a box
///   octant      sphere coloured per octant
SceneModel standard_scene(std::string_view name);

/// Copies `base` and attaches the medium and fixed airlight of `haze`.
SceneModel with_haze(const SceneModel& base, const HazeSpec& haze);

/// Unquantized renders of one view.
struct SynthView {
    Image hazy;   // 3 channels
    Image clear;  // 3 channels
    Image depth;  // 1 channel, distance along the ray from the camera centre, 0 on a miss
    Image mask;   // 1 channel, 1 where the ray hits the surface within [t_near, t_far]
};

SynthView render_synthetic_view(const SceneModel& scene, const Camera& cam, const HazeSpec& haze, int n_samples_oracle,
                                int threads);

inline constexpr int kManifestVersion = 1;

struct ManifestView {
    std::string name;
    bool test = false;
    Camera camera;
    std::string image;  // paths relative to the manifest directory
    std::string mask;   // empty when absent
    std::string clear;  // ground truth, empty when absent
    std::string depth;
};

struct DatasetManifest {
    std::string scene_name;
    std::vector<ManifestView> views;
    double scale = 1.0;
    Vec3 translation = Vec3::Zero();
    Vec3 box_min = Vec3::Constant(-1.0);
    Vec3 box_max = Vec3::Constant(1.0);
    Rgb background = Rgb::Zero();
    std::optional<HazeSpec> haze;                   // ground truth
    std::optional<nlohmann::json> scene;            // ground-truth scene description
    std::vector<std::pair<std::string, std::uint32_t>> checksums;  // CRC32 per file

    std::size_t count(bool test) const;
};

nlohmann::json manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);

nlohmann::json camera_to_json(const Camera& c);
Camera camera_from_json(const nlohmann::json& j);

/// Indices of the held-out views: max(1, n / 10) of them, evenly spaced.
std::vector<std::size_t> test_view_indices(std::size_t n_views);

/// Renders every view and writes images/, clear/, depth/, masks/ and
/// manifest.json under `out_dir`. Returns the manifest.
DatasetManifest synthesize_dataset(const SceneModel& scene, std::string_view scene_name, const CameraRig& rig,
                                   const HazeSpec& haze, int n_samples_oracle, const std::filesystem::path& out_dir,
                                   int threads);

struct DatasetView {
    std::string name;
    bool test = false;
    Camera camera;
    Image image;
    std::optional<Image> mask;
    std::optional<Image> clear;
    std::optional<Image> depth;
};

struct Dataset {
    std::filesystem::path root;
    DatasetManifest manifest;
    std::vector<DatasetView> views;

    std::vector<std::size_t> split(bool test) const;
};

/// Reads the manifest and every file it lists, verifying checksums.
Dataset load_dataset(const std::filesystem::path& manifest_path);

}  // namespace hazerf
