#pragma once

#include "hazerf/fields/scene.hpp"
#include "hazerf/losses/losses.hpp"
#include "hazerf/synth/synth.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <optional>

namespace hazerf {

struct TrainConfig {
    int batch_rays = 512;
    int n_samples = 64;
    double lr_peak = 5e-4;
    double lr_min = 2.5e-5;
    /// Multiplier on the learning rate of the medium and airlight tensors.
    double haze_lr_scale = 1.0;
    int warmup_iters = 500;
    int total_iters = 20000;
    /// First iteration of stage 2 (haze enabled).
    int haze_enable_iter = 5000;
    LossWeights weights;
    /// Side of the square pixel patches drawn while the dark channel term is active.
    int patch_size = 8;
    int dcp_window = 1;
    std::uint64_t seed = 0;
    bool use_mask = true;
    bool stratified = true;
    int checkpoint_every = 1000;
    int log_every = 10;
    int threads = 1;
};

/// Throws unless 0 <= warmup <= haze_enable <= total, 0 < lr_min <= lr_peak,
/// the batch is a positive multiple of patch_size^2 and the weights are valid.
void validate_config(const TrainConfig& cfg);

nlohmann::json config_to_json(const TrainConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig config_from_json(const nlohmann::json& j);

/// Linear warmup from 0 to lr_peak, then cosine decay to lr_min at total_iters.
double lr_schedule(int iter, const TrainConfig& cfg);

/// Bias-corrected Adam. Each parameter tensor keeps its own step count so a
/// tensor enabled late starts from fresh moments.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::vector<std::int64_t> step;

    AdamState() = default;
    explicit AdamState(const ParamStore& params);

    void reset(std::size_t index);
    /// Moments and steps stored as a parameter checkpoint.
    ParamStore to_store(const ParamStore& params) const;
    static AdamState from_store(const ParamStore& store, const ParamStore& params);
};

/// Updates every tensor with active[i] (all when `active` is empty) using
/// its accumulated gradient, at rate lr * lr_scale[i] (lr when empty).
/// Gradients are left untouched. Throws, naming the tensor, if an active
/// gradient is non-finite; nothing is updated then.
void adam_step(ParamStore& params, AdamState& state, double lr, const std::vector<bool>& active = {},
               const std::vector<double>& lr_scale = {});

/// True for tensors of the medium and airlight.
bool is_haze_param(const std::string& name);

/// Learnable scene description used by `make_model`.
enum class MediumModel { None, Scalar, BandLimited };

struct ModelConfig {
    NeuralSdfConfig sdf{6, 64, 4, 2, 0.5, 100.0};
    NeuralRadianceConfig radiance{6, 4, 64, 3};
    MediumModel medium = MediumModel::Scalar;
    BandLimitedConfig band_limited;
    double init_sigma = 0.05;
    Rgb init_airlight = Rgb::Constant(0.5);
    double init_sharpness = 20.0;
    Rgb background = Rgb::Zero();
};

nlohmann::json model_config_to_json(const ModelConfig& m);
ModelConfig model_config_from_json(const nlohmann::json& j);

SceneModel make_model(const ModelConfig& m, std::uint64_t seed);

/// model.json: the scene description plus the seed that fixes structure
/// not held in parameters (network init, band-limited filter frequencies).
/// `train` writes it with cfg.seed, so models must be built with that seed.
void save_model_file(const std::filesystem::path& path, const SceneModel& scene, std::uint64_t seed);
/// Rebuilds the scene from `model.json` next to the checkpoint and loads its values.
SceneModel load_trained_model(const std::filesystem::path& checkpoint);

struct TrainStats {
    int iterations_run = 0;
    double last_loss = 0.0;
    std::filesystem::path final_checkpoint;
};

struct TrainHooks {
    /// Called after each step with the iteration just completed.
    std::function<void(int iter, SceneModel&, const LossParts&)> after_step;
};

/// Trains `scene` in place on the train split, writing checkpoints,
/// Adam state, model.json and loss.csv to `out_dir`. With `resume` the
/// newest checkpoint in `out_dir` is loaded first. A non-finite loss or
/// gradient aborts with an Error; the checkpoints already written remain.
TrainStats train(const Dataset& data, SceneModel& scene, const TrainConfig& cfg, const std::filesystem::path& out_dir,
                 bool resume = false, const TrainHooks& hooks = {});

/// The loss and gradients of one iteration, accumulated into scene.params.
/// Deterministic for any thread count.
LossParts train_iteration_loss(const Dataset& data, SceneModel& scene, const TrainConfig& cfg, int iter);

struct EvalReport {
    int views = 0;
    double psnr = 0.0;
    double ssim = 0.0;
    /// The hazy input against the clear ground truth.
    double hazy_psnr = 0.0;
    std::optional<double> geometry_error;
    double sigma_hat = 0.0;
    Rgb c_s_hat = Rgb::Zero();
    std::optional<double> sigma_rel_error;
    std::optional<double> c_s_error;

    nlohmann::json to_json() const;
};

/// Renders the clear view of every view of the split and compares it with
/// the ground-truth clear images.
EvalReport evaluate(const SceneModel& scene, const Dataset& data, bool test_split, int n_samples, int threads,
                    int geometry_points = 10000);

}  // namespace hazerf
