#include "hazerf/trainer/trainer.hpp"

#include "hazerf/diffcore/checkpoint.hpp"
#include "hazerf/error.hpp"
#include "hazerf/trainer/metrics.hpp"
#include "hazerf/util/parallel.hpp"
#include "hazerf/util/rng.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>

namespace hazerf {

using nlohmann::json;
namespace fs = std::filesystem;

void validate_config(const TrainConfig& c)
{
    if (c.batch_rays < 1 || c.n_samples < 1)
        throw Error("config: batch_rays and n_samples must be positive");
    if (!(c.warmup_iters >= 0 && c.warmup_iters <= c.haze_enable_iter && c.haze_enable_iter <= c.total_iters))
        throw Error("config: need 0 <= warmup_iters <= haze_enable_iter <= total_iters");
    if (c.total_iters < 1)
        throw Error("config: total_iters must be positive");
    if (!(c.lr_min > 0.0 && c.lr_min <= c.lr_peak && std::isfinite(c.lr_peak)))
        throw Error("config: need 0 < lr_min <= lr_peak");
    if (c.patch_size < 1)
        throw Error("config: patch_size must be positive");
    if (c.weights.alpha_dcp > 0.0) {
        if (c.batch_rays % (c.patch_size * c.patch_size) != 0)
            throw Error("config: batch_rays must be a multiple of patch_size^2 when the dark channel term is on");
        if (c.dcp_window < 1 || c.dcp_window % 2 == 0 || c.dcp_window > c.patch_size)
            throw Error("config: dcp_window must be odd and at most patch_size");
    }
    if (!(c.haze_lr_scale > 0.0 && std::isfinite(c.haze_lr_scale)))
        throw Error("config: haze_lr_scale must be positive");
    if (c.checkpoint_every < 1 || c.log_every < 1 || c.threads < 1)
        throw Error("config: checkpoint_every, log_every and threads must be positive");
    validate_weights(c.weights);
}

json config_to_json(const TrainConfig& c)
{
    return {{"batch_rays", c.batch_rays},
            {"n_samples", c.n_samples},
            {"lr_peak", c.lr_peak},
            {"lr_min", c.lr_min},
            {"haze_lr_scale", c.haze_lr_scale},
            {"warmup_iters", c.warmup_iters},
            {"total_iters", c.total_iters},
            {"haze_enable_iter", c.haze_enable_iter},
            {"lambda_eikonal", c.weights.lambda_eikonal},
            {"alpha_dcp", c.weights.alpha_dcp},
            {"beta_2d", c.weights.beta_2d},
            {"gamma_mask", c.weights.gamma_mask},
            {"patch_size", c.patch_size},
            {"dcp_window", c.dcp_window},
            {"seed", c.seed},
            {"use_mask", c.use_mask},
            {"stratified", c.stratified},
            {"checkpoint_every", c.checkpoint_every},
            {"log_every", c.log_every},
            {"threads", c.threads}};
}

TrainConfig config_from_json(const json& j)
{
    if (!j.is_object())
        throw Error("config: expected an object");
    TrainConfig c;
    static const std::set<std::string> known = [] {
        std::set<std::string> k;
        const json defaults = config_to_json(TrainConfig{});
        for (const auto& [key, _] : defaults.items())
            k.insert(key);
        return k;
    }();
    for (const auto& [key, _] : j.items())
        if (!known.count(key))
            throw Error("config: unknown key '" + key + "'");
    try {
        auto get = [&](const char* key, auto& dst) {
            if (j.contains(key))
                j.at(key).get_to(dst);
        };
        get("batch_rays", c.batch_rays);
        get("n_samples", c.n_samples);
        get("lr_peak", c.lr_peak);
        get("lr_min", c.lr_min);
        get("haze_lr_scale", c.haze_lr_scale);
        get("warmup_iters", c.warmup_iters);
        get("total_iters", c.total_iters);
        get("haze_enable_iter", c.haze_enable_iter);
        get("lambda_eikonal", c.weights.lambda_eikonal);
        get("alpha_dcp", c.weights.alpha_dcp);
        get("beta_2d", c.weights.beta_2d);
        get("gamma_mask", c.weights.gamma_mask);
        get("patch_size", c.patch_size);
        get("dcp_window", c.dcp_window);
        get("seed", c.seed);
        get("use_mask", c.use_mask);
        get("stratified", c.stratified);
        get("checkpoint_every", c.checkpoint_every);
        get("log_every", c.log_every);
        get("threads", c.threads);
    } catch (const json::exception& e) {
        throw Error(std::string("config: ") + e.what());
    }
    validate_config(c);
    return c;
}

double lr_schedule(int iter, const TrainConfig& c)
{
    if (iter < 0 || iter > c.total_iters)
        throw Error("lr_schedule: iteration " + std::to_string(iter) + " outside [0, " +
                    std::to_string(c.total_iters) + "]");
    if (iter < c.warmup_iters)
        return c.lr_peak * iter / c.warmup_iters;
    if (c.total_iters == c.warmup_iters)
        return c.lr_peak;
    const double progress = static_cast<double>(iter - c.warmup_iters) / (c.total_iters - c.warmup_iters);
    return c.lr_min + 0.5 * (c.lr_peak - c.lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamState::AdamState(const ParamStore& params)
{
    for (const auto& e : params.entries()) {
        m.emplace_back(e.size(), 0.0);
        v.emplace_back(e.size(), 0.0);
        step.push_back(0);
    }
}

void AdamState::reset(std::size_t i)
{
    std::fill(m.at(i).begin(), m.at(i).end(), 0.0);
    std::fill(v.at(i).begin(), v.at(i).end(), 0.0);
    step.at(i) = 0;
}

ParamStore AdamState::to_store(const ParamStore& params) const
{
    ParamStore s;
    s.add("adam.hyper", {3}, {beta1, beta2, eps});
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& e = params.at(i);
        s.add("m/" + e.name, e.shape, m[i]);
        s.add("v/" + e.name, e.shape, v[i]);
        s.add("step/" + e.name, {1}, {static_cast<double>(step[i])});
    }
    return s;
}

AdamState AdamState::from_store(const ParamStore& store, const ParamStore& params)
{
    AdamState a(params);
    try {
        const auto& h = store.at("adam.hyper").values;
        a.beta1 = h.at(0);
        a.beta2 = h.at(1);
        a.eps = h.at(2);
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto& e = params.at(i);
            const auto& m = store.at("m/" + e.name).values;
            const auto& v = store.at("v/" + e.name).values;
            if (m.size() != e.size() || v.size() != e.size())
                throw Error("optimizer state: size mismatch for " + e.name);
            a.m[i] = m;
            a.v[i] = v;
            a.step[i] = static_cast<std::int64_t>(store.at("step/" + e.name).values.at(0));
        }
    } catch (const std::out_of_range& e) {
        throw Error(std::string("optimizer state does not match the model: ") + e.what());
    }
    return a;
}

void adam_step(ParamStore& params, AdamState& s, double lr, const std::vector<bool>& active,
               const std::vector<double>& lr_scale)
{
    if (s.m.size() != params.size())
        throw Error("adam_step: optimizer state does not match the parameters");
    if (!active.empty() && active.size() != params.size())
        throw Error("adam_step: activity mask has the wrong length");
    if (!lr_scale.empty() && lr_scale.size() != params.size())
        throw Error("adam_step: lr_scale has the wrong length");
    auto on = [&](std::size_t i) { return active.empty() || active[i]; };
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!on(i))
            continue;
        for (double g : params.at(i).grad)
            if (!std::isfinite(g))
                throw Error("adam_step: non-finite gradient in parameter '" + params.at(i).name + "'");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!on(i))
            continue;
        auto& e = params.at(i);
        auto& m = s.m[i];
        auto& v = s.v[i];
        const std::int64_t t = ++s.step[i];
        const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(t));
        const double rate = lr_scale.empty() ? lr : lr * lr_scale[i];
        for (std::size_t j = 0; j < e.size(); ++j) {
            const double g = e.grad[j];
            m[j] = s.beta1 * m[j] + (1.0 - s.beta1) * g;
            v[j] = s.beta2 * v[j] + (1.0 - s.beta2) * g * g;
            e.values[j] -= rate * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + s.eps);
        }
    }
}

bool is_haze_param(const std::string& name)
{
    return name.starts_with("scatter.") || name.starts_with("airlight.");
}

json model_config_to_json(const ModelConfig& m)
{
    const char* medium = m.medium == MediumModel::None ? "none" : m.medium == MediumModel::Scalar ? "scalar" : "band_limited";
    return {{"sdf",
             {{"frequencies", m.sdf.frequencies},
              {"hidden", m.sdf.hidden},
              {"layers", m.sdf.layers},
              {"skip_layer", m.sdf.skip_layer},
              {"init_radius", m.sdf.init_radius},
              {"softplus_beta", m.sdf.softplus_beta}}},
            {"radiance",
             {{"position_frequencies", m.radiance.position_frequencies},
              {"direction_frequencies", m.radiance.direction_frequencies},
              {"view_dependent", m.radiance.view_dependent},
              {"hidden", m.radiance.hidden},
              {"layers", m.radiance.layers}}},
            {"medium", medium},
            {"band_limited",
             {{"max_frequency", m.band_limited.max_frequency},
              {"hidden", m.band_limited.hidden},
              {"layers", m.band_limited.layers}}},
            {"init_sigma", m.init_sigma},
            {"init_airlight", vec_to_json(m.init_airlight)},
            {"init_sharpness", m.init_sharpness},
            {"background", vec_to_json(m.background)}};
}

ModelConfig model_config_from_json(const json& j)
{
    ModelConfig m;
    try {
        if (j.contains("sdf")) {
            const auto& s = j.at("sdf");
            m.sdf.frequencies = s.value("frequencies", m.sdf.frequencies);
            m.sdf.hidden = s.value("hidden", m.sdf.hidden);
            m.sdf.layers = s.value("layers", m.sdf.layers);
            m.sdf.skip_layer = s.value("skip_layer", m.sdf.skip_layer);
            m.sdf.init_radius = s.value("init_radius", m.sdf.init_radius);
            m.sdf.softplus_beta = s.value("softplus_beta", m.sdf.softplus_beta);
        }
        if (j.contains("radiance")) {
            const auto& r = j.at("radiance");
            m.radiance.position_frequencies = r.value("position_frequencies", m.radiance.position_frequencies);
            m.radiance.direction_frequencies = r.value("direction_frequencies", m.radiance.direction_frequencies);
            m.radiance.view_dependent = r.value("view_dependent", m.radiance.view_dependent);
            m.radiance.hidden = r.value("hidden", m.radiance.hidden);
            m.radiance.layers = r.value("layers", m.radiance.layers);
        }
        const auto medium = j.value("medium", std::string("scalar"));
        if (medium == "none")
            m.medium = MediumModel::None;
        else if (medium == "scalar")
            m.medium = MediumModel::Scalar;
        else if (medium == "band_limited")
            m.medium = MediumModel::BandLimited;
        else
            throw Error("model: unknown medium '" + medium + "'");
        if (j.contains("band_limited")) {
            const auto& b = j.at("band_limited");
            m.band_limited.max_frequency = b.value("max_frequency", m.band_limited.max_frequency);
            m.band_limited.hidden = b.value("hidden", m.band_limited.hidden);
            m.band_limited.layers = b.value("layers", m.band_limited.layers);
        }
        m.init_sigma = j.value("init_sigma", m.init_sigma);
        if (j.contains("init_airlight"))
            m.init_airlight = vec_from_json(j.at("init_airlight"));
        m.init_sharpness = j.value("init_sharpness", m.init_sharpness);
        if (j.contains("background"))
            m.background = vec_from_json(j.at("background"));
    } catch (const json::exception& e) {
        throw Error(std::string("model: ") + e.what());
    }
    return m;
}

SceneModel make_model(const ModelConfig& m, std::uint64_t seed)
{
    SceneModel s;
    s.sdf = NeuralSdf(m.sdf, s.params, seed);
    s.radiance = NeuralRadiance(m.radiance, s.params, seed);
    switch (m.medium) {
    case MediumModel::None: break;
    case MediumModel::Scalar: s.scattering = ScalarScattering(m.init_sigma, s.params); break;
    case MediumModel::BandLimited: {
        BandLimitedConfig b = m.band_limited;
        b.init_sigma = m.init_sigma;
        s.scattering = BandLimitedScattering(b, s.params, seed);
        break;
    }
    }
    if (m.medium != MediumModel::None)
        s.airlight = AtmosphericLight(m.init_airlight, s.params);
    s.sharpness = Sharpness(m.init_sharpness, s.params);
    s.background = m.background;
    return s;
}

void save_model_file(const fs::path& path, const SceneModel& scene, std::uint64_t seed)
{
    std::ofstream out(path);
    out << json{{"version", 1}, {"seed", seed}, {"scene", scene_to_json(scene)}}.dump(2) << '\n';
    if (!out)
        throw Error("cannot write " + path.string());
}

SceneModel load_trained_model(const fs::path& checkpoint)
{
    const fs::path model = checkpoint.parent_path() / "model.json";
    std::ifstream in(model);
    if (!in)
        throw Error("cannot open " + model.string() + " next to the checkpoint");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(model.string() + ": " + e.what());
    }
    SceneModel s = scene_from_json(j.at("scene"), j.at("seed").get<std::uint64_t>());
    try {
        restore_values(s.params, load_checkpoint(checkpoint));
    } catch (const Error& e) {
        throw Error("checkpoint " + checkpoint.string() + " does not match " + model.string() + ": " + e.what());
    }
    return s;
}

namespace {

struct PixelRef {
    std::size_t view = 0;
    int x = 0;
    int y = 0;
};

bool stage2(const TrainConfig& c, int iter) { return iter >= c.haze_enable_iter; }

bool patch_mode(const TrainConfig& c, int iter) { return stage2(c, iter) && c.weights.alpha_dcp > 0.0; }

LossWeights stage_weights(const TrainConfig& c, int iter)
{
    LossWeights w = c.weights;
    if (!stage2(c, iter)) {
        w.alpha_dcp = 0.0;
        w.beta_2d = 0.0;
    }
    return w;
}

std::vector<PixelRef> sample_pixels(const Dataset& data, const std::vector<std::size_t>& train, const TrainConfig& c,
                                    int iter)
{
    const auto it = static_cast<std::uint64_t>(iter);
    auto u = [&](std::uint64_t k, std::uint64_t j) { return uniform01(hash_key({c.seed, hash_name("batch"), it, k, j})); };
    auto pick = [](double r, std::size_t n) { return std::min(n - 1, static_cast<std::size_t>(r * static_cast<double>(n))); };
    std::vector<PixelRef> px;
    px.reserve(static_cast<std::size_t>(c.batch_rays));
    if (!patch_mode(c, iter)) {
        for (int k = 0; k < c.batch_rays; ++k) {
            const std::size_t v = train[pick(u(k, 0), train.size())];
            const Camera& cam = data.views[v].camera;
            px.push_back({v, static_cast<int>(pick(u(k, 1), cam.width)), static_cast<int>(pick(u(k, 2), cam.height))});
        }
        return px;
    }
    const int ps = c.patch_size;
    for (int p = 0; p < c.batch_rays / (ps * ps); ++p) {
        const std::size_t v = train[pick(u(p, 0), train.size())];
        const Camera& cam = data.views[v].camera;
        if (cam.width < ps || cam.height < ps)
            throw Error("train: image smaller than the patch size");
        const int x0 = static_cast<int>(pick(u(p, 1), static_cast<std::size_t>(cam.width - ps + 1)));
        const int y0 = static_cast<int>(pick(u(p, 2), static_cast<std::size_t>(cam.height - ps + 1)));
        for (int y = 0; y < ps; ++y)
            for (int x = 0; x < ps; ++x)
                px.push_back({v, x0 + x, y0 + y});
    }
    return px;
}

constexpr int kChunkRays = 64;

}  // namespace

LossParts train_iteration_loss(const Dataset& data, SceneModel& scene, const TrainConfig& c, int iter)
{
    const auto train = data.split(false);
    if (train.empty())
        throw Error("train: the dataset has no training views");
    const auto px = sample_pixels(data, train, c, iter);
    const bool patches = patch_mode(c, iter);
    const int chunk = patches ? std::max(1, kChunkRays / (c.patch_size * c.patch_size)) * c.patch_size * c.patch_size
                              : kChunkRays;
    const std::size_t n_chunks = (px.size() + static_cast<std::size_t>(chunk) - 1) / static_cast<std::size_t>(chunk);
    const LossWeights w = stage_weights(c, iter);
    const bool mask_on = c.use_mask && w.gamma_mask > 0.0;

    RenderOptions opt;
    opt.n_samples = c.n_samples;
    opt.stratified = c.stratified;
    opt.seed = hash_key({c.seed, hash_name("strata"), static_cast<std::uint64_t>(iter)});
    opt.haze = stage2(c, iter);

    std::vector<GradientBuffer> grads(n_chunks);
    std::vector<LossParts> parts(n_chunks);
    parallel_for(n_chunks, c.threads, [&](std::size_t ci) {
        const std::size_t begin = ci * static_cast<std::size_t>(chunk);
        const std::size_t n = std::min(static_cast<std::size_t>(chunk), px.size() - begin);
        std::vector<Ray> rays(n);
        Matrix target(static_cast<Eigen::Index>(n), 3);
        Matrix mask(static_cast<Eigen::Index>(n), 1);
        for (std::size_t k = 0; k < n; ++k) {
            const PixelRef& p = px[begin + k];
            const DatasetView& v = data.views[p.view];
            rays[k] = pixel_ray(v.camera, p.x, p.y);
            rays[k].id = begin + k;
            const auto r = static_cast<Eigen::Index>(k);
            for (int ch = 0; ch < 3; ++ch)
                target(r, ch) = v.image.at(p.x, p.y, ch);
            if (mask_on) {
                if (!v.mask)
                    throw Error("train: view " + v.name + " has no mask but use_mask is set");
                mask(r, 0) = v.mask->at(p.x, p.y, 0);
            }
        }
        Tape tape;
        const RenderBatch b = render_batch(tape, scene, rays, opt);
        LossTerms t;
        t.color = loss_color(tape, b.hazy, target);
        t.eikonal = loss_eikonal(tape, b.grad_norm);
        if (w.alpha_dcp > 0.0)
            t.dcp = loss_dcp(tape, b.clear, c.patch_size, c.patch_size, c.dcp_window);
        if (w.beta_2d > 0.0)
            t.l2d = loss_2d(tape, b, target);
        if (mask_on)
            t.mask = loss_mask(tape, b.opacity, mask);
        const Var total = loss_total(tape, t, w);

        // every term is a mean over rays (or samples of equal count per ray), so
        // chunk means weighted by the chunk share give the batch mean
        const double share = static_cast<double>(n) / static_cast<double>(px.size());
        auto val = [&](Var v) { return v.valid() ? share * tape.scalar_value(v) : 0.0; };
        parts[ci] = {val(t.color), val(t.eikonal), val(t.dcp), val(t.l2d), val(t.mask)};
        grads[ci] = GradientBuffer(scene.params);
        tape.backward(total, Matrix::Constant(1, 1, share), grads[ci]);
    });

    LossParts sum;
    for (std::size_t ci = 0; ci < n_chunks; ++ci) {
        sum.color += parts[ci].color;
        sum.eikonal += parts[ci].eikonal;
        sum.dcp += parts[ci].dcp;
        sum.l2d += parts[ci].l2d;
        sum.mask += parts[ci].mask;
        grads[ci].add_into(scene.params);
    }
    return sum;
}

namespace {

std::string iter_name(int iter)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "ckpt_%07d", iter);
    return buf;
}

void write_latest(const fs::path& dir, int iter, const std::string& stem)
{
    const fs::path tmp = dir / "latest.json.tmp";
    {
        std::ofstream out(tmp);
        out << json{{"iteration", iter}, {"checkpoint", stem + ".bin"}, {"optimizer", stem + ".adam.bin"}}.dump(2)
            << '\n';
        if (!out)
            throw Error("cannot write " + tmp.string());
    }
    fs::rename(tmp, dir / "latest.json");
}

bool all_finite(const LossParts& p)
{
    for (double v : {p.color, p.eikonal, p.dcp, p.l2d, p.mask})
        if (!std::isfinite(v))
            return false;
    return true;
}

}  // namespace

TrainStats train(const Dataset& data, SceneModel& scene, const TrainConfig& c, const fs::path& out_dir, bool resume,
                 const TrainHooks& hooks)
{
    validate_config(c);
    if (data.split(false).empty())
        throw Error("train: the dataset has no training views");
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec)
        throw Error("cannot create " + out_dir.string() + ": " + ec.message());

    AdamState adam(scene.params);
    int start = 0;
    fs::path last_good;
    if (resume && fs::exists(out_dir / "latest.json")) {
        std::ifstream in(out_dir / "latest.json");
        json j;
        try {
            in >> j;
            start = j.at("iteration").get<int>();
            last_good = out_dir / j.at("checkpoint").get<std::string>();
            restore_values(scene.params, load_checkpoint(last_good));
            adam = AdamState::from_store(load_checkpoint(out_dir / j.at("optimizer").get<std::string>()), scene.params);
        } catch (const json::exception& e) {
            throw Error("resume: malformed latest.json: " + std::string(e.what()));
        }
        if (start > c.total_iters)
            throw Error("resume: checkpoint is past total_iters");
    } else {
        save_model_file(out_dir / "model.json", scene, c.seed);
    }
    LossLog log(out_dir / "loss.csv", resume && start > 0);

    std::vector<bool> surface_only(scene.params.size());
    std::vector<double> lr_scale(scene.params.size(), 1.0);
    std::vector<std::size_t> haze_params;
    for (std::size_t i = 0; i < scene.params.size(); ++i) {
        surface_only[i] = !is_haze_param(scene.params.at(i).name);
        if (!surface_only[i]) {
            haze_params.push_back(i);
            lr_scale[i] = c.haze_lr_scale;
        }
    }

    auto save = [&](int iter) {
        const std::string stem = iter_name(iter);
        save_checkpoint(out_dir / (stem + ".bin"), scene.params);
        save_checkpoint(out_dir / (stem + ".adam.bin"), adam.to_store(scene.params));
        write_latest(out_dir, iter, stem);
        last_good = out_dir / (stem + ".bin");
    };
    auto abort = [&](int iter, const std::string& why) {
        throw Error("training aborted at iteration " + std::to_string(iter) + ": " + why + "; last good checkpoint: " +
                    (last_good.empty() ? std::string("none") : last_good.string()));
    };

    TrainStats stats;
    for (int iter = start; iter < c.total_iters; ++iter) {
        if (iter == c.haze_enable_iter)
            for (std::size_t i : haze_params)
                adam.reset(i);
        scene.params.zero_grad();
        const LossParts parts = train_iteration_loss(data, scene, c, iter);
        const LossWeights w = stage_weights(c, iter);
        if (!all_finite(parts))
            abort(iter, "non-finite loss");
        const double lr = lr_schedule(iter, c);
        try {
            adam_step(scene.params, adam, lr, stage2(c, iter) ? std::vector<bool>{} : surface_only, lr_scale);
        } catch (const Error& e) {
            abort(iter, e.what());
        }
        if (iter % c.log_every == 0 || iter + 1 == c.total_iters)
            log.write(iter, parts, w, lr);
        stats.last_loss = loss_total(parts, w);
        ++stats.iterations_run;
        if (hooks.after_step)
            hooks.after_step(iter, scene, parts);
        if ((iter + 1) % c.checkpoint_every == 0 || iter + 1 == c.total_iters)
            save(iter + 1);
    }
    if (last_good.empty())
        save(c.total_iters);
    stats.final_checkpoint = out_dir / "final.bin";
    fs::copy_file(last_good, stats.final_checkpoint, fs::copy_options::overwrite_existing);
    return stats;
}

json EvalReport::to_json() const
{
    json j = {{"views", views},
              {"psnr", psnr},
              {"ssim", ssim},
              {"hazy_input_psnr", hazy_psnr},
              {"sigma_hat", sigma_hat},
              {"c_s_hat", vec_to_json(c_s_hat)}};
    if (geometry_error)
        j["geometry_error"] = *geometry_error;
    if (sigma_rel_error)
        j["sigma_rel_error"] = *sigma_rel_error;
    if (c_s_error)
        j["c_s_error"] = *c_s_error;
    return j;
}

EvalReport evaluate(const SceneModel& scene, const Dataset& data, bool test_split, int n_samples, int threads,
                    int geometry_points)
{
    const auto idx = data.split(test_split);
    if (idx.empty())
        throw Error(std::string("evaluate: the ") + (test_split ? "test" : "train") + " split is empty");
    EvalReport r;
    RenderOptions opt;
    opt.n_samples = n_samples;
    // analytic scenes (ground truth) are traced exactly like the synthesizer does
    opt.exact = scene.is_analytic();
    double sigma_sum = 0.0;
    std::size_t rays = 0;
    for (std::size_t i : idx) {
        const DatasetView& v = data.views[i];
        if (!v.clear)
            throw Error("evaluate: view " + v.name + " has no ground-truth clear image");
        const auto px = render_image(scene, v.camera, opt, threads);
        Image clear(v.camera.width, v.camera.height, 3);
        for (int y = 0; y < clear.height; ++y)
            for (int x = 0; x < clear.width; ++x) {
                const RenderOutput& o = px[static_cast<std::size_t>(y) * clear.width + x];
                for (int k = 0; k < 3; ++k)
                    clear.at(x, y, k) = o.clear[k];
                sigma_sum += o.sigma_s_bar;
                ++rays;
            }
        r.psnr += psnr(clear, *v.clear);
        r.ssim += ssim(clear, *v.clear);
        r.hazy_psnr += psnr(v.image, *v.clear);
        ++r.views;
    }
    r.psnr /= r.views;
    r.ssim /= r.views;
    r.hazy_psnr /= r.views;
    if (const auto* s = std::get_if<ScalarScattering>(&scene.scattering.variant()))
        r.sigma_hat = s->value(scene.params);
    else if (const auto* c = std::get_if<ConstantScattering>(&scene.scattering.variant()))
        r.sigma_hat = c->sigma;
    else
        r.sigma_hat = sigma_sum / static_cast<double>(rays);
    r.c_s_hat = scene.airlight.value(scene.params);

    const auto& m = data.manifest;
    if (m.haze && m.haze->kind != HazeSpec::Kind::None) {
        r.c_s_error = (r.c_s_hat - m.haze->c_s).cwiseAbs().maxCoeff();
        if (m.haze->kind == HazeSpec::Kind::Homogeneous && m.haze->sigma > 0.0)
            r.sigma_rel_error = std::abs(r.sigma_hat - m.haze->sigma) / m.haze->sigma;
    }
    if (m.scene && geometry_points > 0) {
        const SceneModel truth = scene_from_json(*m.scene, 0);
        if (truth.sdf.is_analytic())
            r.geometry_error = geometry_error(scene.sdf, scene.params, truth.sdf.analytic(), geometry_points, 0);
    }
    return r;
}

}  // namespace hazerf
