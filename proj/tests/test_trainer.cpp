#include <doctest.h>

#include "hazerf/diffcore/checkpoint.hpp"
#include "hazerf/error.hpp"
#include "hazerf/trainer/metrics.hpp"
#include "hazerf/trainer/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

using namespace hazerf;
namespace fs = std::filesystem;

namespace {

struct ScratchDir {
    fs::path path;
    explicit ScratchDir(const std::string& name) : path(fs::temp_directory_path() / name)
    {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~ScratchDir() { fs::remove_all(path); }
};

Image random_image(std::mt19937_64& rng, int w, int h)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image im(w, h, 3);
    for (double& v : im.data)
        v = u(rng);
    return im;
}

// Straightforward SSIM: Gaussian-filtered moment maps over the valid region,
// then the mean of the SSIM map.
double brute_ssim(const Image& a, const Image& b)
{
    const int win = 11;
    double kernel[win][win];
    double ksum = 0.0;
    for (int j = 0; j < win; ++j)
        for (int i = 0; i < win; ++i)
            ksum += kernel[j][i] = std::exp(-((i - 5.0) * (i - 5.0) + (j - 5.0) * (j - 5.0)) / (2.0 * 1.5 * 1.5));
    const double c1 = std::pow(0.01, 2), c2 = std::pow(0.03, 2);
    double sum = 0.0;
    int count = 0;
    for (int c = 0; c < 3; ++c)
        for (int y = 5; y < a.height - 5; ++y)
            for (int x = 5; x < a.width - 5; ++x) {
                auto filt = [&](auto f) {
                    double s = 0.0;
                    for (int j = 0; j < win; ++j)
                        for (int i = 0; i < win; ++i)
                            s += kernel[j][i] / ksum * f(a.at(x + i - 5, y + j - 5, c), b.at(x + i - 5, y + j - 5, c));
                    return s;
                };
                const double mu_a = filt([](double p, double) { return p; });
                const double mu_b = filt([](double, double q) { return q; });
                const double var_a = filt([&](double p, double) { return (p - mu_a) * (p - mu_a); });
                const double var_b = filt([&](double, double q) { return (q - mu_b) * (q - mu_b); });
                const double cov = filt([&](double p, double q) { return (p - mu_a) * (q - mu_b); });
                sum += (2 * mu_a * mu_b + c1) * (2 * cov + c2) / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
                ++count;
            }
    return sum / count;
}

TrainConfig tiny_config()
{
    TrainConfig c;
    c.batch_rays = 64;
    c.n_samples = 16;
    c.total_iters = 12;
    c.warmup_iters = 2;
    c.haze_enable_iter = 6;
    c.checkpoint_every = 4;
    c.log_every = 1;
    c.lr_peak = 1e-3;
    c.lr_min = 1e-4;
    c.seed = 5;
    return c;
}

ModelConfig tiny_model(MediumModel medium)
{
    ModelConfig m;
    m.sdf = NeuralSdfConfig{2, 8, 2, 1, 0.5, 100.0};
    m.radiance = NeuralRadianceConfig{2, 1, 8, 2};
    m.medium = medium;
    m.band_limited = BandLimitedConfig{4.0, 8, 2, 0.05};
    return m;
}

// Small hazy dataset shared by the training tests.
const Dataset& tiny_dataset()
{
    static const Dataset d = [] {
        const fs::path dir = fs::temp_directory_path() / "hazerf_trainer_data";
        fs::remove_all(dir);
        synthesize_dataset(standard_scene("sphere"), "sphere", make_rig(6, 2.5, 16, 1),
                           HazeSpec::homogeneous(0.5, Rgb(0.8, 0.75, 0.7)), 1024, dir, 1);
        Dataset out = load_dataset(dir / "manifest.json");
        fs::remove_all(dir);
        return out;
    }();
    return d;
}

std::vector<double> values_of(const ParamStore& p, const std::string& name) { return p.at(name).values; }

}  // namespace

TEST_CASE("lr schedule: warmup, peak, cosine floor")
{
    TrainConfig c;
    c.warmup_iters = 500;
    c.total_iters = 20000;
    c.haze_enable_iter = 5000;
    CHECK(lr_schedule(0, c) == 0.0);
    CHECK(lr_schedule(500, c) == doctest::Approx(5e-4).epsilon(1e-15));
    CHECK(lr_schedule(20000, c) == doctest::Approx(2.5e-5).epsilon(1e-12));
    CHECK(lr_schedule(250, c) == doctest::Approx(2.5e-4));
    // continuity at the warmup boundary: the step across it is no larger than a warmup step
    CHECK(std::abs(lr_schedule(500, c) - lr_schedule(499, c)) <= 5e-4 / 500 * (1 + 1e-12));
    CHECK(std::abs(lr_schedule(501, c) - lr_schedule(500, c)) <= 5e-4 / 500);
    for (int i = 500; i < 20000; i += 97)
        CHECK(lr_schedule(i + 1, c) <= lr_schedule(i, c));
    const double mid = 2.5e-5 + 0.5 * (5e-4 - 2.5e-5);
    CHECK(lr_schedule(500 + 9750, c) == doctest::Approx(mid).epsilon(1e-12));
    CHECK_THROWS_AS(lr_schedule(-1, c), Error);
    CHECK_THROWS_AS(lr_schedule(20001, c), Error);
}

TEST_CASE("config validation and round trip")
{
    TrainConfig c;
    CHECK_NOTHROW(validate_config(c));
    TrainConfig bad = c;
    bad.haze_enable_iter = c.total_iters + 1;
    CHECK_THROWS_AS(validate_config(bad), Error);
    bad = c;
    bad.warmup_iters = c.haze_enable_iter + 1;
    CHECK_THROWS_AS(validate_config(bad), Error);
    bad = c;
    bad.lr_min = 1e-3;
    CHECK_THROWS_AS(validate_config(bad), Error);
    bad = c;
    bad.batch_rays = 100;  // not a multiple of 8x8 with the dark channel on
    CHECK_THROWS_AS(validate_config(bad), Error);
    bad.weights.alpha_dcp = 0.0;
    CHECK_NOTHROW(validate_config(bad));
    bad.haze_lr_scale = 0.0;
    CHECK_THROWS_AS(validate_config(bad), Error);

    c.seed = 42;
    c.weights.beta_2d = 0.5;
    const TrainConfig back = config_from_json(config_to_json(c));
    CHECK(config_to_json(back) == config_to_json(c));
    CHECK_THROWS_WITH_AS(config_from_json(nlohmann::json{{"batch_size", 3}}), doctest::Contains("batch_size"), Error);
    CHECK(config_from_json(nlohmann::json::object()).batch_rays == 512);
}

TEST_CASE("adam: closed-form first step and edge cases")
{
    ParamStore p;
    p.add("w", {1}, {0.0});
    p.add("u", {2}, {1.0, -2.0});
    AdamState s(p);

    adam_step(p, s, 0.1);  // zero gradient
    CHECK(p.at("w").values[0] == 0.0);
    CHECK(p.at("u").values == std::vector<double>{1.0, -2.0});

    ParamStore q;
    q.add("w", {1}, {0.0});
    AdamState sq(q);
    q.at("w").grad[0] = 1.0;
    adam_step(q, sq, 0.1);
    CHECK(q.at("w").values[0] == doctest::Approx(-0.1).epsilon(1e-7));
    CHECK(q.at("w").grad[0] == 1.0);  // gradient left for the caller

    q.at("w").grad[0] = std::nan("");
    const double before = q.at("w").values[0];
    CHECK_THROWS_WITH_AS(adam_step(q, sq, 0.1), doctest::Contains("'w'"), Error);
    CHECK(q.at("w").values[0] == before);

    // inactive tensors are neither checked nor moved
    p.at("w").grad[0] = std::nan("");
    p.at("u").grad = {1.0, 1.0};
    adam_step(p, s, 0.1, {false, true});
    CHECK(s.step[0] == 1);
    CHECK(s.step[1] == 2);
    CHECK(p.at("w").values[0] == 0.0);

    // per-tensor rate multipliers scale the first step exactly
    ParamStore r;
    r.add("a", {1}, {0.0});
    r.add("b", {1}, {0.0});
    AdamState sr(r);
    r.at("a").grad[0] = 1.0;
    r.at("b").grad[0] = 1.0;
    adam_step(r, sr, 0.1, {}, {1.0, 3.0});
    CHECK(r.at("b").values[0] == doctest::Approx(3.0 * r.at("a").values[0]).epsilon(1e-15));
    CHECK_THROWS_AS(adam_step(r, sr, 0.1, {}, {1.0}), Error);
}

TEST_CASE("adam matches an independent reimplementation")
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    ParamStore p;
    p.add("a", {3}, {0.1, 0.2, 0.3});
    AdamState s(p);
    std::vector<double> w = {0.1, 0.2, 0.3}, m(3, 0.0), v(3, 0.0);
    for (int t = 1; t <= 10; ++t) {
        for (std::size_t i = 0; i < 3; ++i)
            p.at("a").grad[i] = n(rng);
        const double lr = 0.01 * t;
        for (std::size_t i = 0; i < 3; ++i) {
            const double g = p.at("a").grad[i];
            m[i] = 0.9 * m[i] + 0.1 * g;
            v[i] = 0.999 * v[i] + 0.001 * g * g;
            const double mh = m[i] / (1 - std::pow(0.9, t));
            const double vh = v[i] / (1 - std::pow(0.999, t));
            w[i] -= lr * mh / (std::sqrt(vh) + 1e-8);
        }
        adam_step(p, s, lr);
    }
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(p.at("a").values[i] == doctest::Approx(w[i]).epsilon(1e-14));

    const AdamState back = AdamState::from_store(s.to_store(p), p);
    CHECK(back.m == s.m);
    CHECK(back.v == s.v);
    CHECK(back.step == s.step);
    s.reset(0);
    CHECK(s.step[0] == 0);
    CHECK(s.m[0] == std::vector<double>(3, 0.0));
}

TEST_CASE("psnr and ssim closed forms")
{
    std::mt19937_64 rng(1);
    const Image a = random_image(rng, 24, 20);
    CHECK(psnr(a, a) == kPsnrCap);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-15));

    Image base(16, 16, 3);
    for (double& v : base.data)
        v = 0.5;
    Image shifted = base;
    for (double& v : shifted.data)
        v += 0.1;
    CHECK(psnr(base, shifted) == doctest::Approx(20.0).epsilon(1e-12));

    CHECK_THROWS_AS(psnr(a, base), Error);
}

TEST_CASE("metrics agree with a brute-force reimplementation")
{
    std::mt19937_64 rng(9);
    std::normal_distribution<double> noise(0.0, 0.1);
    for (int k = 0; k < 5; ++k) {
        const Image a = random_image(rng, 20 + k, 18 + 2 * k);
        Image b = a;
        for (double& v : b.data)
            v = std::clamp(v + noise(rng), 0.0, 1.0);
        double se = 0.0;
        for (std::size_t i = 0; i < a.data.size(); ++i)
            se += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
        const double expect_psnr = 10.0 * std::log10(1.0 / (se / static_cast<double>(a.data.size())));
        CHECK(std::abs(psnr(a, b) - expect_psnr) < 1e-9);
        CHECK(std::abs(ssim(a, b) - brute_ssim(a, b)) < 1e-9);
    }
}

TEST_CASE("geometry error on the true surface")
{
    for (const char* name : {"sphere", "sphere_box"}) {
        const SceneModel s = standard_scene(name);
        const auto& sdf = s.sdf.analytic();
        for (const Vec3& p : sample_surface(sdf, 500, 3))
            CHECK(std::abs(sdf.eval(p)) < 1e-12);
        CHECK(geometry_error(s.sdf, s.params, sdf, 10000, 1) < 1e-12);
    }
    // a sphere 0.1 too large is off by exactly 0.1 everywhere
    const SceneModel truth = standard_scene("sphere");
    const SdfField bigger = AnalyticSdf{{SpherePrimitive{Vec3::Zero(), 0.6}}};
    CHECK(geometry_error(bigger, truth.params, truth.sdf.analytic(), 1000, 2) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("pairwise scattering estimate inverts the 2-D law")
{
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Rgb c_s(0.8, 0.75, 0.9);
    const double sigma = 0.5;
    const int n = 40;
    Image ia(n, 1, 3), ib(n, 1, 3), da(n, 1, 1), db(n, 1, 1);
    std::vector<PixelPair> pairs;
    for (int i = 0; i < n; ++i) {
        const Rgb j(u(rng) * 0.6, u(rng) * 0.6, u(rng) * 0.6);
        da.at(i, 0, 0) = 1.0 + u(rng);
        db.at(i, 0, 0) = 1.0 + u(rng);
        const Rgb a = koschmieder_forward(j, da.at(i, 0, 0), sigma, c_s);
        const Rgb b = koschmieder_forward(j, db.at(i, 0, 0), sigma, c_s);
        for (int k = 0; k < 3; ++k) {
            ia.at(i, 0, k) = a[k];
            ib.at(i, 0, k) = b[k];
        }
        pairs.push_back({i, 0, i, 0});
    }
    CHECK(std::abs(pairwise_sigma_estimate(ia, da, ib, db, pairs, c_s) - sigma) < 1e-6);

    // equal depths are skipped; nothing left means an error
    Image same = da;
    CHECK_THROWS_AS(pairwise_sigma_estimate(ia, da, ib, same, pairs, c_s), Error);

    // equal intensities at different depths give a zero candidate that is kept
    Image flat = ia;
    std::vector<PixelPair> mixed = {{0, 0, 0, 0}, {1, 0, 1, 0}, {2, 0, 2, 0}};
    for (int i = 0; i < 2; ++i)
        for (int k = 0; k < 3; ++k)
            flat.at(i, 0, k) = ia.at(i, 0, k);
    Image ib2 = ib;
    for (int i = 0; i < 2; ++i)
        for (int k = 0; k < 3; ++k)
            ib2.at(i, 0, k) = ia.at(i, 0, k);
    CHECK(pairwise_sigma_estimate(flat, da, ib2, db, mixed, c_s) == 0.0);
}

TEST_CASE("model files rebuild the trained scene")
{
    ScratchDir dir("hazerf_model_file");
    for (MediumModel m : {MediumModel::None, MediumModel::Scalar, MediumModel::BandLimited}) {
        SceneModel s = make_model(tiny_model(m), 11);
        for (auto& e : s.params.entries())
            for (double& v : e.values)
                v += 0.01;
        save_model_file(dir.path / "model.json", s, 11);
        save_checkpoint(dir.path / "c.bin", s.params);
        const SceneModel back = load_trained_model(dir.path / "c.bin");
        CHECK(back.params == s.params);
        const Vec3 p(0.1, -0.2, 0.3);
        CHECK(sdf_eval(back.sdf, back.params, p) == sdf_eval(s.sdf, s.params, p));
        CHECK(scattering_eval(back.scattering, back.params, p) == scattering_eval(s.scattering, s.params, p));
    }
    const ModelConfig mc = model_config_from_json(model_config_to_json(tiny_model(MediumModel::BandLimited)));
    CHECK(mc.medium == MediumModel::BandLimited);
    CHECK(mc.sdf.hidden == 8);
}

TEST_CASE("training writes checkpoints, logs finite losses and stages the haze")
{
    const Dataset& d = tiny_dataset();
    ScratchDir dir("hazerf_train_basic");
    SceneModel s = make_model(tiny_model(MediumModel::Scalar), 5);
    const TrainConfig c = tiny_config();
    const auto sigma0 = values_of(s.params, "scatter.theta");
    std::vector<LossParts> seen;
    TrainHooks h;
    h.after_step = [&](int iter, SceneModel& sc, const LossParts& p) {
        seen.push_back(p);
        if (iter < c.haze_enable_iter) {
            CHECK(values_of(sc.params, "scatter.theta") == sigma0);
            CHECK(p.dcp == 0.0);
            CHECK(p.l2d == 0.0);
        } else {
            CHECK(p.dcp > 0.0);
            CHECK(p.l2d > 0.0);
        }
    };
    const TrainStats st = train(d, s, c, dir.path, false, h);
    CHECK(st.iterations_run == 12);
    REQUIRE(seen.size() == 12);
    for (const auto& p : seen)
        CHECK(std::isfinite(loss_total(p, c.weights)));
    CHECK(values_of(s.params, "scatter.theta") != sigma0);

    for (const char* f : {"ckpt_0000004.bin", "ckpt_0000008.bin", "ckpt_0000012.bin", "ckpt_0000012.adam.bin",
                          "final.bin", "model.json", "loss.csv", "latest.json"})
        CHECK(fs::exists(dir.path / f));
    std::ifstream csv(dir.path / "loss.csv");
    int lines = 0;
    for (std::string line; std::getline(csv, line);)
        ++lines;
    CHECK(lines == 13);

    const SceneModel back = load_trained_model(st.final_checkpoint);
    CHECK(back.params == s.params);

    // the optimizer state of the medium was fresh at enablement
    const AdamState a4 = AdamState::from_store(load_checkpoint(dir.path / "ckpt_0000004.adam.bin"), s.params);
    const AdamState a8 = AdamState::from_store(load_checkpoint(dir.path / "ckpt_0000008.adam.bin"), s.params);
    const auto idx = s.params.index_of("scatter.theta");
    CHECK(a4.step[idx] == 0);
    CHECK(a4.m[idx][0] == 0.0);
    CHECK(a8.step[idx] == 2);
    CHECK(a8.step[s.params.index_of("sharpness.theta")] == 8);
}

TEST_CASE("resume reproduces the uninterrupted run bitwise")
{
    const Dataset& d = tiny_dataset();
    const TrainConfig c = tiny_config();
    ScratchDir full("hazerf_train_full");
    ScratchDir part("hazerf_train_part");

    SceneModel a = make_model(tiny_model(MediumModel::Scalar), 5);
    std::vector<LossParts> la;
    TrainHooks ha;
    ha.after_step = [&](int, SceneModel&, const LossParts& p) { la.push_back(p); };
    train(d, a, c, full.path, false, ha);

    SceneModel b = make_model(tiny_model(MediumModel::Scalar), 5);
    TrainHooks stop;
    stop.after_step = [](int iter, SceneModel&, const LossParts&) {
        if (iter == 9)
            throw std::runtime_error("interrupted");
    };
    CHECK_THROWS(train(d, b, c, part.path, false, stop));

    SceneModel b2 = make_model(tiny_model(MediumModel::Scalar), 5);
    std::vector<std::pair<int, LossParts>> lb;
    TrainHooks hb;
    hb.after_step = [&](int iter, SceneModel&, const LossParts& p) { lb.emplace_back(iter, p); };
    const TrainStats st = train(d, b2, c, part.path, true, hb);
    CHECK(st.iterations_run == 4);
    REQUIRE(lb.size() == 4);
    CHECK(lb[0].first == 8);
    CHECK(lb[0].second.color == la[8].color);
    CHECK(lb[0].second.dcp == la[8].dcp);
    CHECK(lb[0].second.l2d == la[8].l2d);
    CHECK(b2.params == a.params);
}

TEST_CASE("training is independent of the thread count")
{
    const Dataset& d = tiny_dataset();
    ScratchDir one("hazerf_train_t1");
    ScratchDir many("hazerf_train_t3");
    TrainConfig c = tiny_config();
    c.batch_rays = 192;
    SceneModel a = make_model(tiny_model(MediumModel::BandLimited), 5);
    train(d, a, c, one.path);
    c.threads = 3;
    SceneModel b = make_model(tiny_model(MediumModel::BandLimited), 5);
    train(d, b, c, many.path);
    CHECK(a.params == b.params);
}

TEST_CASE("stage 1 matches a haze-ignorant run step by step")
{
    const Dataset& d = tiny_dataset();
    ScratchDir hz("hazerf_stage1_haze");
    ScratchDir plain("hazerf_stage1_plain");
    TrainConfig c = tiny_config();
    c.haze_enable_iter = c.total_iters;

    std::vector<ParamStore> traj;
    SceneModel base = make_model(tiny_model(MediumModel::None), 5);
    TrainHooks hb;
    hb.after_step = [&](int, SceneModel& s, const LossParts&) { traj.push_back(s.params); };
    train(d, base, c, plain.path, false, hb);

    SceneModel hazy = make_model(tiny_model(MediumModel::Scalar), 5);
    const ParamStore init = hazy.params;
    int step = 0;
    TrainHooks hh;
    hh.after_step = [&](int, SceneModel& s, const LossParts&) {
        for (const auto& e : s.params.entries()) {
            if (is_haze_param(e.name))
                CHECK(e.values == init.at(e.name).values);
            else
                CHECK(e.values == traj[static_cast<std::size_t>(step)].at(e.name).values);
        }
        ++step;
    };
    train(d, hazy, c, hz.path, false, hh);
    CHECK(step == c.total_iters);
}

TEST_CASE("a non-finite loss aborts and keeps the last good checkpoint")
{
    const Dataset& d = tiny_dataset();
    ScratchDir dir("hazerf_train_nan");
    SceneModel s = make_model(tiny_model(MediumModel::Scalar), 5);
    TrainHooks h;
    h.after_step = [](int iter, SceneModel& sc, const LossParts&) {
        if (iter == 5)
            for (double& v : sc.params.at("radiance.l0.b").values)
                v = std::nan("");
    };
    CHECK_THROWS_WITH_AS(train(d, s, tiny_config(), dir.path, false, h),
                         doctest::Contains("ckpt_0000004.bin"), Error);
    CHECK(fs::exists(dir.path / "ckpt_0000004.bin"));
    CHECK_FALSE(fs::exists(dir.path / "ckpt_0000008.bin"));
    const SceneModel good = load_trained_model(dir.path / "ckpt_0000004.bin");
    for (const auto& e : good.params.entries())
        for (double v : e.values)
            CHECK(std::isfinite(v));
}

TEST_CASE("evaluating the ground truth gives the metric caps")
{
    const Dataset& d = tiny_dataset();
    REQUIRE(d.manifest.scene.has_value());
    const SceneModel truth = scene_from_json(*d.manifest.scene, 0);
    const EvalReport r = evaluate(truth, d, true, 64, 1);
    CHECK(r.views == 1);
    CHECK(r.psnr == kPsnrCap);
    CHECK(r.ssim == doctest::Approx(1.0).epsilon(1e-9));
    REQUIRE(r.geometry_error.has_value());
    CHECK(*r.geometry_error < 1e-12);
    REQUIRE(r.sigma_rel_error.has_value());
    CHECK(*r.sigma_rel_error < 1e-12);
    CHECK(*r.c_s_error < 1e-12);
    CHECK(r.hazy_psnr < 30.0);
    CHECK(r.to_json().contains("psnr"));

    const SceneModel untrained = make_model(tiny_model(MediumModel::Scalar), 5);
    const EvalReport u = evaluate(untrained, d, true, 16, 1, 500);
    CHECK(u.psnr < 30.0);
    CHECK(u.sigma_hat == doctest::Approx(0.05));
}
