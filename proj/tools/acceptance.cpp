// Acceptance run: one PASS/FAIL line per headline criterion.
//
//   acceptance [--only fast|e2e|all] [--work DIR] [--seed S] [--threads T]
//
// "fast" covers the property criteria and determinism, "e2e" the two
// training experiments. Tolerances and experiment sizes are fixed below.
// The exit status is 0 whenever the run completed, so failures are reported
// rather than hidden behind a crash; a malformed run exits 1.
#include "hazerf/checks/checks.hpp"
#include "hazerf/error.hpp"
#include "hazerf/trainer/metrics.hpp"
#include "hazerf/trainer/trainer.hpp"
#include "hazerf/util/parallel.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

using namespace hazerf;
namespace fs = std::filesystem;

namespace {

// Property criteria.
constexpr int kNerfCases = 100;
constexpr double kNerfSeconds = 10.0;
constexpr int kKoschRays = 64;
constexpr double kKoschSeconds = 60.0;
constexpr int kGradientRays = 20;
constexpr double kGradientSeconds = 120.0;
constexpr int kDecompositionRays = 10000;
constexpr double kPairwiseTol = 1e-4;
constexpr double kPairwiseSigma = 0.5;

// Desk experiment. One core cannot run 20k iterations at batch 512 within
// the budget, so the schedule and network are scaled down (see README).
constexpr int kViews = 30;
constexpr int kRes = 64;
constexpr double kRigRadius = 2.5;
constexpr double kHazeSigma = 0.5;
constexpr int kDeskIters = 2000;
constexpr int kDeskHazeEnable = 100;
constexpr int kDeskWarmup = 50;
constexpr int kDeskBatch = 256;
constexpr int kDeskSamples = 48;
constexpr int kDeskHidden = 32;
constexpr double kDeskLrPeak = 1e-3;
constexpr double kDeskLrMin = 5e-5;
constexpr double kDeskAlphaDcp = 0.2;
constexpr double kDeskBeta2d = 0.01;
constexpr double kDeskGammaMask = 0.5;
// Haze parameters step 5x faster than the networks.
constexpr double kDeskHazeLrScale = 5.0;
constexpr int kEvalSamples = 64;

constexpr double kMinPsnrGain = 5.0;
constexpr double kMaxSigmaRel = 0.2;
constexpr double kMaxAirlightErr = 0.1;
constexpr double kMaxGeometryErr = 0.02;
constexpr double kMinAblationGap = 1.0;

// Heterogeneous comparison.
constexpr double kBlobAmplitude = 1.0;
constexpr int kBlobCount = 2;

int g_failed = 0;

void report(bool pass, const std::string& name, const std::string& detail)
{
    std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    g_failed += pass ? 0 : 1;
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Merges check results into one verdict.
void report_checks(const std::string& name, const std::vector<CheckResult>& rs, double seconds, double budget)
{
    bool pass = seconds < budget;
    std::string failing;
    double worst_ratio = 0.0;
    for (const auto& r : rs) {
        pass = pass && r.pass;
        if (!r.pass)
            failing += (failing.empty() ? "" : ", ") + r.name + fmt(" (worst %.3g > %.3g)", r.worst, r.limit);
        if (r.limit > 0)
            worst_ratio = std::max(worst_ratio, r.worst / r.limit);
    }
    std::string detail = fmt("%zu checks, worst/limit %.3g, %.1fs (budget %.0fs)", rs.size(), worst_ratio, seconds, budget);
    if (!failing.empty())
        detail += "; failing: " + failing;
    report(pass, name, detail);
}

void criterion_nerf(std::uint64_t seed)
{
    const auto t0 = std::chrono::steady_clock::now();
    const CheckResult r = check_nerf_reduction(seed, kNerfCases);
    report_checks("nerf-reduction", {r}, seconds_since(t0), kNerfSeconds);
}

void criterion_koschmieder(std::uint64_t seed, int threads)
{
    const auto t0 = std::chrono::steady_clock::now();
    const auto rs = check_koschmieder_reduction(seed, kKoschRays, threads);
    report_checks("koschmieder-reduction", rs, seconds_since(t0), kKoschSeconds);
}

void criterion_gradients(std::uint64_t seed)
{
    const auto t0 = std::chrono::steady_clock::now();
    const auto rs = check_gradients(seed, kGradientRays);
    report_checks("gradient-suite", rs, seconds_since(t0), kGradientSeconds);
}

void criterion_decomposition(std::uint64_t seed, int threads)
{
    const CheckResult r = check_decomposition(seed, kDecompositionRays, threads);
    report(r.pass && r.limit <= 1e-12, "decomposition-identity",
           fmt("max |hazy - surface - haze| = %.3g over %d rays (limit 1e-12)", r.worst, kDecompositionRays));
}

// Two views of the octant scene under 2-D-law haze; correspondences come
// from the exact depth and are kept only where both pixels see the same
// flat-coloured octant.
void criterion_pairwise(std::uint64_t seed, int threads)
{
    const SceneModel scene = standard_scene("octant");
    const HazeSpec haze = parse_haze_spec(fmt("koschmieder:%g:0.8", kPairwiseSigma), seed);
    const CameraRig rig = make_rig(8, kRigRadius, 48, seed);
    const Camera& ca = rig.views[0];
    const Camera& cb = rig.views[1];
    const SynthView a = render_synthetic_view(scene, ca, haze, 1024, threads);
    const SynthView b = render_synthetic_view(scene, cb, haze, 1024, threads);

    std::vector<PixelPair> pairs;
    for (int y = 0; y < ca.height; ++y)
        for (int x = 0; x < ca.width; ++x) {
            const double da = a.depth.at(x, y, 0);
            if (da <= 0.0)
                continue;
            const Ray ra = pixel_ray(ca, x, y);
            const Vec3 p = ra.origin + da * ra.direction;
            double z = 0.0;
            const Eigen::Vector2d uv = project(cb, p, &z);
            const int xb = static_cast<int>(std::floor(uv.x()));
            const int yb = static_cast<int>(std::floor(uv.y()));
            if (z <= 0.0 || xb < 0 || yb < 0 || xb >= cb.width || yb >= cb.height)
                continue;
            const double db = b.depth.at(xb, yb, 0);
            if (db <= 0.0)
                continue;
            const Ray rb = pixel_ray(cb, xb, yb);
            if ((rb.origin + db * rb.direction - p).norm() > 0.05)
                continue;  // occluded in b
            bool same = true;
            for (int k = 0; k < 3; ++k)
                same = same && a.clear.at(x, y, k) == b.clear.at(xb, yb, k);
            if (same)
                pairs.push_back({x, y, xb, yb});
        }
    if (pairs.empty()) {
        report(false, "pairwise-estimator", "no correspondences found");
        return;
    }
    const double est = pairwise_sigma_estimate(a.hazy, a.depth, b.hazy, b.depth, pairs, haze.c_s);
    const double err = std::abs(est - kPairwiseSigma);
    report(err < kPairwiseTol, "pairwise-estimator",
           fmt("sigma %.9f vs %.1f, |error| %.3g (limit %.0e), %zu pairs", est, kPairwiseSigma, err, kPairwiseTol,
               pairs.size()));
}

ModelConfig desk_model(MediumModel medium, const Dataset& d)
{
    ModelConfig m;
    m.sdf.hidden = kDeskHidden;
    m.radiance.hidden = kDeskHidden;
    m.medium = medium;
    m.background = d.manifest.background;
    return m;
}

TrainConfig desk_config(int threads)
{
    TrainConfig c;
    c.batch_rays = kDeskBatch;
    c.n_samples = kDeskSamples;
    c.lr_peak = kDeskLrPeak;
    c.lr_min = kDeskLrMin;
    c.warmup_iters = kDeskWarmup;
    c.total_iters = kDeskIters;
    c.haze_enable_iter = kDeskHazeEnable;
    c.weights.alpha_dcp = kDeskAlphaDcp;
    c.weights.beta_2d = kDeskBeta2d;
    c.weights.gamma_mask = kDeskGammaMask;
    c.haze_lr_scale = kDeskHazeLrScale;
    c.checkpoint_every = kDeskIters;
    c.log_every = 50;
    c.seed = 1;
    c.threads = threads;
    return c;
}

EvalReport desk_run(const Dataset& d, MediumModel medium, const TrainConfig& cfg, const fs::path& out, int threads,
                    std::ostream& log)
{
    const auto t0 = std::chrono::steady_clock::now();
    SceneModel s = make_model(desk_model(medium, d), cfg.seed);
    train(d, s, cfg, out);
    const EvalReport r = evaluate(s, d, true, kEvalSamples, threads);
    log << out.filename().string() << " " << r.to_json().dump() << " seconds=" << seconds_since(t0) << "\n";
    log.flush();
    return r;
}

Dataset make_dataset(const std::string& haze, const fs::path& dir, std::uint64_t seed, int threads)
{
    const HazeSpec h = parse_haze_spec(haze, seed);
    synthesize_dataset(standard_scene("sphere"), "sphere", make_rig(kViews, kRigRadius, kRes, seed), h, 1024, dir,
                       threads);
    return load_dataset(dir / "manifest.json");
}

void criterion_desk(const fs::path& work, std::uint64_t seed, int threads, std::ostream& log)
{
    const auto t0 = std::chrono::steady_clock::now();
    const Dataset d = make_dataset(fmt("homogeneous:%g", kHazeSigma), work / "desk_data", seed, threads);
    TrainConfig cfg = desk_config(threads);
    const EvalReport full = desk_run(d, MediumModel::Scalar, cfg, work / "desk_full", threads, log);
    cfg.weights.alpha_dcp = 0.0;
    cfg.weights.beta_2d = 0.0;
    const EvalReport ablated = desk_run(d, MediumModel::Scalar, cfg, work / "desk_ablated", threads, log);

    const double gain = full.psnr - full.hazy_psnr;
    const double gap = full.psnr - ablated.psnr;
    const bool a = gain >= kMinPsnrGain;
    const bool b = full.sigma_rel_error && *full.sigma_rel_error <= kMaxSigmaRel;
    const bool c = full.c_s_error && *full.c_s_error <= kMaxAirlightErr;
    const bool dd = full.geometry_error && *full.geometry_error < kMaxGeometryErr;
    const bool e = gap >= kMinAblationGap;
    auto mark = [](bool ok) { return ok ? "ok" : "MISS"; };
    report(a && b && c && dd && e, "desk-experiment",
           fmt("(a) psnr %.2f vs hazy %.2f, gain %.2f dB [%s]; (b) sigma %.4f rel err %.3f [%s]; "
               "(c) c_s err %.4f [%s]; (d) geometry %.4f [%s]; (e) ablation psnr %.2f, gap %.2f dB [%s]; "
               "%d iters, %.0fs",
               full.psnr, full.hazy_psnr, gain, mark(a), full.sigma_hat, full.sigma_rel_error.value_or(-1), mark(b),
               full.c_s_error.value_or(-1), mark(c), full.geometry_error.value_or(-1), mark(dd), ablated.psnr, gap,
               mark(e), kDeskIters, seconds_since(t0)));
}

void criterion_heterogeneous(const fs::path& work, std::uint64_t seed, int threads, std::ostream& log)
{
    const Dataset d = make_dataset(fmt("blobs:amp=%g:n=%d", kBlobAmplitude, kBlobCount), work / "blob_data", seed,
                                   threads);
    const TrainConfig cfg = desk_config(threads);
    const EvalReport scalar = desk_run(d, MediumModel::Scalar, cfg, work / "blob_scalar", threads, log);
    const EvalReport field = desk_run(d, MediumModel::BandLimited, cfg, work / "blob_field", threads, log);
    report(field.psnr >= scalar.psnr, "heterogeneous-field-vs-scalar",
           fmt("band-limited psnr %.2f, scalar psnr %.2f", field.psnr, scalar.psnr));
}

std::string file_bytes(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// Two short runs through both stages, one serial and one threaded.
void criterion_determinism(const fs::path& work, std::uint64_t seed, int threads)
{
    const fs::path data_dir = work / "det_data";
    synthesize_dataset(standard_scene("sphere"), "sphere", make_rig(6, kRigRadius, 16, seed),
                       parse_haze_spec("homogeneous:0.5", seed), 1024, data_dir, threads);
    const Dataset d = load_dataset(data_dir / "manifest.json");
    TrainConfig c;
    c.batch_rays = 128;
    c.n_samples = 16;
    c.total_iters = 20;
    c.warmup_iters = 4;
    c.haze_enable_iter = 10;
    c.checkpoint_every = 10;
    c.weights.alpha_dcp = kDeskAlphaDcp;
    c.seed = seed;
    ModelConfig m;
    m.sdf.hidden = 16;
    m.radiance.hidden = 16;
    std::vector<std::string> finals;
    for (int t : {1, std::max(2, threads)}) {
        c.threads = t;
        SceneModel s = make_model(m, c.seed);
        const fs::path out = work / ("det_run_t" + std::to_string(t));
        fs::remove_all(out);
        finals.push_back(file_bytes(train(d, s, c, out).final_checkpoint));
    }
    report(!finals[0].empty() && finals[0] == finals[1], "determinism",
           fmt("final checkpoints of two %d-iteration runs (1 and %d threads) %s, %zu bytes", c.total_iters,
               std::max(2, threads), finals[0] == finals[1] ? "identical" : "differ", finals[0].size()));
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Acceptance criteria"};
    std::string only = "all";
    fs::path work = fs::temp_directory_path() / "hazerf_acceptance";
    std::uint64_t seed = 1;
    int threads = default_threads();
    app.add_option("--only", only, "Subset")->check(CLI::IsMember({"fast", "e2e", "all"}))->capture_default_str();
    app.add_option("--work", work, "Scratch directory")->capture_default_str();
    app.add_option("--seed", seed, "Seed")->capture_default_str();
    app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    try {
        fs::create_directories(work);
        const bool fast = only != "e2e";
        const bool e2e = only != "fast";
        std::ofstream log(work / "runs.log", std::ios::app);
        if (fast) {
            criterion_nerf(seed);
            criterion_koschmieder(seed, threads);
            criterion_gradients(seed);
            criterion_decomposition(seed, threads);
            criterion_pairwise(seed, threads);
        }
        if (e2e) {
            criterion_desk(work, seed, threads, log);
            criterion_heterogeneous(work, seed, threads, log);
        }
        if (fast)
            criterion_determinism(work, seed, threads);
    } catch (const std::exception& e) {
        std::cerr << "acceptance run aborted: " << e.what() << "\n";
        return 1;
    }
    std::printf("%d criteria failed\n", g_failed);
    return 0;
}
