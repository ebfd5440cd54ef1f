#include "hazerf/checks/checks.hpp"

#include "hazerf/diffcore/grad_check.hpp"
#include "hazerf/error.hpp"
#include "hazerf/losses/losses.hpp"
#include "hazerf/renderer/render.hpp"
#include "hazerf/util/rng.hpp"

#include <chrono>
#include <functional>
#include <cmath>
#include <random>
#include <sstream>

namespace hazerf {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Vec3 random_unit(std::mt19937_64& rng)
{
    std::normal_distribution<double> n(0.0, 1.0);
    return Vec3(n(rng), n(rng), n(rng)).normalized();
}

/// Ray from a sphere of radius `cam_dist` towards a point in the cube of
/// half-size `spread`.
Ray aimed_ray(std::mt19937_64& rng, double cam_dist, double spread, std::uint64_t id)
{
    std::uniform_real_distribution<double> u(-spread, spread);
    Ray r;
    r.origin = random_unit(rng) * cam_dist;
    r.direction = (Vec3(u(rng), u(rng), u(rng)) - r.origin).normalized();
    r.t_far = cam_dist + 1.0;
    r.id = id;
    return r;
}

Rgb random_rgb(std::mt19937_64& rng, double lo, double hi)
{
    std::uniform_real_distribution<double> u(lo, hi);
    return Rgb(u(rng), u(rng), u(rng));
}

SceneModel random_scene(std::mt19937_64& rng, int index)
{
    SceneModel s;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto seed = static_cast<std::uint64_t>(rng());
    if (index % 2 == 0) {
        s.sdf = NeuralSdf(NeuralSdfConfig{3, 16, 3, 2, 0.3 + 0.4 * u(rng), 100.0}, s.params, seed);
        s.radiance = NeuralRadiance(NeuralRadianceConfig{3, 2, 16, 2}, s.params, seed);
        s.sharpness = Sharpness(10.0 + 90.0 * u(rng), s.params);
    } else {
        AnalyticSdf a;
        a.primitives.push_back(SpherePrimitive{random_rgb(rng, -0.3, 0.3), 0.2 + 0.4 * u(rng)});
        if (u(rng) < 0.5)
            a.primitives.push_back(BoxPrimitive{random_rgb(rng, -0.4, 0.4), random_rgb(rng, 0.1, 0.4)});
        s.sdf = a;
        TextureRadiance tex;
        tex.phases = random_rgb(rng, 0.0, 6.0);
        s.radiance = tex;
        s.sharpness = Sharpness(10.0 + 490.0 * u(rng));
    }
    s.airlight = AtmosphericLight(random_rgb(rng, 0.0, 1.0));
    s.background = random_rgb(rng, 0.0, 1.0);
    return s;
}

SceneModel blob_scene()
{
    SceneModel s;
    s.sdf = AnalyticSdf{{SpherePrimitive{Vec3::Zero(), 0.5}, BoxPrimitive{Vec3(0.4, -0.3, 0.2), Vec3(0.2, 0.3, 0.2)}}};
    s.radiance = TextureRadiance{};
    s.sharpness = Sharpness(80.0);
    s.scattering = BlobScattering{{GaussianBlob{Vec3(0.3, 0.0, 0.0), 1.0, 0.7},
                                   GaussianBlob{Vec3(-0.5, 0.5, 0.0), 2.0, 0.4},
                                   GaussianBlob{Vec3(0.0, -0.8, 0.6), 1.5, 0.5}}};
    s.airlight = AtmosphericLight(Rgb(0.9, 0.8, 0.7));
    s.background = Rgb(0.1, 0.2, 0.1);
    return s;
}

std::vector<Ray> aimed_rays(std::uint64_t seed, int n, double cam_dist, double spread)
{
    std::mt19937_64 rng(seed);
    std::vector<Ray> rays;
    rays.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        rays.push_back(aimed_ray(rng, cam_dist, spread, static_cast<std::uint64_t>(i)));
    return rays;
}

std::string fmt(double v)
{
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
}

// reductions

CheckResult check_transmittance(std::uint64_t seed)
{
    const auto t0 = Clock::now();
    std::mt19937_64 rng(hash_key({seed, 7}));
    std::uniform_real_distribution<double> u(0.0, 3.0);
    CheckResult r{"reductions", "transmittance non-increasing, T0 = 1", true, 0.0, 0.0};
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> od(64);
        for (auto& v : od)
            v = trial % 3 == 0 ? 0.0 : u(rng) * u(rng);
        const auto T = transmittance(od);
        if (T[0] != 1.0)
            r.pass = false;
        for (std::size_t i = 1; i < T.size(); ++i) {
            r.worst = std::max(r.worst, T[i] - T[i - 1]);
            if (T[i] > T[i - 1] || T[i] < 0.0)
                r.pass = false;
        }
    }
    r.seconds = seconds_since(t0);
    return r;
}

// quadrature

CheckResult check_convergence(std::uint64_t seed, int threads)
{
    const auto t0 = Clock::now();
    SceneModel scene;
    scene.sdf = AnalyticSdf{{SpherePrimitive{Vec3::Zero(), 0.5}}};
    scene.radiance = ConstantRadiance{Rgb(0.2, 0.4, 0.6)};
    scene.sharpness = Sharpness(1e4);
    scene.scattering = ConstantScattering{0.5};
    scene.airlight = AtmosphericLight(Rgb::Constant(0.8));
    scene.background = Rgb::Constant(0.3);
    const auto rays = aimed_rays(hash_key({seed, 11}), 100, 2.0, 0.3);
    const auto ref = render_rays(scene, rays, RenderOptions{.exact = true, .koschmieder = true}, threads);
    CheckResult r{"quadrature", "error vs exact render shrinks with N (128..2048)", true, 0.0, 0.75};
    double prev = 0.0;
    std::ostringstream detail;
    for (int n : {128, 256, 512, 1024, 2048}) {
        const auto q = render_rays(scene, rays, RenderOptions{.n_samples = n}, threads);
        double err = 0.0;
        for (std::size_t i = 0; i < rays.size(); ++i)
            err += (q[i].hazy - ref[i].hazy).cwiseAbs().maxCoeff() / static_cast<double>(rays.size());
        detail << "N=" << n << ":" << fmt(err) << " ";
        if (n > 128) {
            const double ratio = err / prev;
            r.worst = std::max(r.worst, ratio);
            if (!(ratio < r.limit))
                r.pass = false;
        }
        prev = err;
    }
    r.detail = detail.str();
    r.seconds = seconds_since(t0);
    return r;
}

CheckResult check_empty_medium(std::uint64_t seed)
{
    const auto t0 = Clock::now();
    std::mt19937_64 rng(hash_key({seed, 13}));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    CheckResult r{"quadrature", "homogeneous medium without surface matches the closed form", true, 0.0, 1e-12};
    for (int trial = 0; trial < 50; ++trial) {
        SceneModel scene;
        scene.sdf = AnalyticSdf{};
        scene.radiance = ConstantRadiance{Rgb::Zero()};
        const double sigma = 2.0 * u(rng);
        const Rgb cs = random_rgb(rng, 0.0, 1.0);
        const Rgb bg = random_rgb(rng, 0.0, 1.0);
        scene.scattering = ConstantScattering{sigma};
        scene.airlight = AtmosphericLight(cs);
        Ray ray{Vec3::Zero(), random_unit(rng), 1e-4, 0.5 + 3.0 * u(rng), static_cast<std::uint64_t>(trial)};
        const int n = 16 + static_cast<int>(u(rng) * 512);
        const RenderOutput o = render_pixel(scene, ray, n, seed, bg);
        const SampleSet s = sample_ray(ray, n, false, seed);
        const Rgb expect = koschmieder_forward(bg, ray.t_far - s.t[0], sigma, cs);
        const double err = ((o.hazy - expect).array().abs() / expect.array().abs().max(1e-300)).maxCoeff();
        r.worst = std::max(r.worst, err);
    }
    r.pass = r.worst < r.limit;
    r.seconds = seconds_since(t0);
    return r;
}

CheckResult check_stratified_bins(std::uint64_t seed)
{
    const auto t0 = Clock::now();
    std::mt19937_64 rng(hash_key({seed, 17}));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    CheckResult r{"quadrature", "stratified samples stay in their bins", true, 0.0, 0.0};
    for (int trial = 0; trial < 200; ++trial) {
        Ray ray{Vec3::Zero(), Vec3::UnitZ(), u(rng), 0.0, static_cast<std::uint64_t>(trial)};
        ray.t_far = ray.t_near + 0.1 + 4.0 * u(rng);
        const int n = 2 + static_cast<int>(u(rng) * 128);
        const SampleSet s = sample_ray(ray, n, true, seed);
        const double width = (ray.t_far - ray.t_near) / n;
        for (int i = 0; i < n; ++i) {
            const double lo = ray.t_near + i * width;
            const double out = std::max(lo - s.t[i], s.t[i] - (lo + width));
            r.worst = std::max(r.worst, out);
            if (out > 1e-12 || (i > 0 && s.t[i] <= s.t[i - 1]))
                r.pass = false;
        }
    }
    r.seconds = seconds_since(t0);
    return r;
}

// fields

CheckResult check_analytic_eikonal(std::uint64_t seed)
{
    const auto t0 = Clock::now();
    std::mt19937_64 rng(hash_key({seed, 19}));
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    const AnalyticSdf a{{SpherePrimitive{Vec3(0.1, 0.0, 0.0), 0.4}, PlanePrimitive{Vec3::UnitY(), 0.7},
                         BoxPrimitive{Vec3(-0.3, 0.3, 0.0), Vec3(0.2, 0.3, 0.4)}}};
    CheckResult r{"fields", "analytic SDF gradient has unit norm", true, 0.0, 1e-12};
    for (int i = 0; i < 10000; ++i) {
        const Vec3 p(u(rng), u(rng), u(rng));
        r.worst = std::max(r.worst, std::abs(a.grad(p).norm() - 1.0));
    }
    r.pass = r.worst < r.limit;
    r.seconds = seconds_since(t0);
    return r;
}

CheckResult check_scattering_nonnegative(std::uint64_t seed)
{
    const auto t0 = Clock::now();
    std::mt19937_64 rng(hash_key({seed, 23}));
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    CheckResult r{"fields", "scattering fields are non-negative", true, 0.0, 0.0};
    for (int trial = 0; trial < 5; ++trial) {
        ParamStore params;
        const BandLimitedScattering band(BandLimitedConfig{10.0, 16, 3, 0.05}, params, rng());
        Matrix pts(2000, 3);
        for (Eigen::Index i = 0; i < pts.rows(); ++i)
            pts.row(i) << u(rng), u(rng), u(rng);
        Tape tape;
        const double lo = tape.value(band.evaluate(tape, params, pts)).minCoeff();
        r.worst = std::min(r.worst, lo);
        if (!(lo >= 0.0))
            r.pass = false;
    }
    r.seconds = seconds_since(t0);
    return r;
}

// gradients

/// Small scene in which every field is learnable. Radiance and medium
/// weights are jittered so that no ReLU sits exactly on its kink and the
/// medium output layer is not near zero.
SceneModel learnable_scene(std::uint64_t seed)
{
    SceneModel s;
    s.sdf = NeuralSdf(NeuralSdfConfig{2, 8, 2, 1, 0.5, 10.0}, s.params, seed);
    s.radiance = NeuralRadiance(NeuralRadianceConfig{2, 1, 8, 2}, s.params, seed);
    s.scattering = BandLimitedScattering(BandLimitedConfig{4.0, 8, 2, 0.3}, s.params, seed);
    s.airlight = AtmosphericLight(Rgb(0.8, 0.7, 0.75), s.params);
    s.sharpness = Sharpness(15.0, s.params);
    s.background = Rgb(0.2, 0.3, 0.4);
    // move off initialisation values such as zero biases, which can put a
    // ReLU exactly on its kink
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> jitter(0.0, 0.3);
    for (auto& e : s.params.entries())
        for (auto& v : e.values)
            if (e.name.starts_with("radiance.") || e.name.starts_with("scatter."))
                v += jitter(rng);
    return s;
}

Var total_of(Tape& t, const RenderBatch& b, const Matrix& color, const Matrix& mask, const LossWeights& w)
{
    LossTerms lt{loss_color(t, b.hazy, color), loss_eikonal(t, b.grad_norm), loss_dcp(t, b.clear, 1, 1, 1),
                 loss_2d(t, b, color), loss_mask(t, b.opacity, mask)};
    return loss_total(t, lt, w);
}

std::vector<double> flat_gradient(ParamStore& params, Tape& tape, Var out)
{
    params.zero_grad();
    tape.backward(out, Matrix::Ones(1, 1), params);
    std::vector<double> g;
    for (const auto& e : params.entries())
        g.insert(g.end(), e.grad.begin(), e.grad.end());
    params.zero_grad();
    return g;
}

/// The gradient of the total at the default weights equals the weighted sum
/// of the per-term gradients.
CheckResult check_total_linearity(SceneModel& scene, std::span<const Ray> rays, const RenderOptions& opt,
                                  std::uint64_t seed)
{
    const auto t0 = Clock::now();
    const LossWeights w;
    std::mt19937_64 rng(hash_key({seed, 41}));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    CheckResult r{"gradients", "total gradient = weighted sum of term gradients (default weights)", true, 0.0, 1e-10};
    for (std::size_t k = 0; k < rays.size(); ++k) {
        Matrix color(1, 3), mask(1, 1);
        color << u(rng), u(rng), u(rng);
        mask(0, 0) = k % 2 == 0 ? 1.0 : 0.0;
        Tape tape;
        const RenderBatch b = render_batch(tape, scene, rays.subspan(k, 1), opt);
        const Var total = total_of(tape, b, color, mask, w);
        const std::vector<std::pair<Var, double>> parts{
            {loss_color(tape, b.hazy, color), 1.0},        {loss_eikonal(tape, b.grad_norm), w.lambda_eikonal},
            {loss_dcp(tape, b.clear, 1, 1, 1), w.alpha_dcp}, {loss_2d(tape, b, color), w.beta_2d},
            {loss_mask(tape, b.opacity, mask), w.gamma_mask}};
        const auto g_total = flat_gradient(scene.params, tape, total);
        std::vector<double> g_sum(g_total.size(), 0.0);
        for (const auto& [v, weight] : parts) {
            const auto g = flat_gradient(scene.params, tape, v);
            for (std::size_t i = 0; i < g.size(); ++i)
                g_sum[i] += weight * g[i];
        }
        double scale = 1e-300, diff = 0.0;
        for (std::size_t i = 0; i < g_sum.size(); ++i) {
            scale = std::max(scale, std::abs(g_sum[i]));
            diff = std::max(diff, std::abs(g_total[i] - g_sum[i]));
        }
        r.worst = std::max(r.worst, diff / scale);
    }
    r.pass = r.worst <= r.limit;
    r.seconds = seconds_since(t0);
    return r;
}

}  // namespace

CheckResult check_nerf_reduction(std::uint64_t seed, int cases)
{
    const auto t0 = Clock::now();
    std::mt19937_64 rng(hash_key({seed, 1}));
    CheckResult r{"reductions", "zero medium: hazy == clear bitwise", true, 0.0, 0.0};
    int failures = 0;
    for (int i = 0; i < cases; ++i) {
        const SceneModel scene = random_scene(rng, i);
        const Ray ray = aimed_ray(rng, 1.5 + std::uniform_real_distribution<double>(0.0, 1.0)(rng), 0.6,
                                  static_cast<std::uint64_t>(i));
        const RenderOutput o = render_pixel(scene, ray, 8 + 8 * (i % 8), seed, scene.background);
        r.worst = std::max(r.worst, (o.hazy - o.clear).cwiseAbs().maxCoeff());
        if (!(o.hazy == o.clear) || !(o.haze == Rgb::Zero()))
            ++failures;
    }
    r.pass = failures == 0;
    r.detail = std::to_string(cases - failures) + "/" + std::to_string(cases) + " cases identical";
    r.seconds = seconds_since(t0);
    return r;
}

std::vector<CheckResult> check_koschmieder_reduction(std::uint64_t seed, int rays, int threads)
{
    const auto t0 = Clock::now();
    const Rgb surface(0.2, 0.4, 0.6);
    const Rgb cs = Rgb::Constant(0.8);
    const auto ray_set = aimed_rays(hash_key({seed, 3}), rays, 2.0, 0.3);
    const AnalyticSdf sphere{{SpherePrimitive{Vec3::Zero(), 0.5}}};
    std::vector<CheckResult> out;
    std::vector<std::vector<double>> mean_err;  // [sigma][N]
    const std::vector<int> counts{256, 512, 1024, 2048, 4096};
    for (double sigma_s : {0.1, 0.5, 1.0}) {
        SceneModel scene;
        scene.sdf = sphere;
        scene.radiance = ConstantRadiance{surface};
        scene.sharpness = Sharpness(1e5);
        scene.scattering = ConstantScattering{sigma_s};
        scene.airlight = AtmosphericLight(cs);
        std::vector<Rgb> expect;
        for (const auto& ray : ray_set) {
            const auto hit = sphere.intersect(ray.origin, ray.direction, ray.t_near, ray.t_far);
            if (!hit)
                throw Error("koschmieder check: ray misses the surface");
            expect.push_back(koschmieder_forward(surface, *hit - ray.t_near, sigma_s, cs));
        }
        auto& errs = mean_err.emplace_back();
        for (int n : counts) {
            const auto q = render_rays(scene, ray_set, RenderOptions{.n_samples = n}, threads);
            double mean = 0.0, worst = 0.0;
            for (std::size_t i = 0; i < ray_set.size(); ++i) {
                const double e = ((q[i].hazy - expect[i]).array().abs() / expect[i].array()).maxCoeff();
                mean += e / static_cast<double>(ray_set.size());
                worst = std::max(worst, e);
            }
            errs.push_back(mean);
            if (n == 4096)
                out.push_back(CheckResult{"reductions", "koschmieder closed form, sigma_s=" + fmt(sigma_s) + ", N=4096",
                                          worst < 1e-3, worst, 1e-3});
        }
    }
    CheckResult mono{"reductions", "koschmieder mean error decreases for N 256->2048", true, 0.0, 1.0};
    std::ostringstream detail;
    for (const auto& errs : mean_err) {
        for (std::size_t k = 1; k + 1 < counts.size(); ++k) {
            const double ratio = errs[k] / errs[k - 1];
            mono.worst = std::max(mono.worst, ratio);
            if (!(ratio < 1.0))
                mono.pass = false;
        }
        detail << "[";
        for (std::size_t k = 0; k + 1 < counts.size(); ++k)
            detail << (k ? " " : "") << fmt(errs[k]);
        detail << "] ";
    }
    mono.detail = detail.str();
    out.push_back(mono);
    const double total = seconds_since(t0);
    for (auto& r : out)
        r.seconds = total / static_cast<double>(out.size());
    return out;
}

CheckResult check_decomposition(std::uint64_t seed, int rays, int threads)
{
    const auto t0 = Clock::now();
    const SceneModel scene = blob_scene();
    const auto ray_set = aimed_rays(hash_key({seed, 5}), rays, 2.5, 1.0);
    const auto out = render_rays(scene, ray_set, RenderOptions{.n_samples = 32, .stratified = true, .seed = seed}, threads);
    CheckResult r{"reductions", "hazy = surface + haze", true, 0.0, 1e-12};
    for (const auto& o : out)
        r.worst = std::max(r.worst, (o.hazy - (o.surface + o.haze)).cwiseAbs().maxCoeff());
    r.pass = r.worst < r.limit;
    r.detail = std::to_string(rays) + " rays";
    r.seconds = seconds_since(t0);
    return r;
}

CheckResult check_energy_bound(std::uint64_t seed, int rays, int threads)
{
    const auto t0 = Clock::now();
    const SceneModel scene = blob_scene();
    const auto ray_set = aimed_rays(hash_key({seed, 9}), rays, 2.5, 1.0);
    const auto out = render_rays(scene, ray_set, RenderOptions{.n_samples = 32, .stratified = true, .seed = seed}, threads);
    CheckResult r{"reductions", "opacity <= 1, colours within [0, 1]", true, 0.0, 1e-12};
    for (const auto& o : out) {
        const double excess = std::max({o.opacity - 1.0, o.hazy.maxCoeff() - 1.0, o.clear.maxCoeff() - 1.0,
                                        -o.hazy.minCoeff(), -o.clear.minCoeff(), -o.opacity});
        r.worst = std::max(r.worst, excess);
    }
    r.pass = r.worst <= r.limit;
    r.seconds = seconds_since(t0);
    return r;
}

std::vector<CheckResult> check_gradients(std::uint64_t seed, int rays)
{
    constexpr double kEpsilon = 3e-5;
    constexpr double kTolerance = 1e-4;
    constexpr int kSamples = 8;

    SceneModel scene = learnable_scene(hash_key({seed, 29}));
    const auto ray_set = aimed_rays(hash_key({seed, 31}), rays, 1.5, 0.2);
    std::mt19937_64 rng(hash_key({seed, 37}));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const RenderOptions opt{.n_samples = kSamples};
    using Term = std::function<Var(Tape&, const RenderBatch&, const Matrix&, const Matrix&)>;
    const std::vector<std::pair<std::string, Term>> terms{
        {"color", [](Tape& t, const RenderBatch& b, const Matrix& c, const Matrix&) { return loss_color(t, b.hazy, c); }},
        {"eikonal", [](Tape& t, const RenderBatch& b, const Matrix&, const Matrix&) { return loss_eikonal(t, b.grad_norm); }},
        {"dark channel", [](Tape& t, const RenderBatch& b, const Matrix&, const Matrix&) { return loss_dcp(t, b.clear, 1, 1, 1); }},
        {"2d haze", [](Tape& t, const RenderBatch& b, const Matrix& c, const Matrix&) { return loss_2d(t, b, c); }},
        {"mask", [](Tape& t, const RenderBatch& b, const Matrix&, const Matrix& m) { return loss_mask(t, b.opacity, m); }},
        {"total (alpha_dcp = 1)", [](Tape& t, const RenderBatch& b, const Matrix& c, const Matrix& m) {
             LossWeights w;
             w.alpha_dcp = 1.0;
             return total_of(t, b, c, m, w);
         }},
    };

    // masks consistent with the current geometry; a contradicting mask pins
    // the cross entropy at its clip value and adds nothing but roundoff
    const auto initial = render_rays(scene, ray_set, opt, 1);

    std::vector<int> failing(terms.size(), 0);
    std::vector<double> largest_failing(terms.size(), 0.0);
    std::vector<std::string> worst_entry(terms.size());
    std::vector<CheckResult> out;
    for (const auto& [name, term] : terms)
        out.push_back(CheckResult{"gradients", "finite differences: " + name, true, 0.0, kTolerance});
    for (int k = 0; k < rays; ++k) {
        const std::span<const Ray> ray(&ray_set[static_cast<std::size_t>(k)], 1);
        Matrix target(1, 3), mask(1, 1);
        target << u(rng), u(rng), u(rng);
        mask(0, 0) = initial[static_cast<std::size_t>(k)].opacity > 0.5 ? 1.0 : 0.0;
        for (std::size_t j = 0; j < terms.size(); ++j) {
            const auto t0 = Clock::now();
            const Term& term = terms[j].second;
            const Program program{0, [&](Tape& tape, const ParamStore&, Var) {
                                      return term(tape, render_batch(tape, scene, ray, opt), target, mask);
                                  }};
            const GradCheckReport rep = finite_diff_check(scene.params, program, kEpsilon, kTolerance);
            CheckResult& r = out[j];
            r.seconds += seconds_since(t0);
            if (!rep.pass)
                r.pass = false;
            for (const auto& e : rep.entries)
                if (e.max_rel_error > kTolerance) {
                    ++failing[j];
                    largest_failing[j] = std::max({largest_failing[j], std::abs(e.analytic), std::abs(e.numeric)});
                }
            if (rep.max_rel_error >= r.worst) {
                r.worst = rep.max_rel_error;
                for (const auto& e : rep.entries)
                    if (e.max_rel_error == rep.max_rel_error) {
                        worst_entry[j] = "ray " + std::to_string(k) + ", " + e.name + "[" +
                                         std::to_string(e.worst_index) + "] analytic " + fmt(e.analytic) +
                                         " numeric " + fmt(e.numeric);
                        break;
                    }
            }
        }
    }
    for (std::size_t j = 0; j < terms.size(); ++j) {
        out[j].detail = "worst at " + worst_entry[j];
        if (failing[j] > 0)
            out[j].detail += "; " + std::to_string(failing[j]) + " (ray, tensor) pairs above tolerance, largest |gradient| among them " +
                             fmt(largest_failing[j]);
    }
    out.push_back(check_total_linearity(scene, ray_set, opt, seed));
    int covered = 0;
    for (const auto& o : initial)
        covered += o.opacity > 0.5 ? 1 : 0;
    out.back().detail = std::to_string(covered) + "/" + std::to_string(rays) + " rays inside the mask";
    return out;
}

const std::vector<std::string>& check_suites()
{
    static const std::vector<std::string> names{"all", "reductions", "gradients", "quadrature", "fields"};
    return names;
}

std::vector<CheckResult> run_checks(std::string_view suite, std::uint64_t seed, int threads)
{
    const bool all = suite == "all";
    bool known = all;
    std::vector<CheckResult> out;
    auto append = [&](std::vector<CheckResult> v) { out.insert(out.end(), v.begin(), v.end()); };
    if (all || suite == "reductions") {
        known = true;
        out.push_back(check_nerf_reduction(seed, 100));
        append(check_koschmieder_reduction(seed, 100, threads));
        out.push_back(check_decomposition(seed, 10000, threads));
        out.push_back(check_energy_bound(seed, 2000, threads));
        out.push_back(check_transmittance(seed));
    }
    if (all || suite == "quadrature") {
        known = true;
        out.push_back(check_convergence(seed, threads));
        out.push_back(check_empty_medium(seed));
        out.push_back(check_stratified_bins(seed));
    }
    if (all || suite == "fields") {
        known = true;
        out.push_back(check_analytic_eikonal(seed));
        out.push_back(check_scattering_nonnegative(seed));
    }
    if (all || suite == "gradients") {
        known = true;
        append(check_gradients(seed, 20));
    }
    if (!known)
        throw Error("unknown check suite '" + std::string(suite) + "'");
    return out;
}

}  // namespace hazerf
