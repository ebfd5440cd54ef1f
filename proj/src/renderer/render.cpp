#include "hazerf/renderer/render.hpp"

#include "hazerf/error.hpp"
#include "hazerf/util/parallel.hpp"

#include <cmath>

namespace hazerf {

namespace {

Var one_minus(Tape& tape, Var x) { return tape.add_scalar(tape.scale(x, -1.0), 1.0); }

/// clamp(1 - exp(-x), 0, 1)
Var alpha_of(Tape& tape, Var optical_depth)
{
    return tape.clamp(one_minus(tape, tape.exp(tape.scale(optical_depth, -1.0))), 0.0, 1.0);
}

Rgb row_rgb(const Matrix& m, Eigen::Index r) { return m.row(r).transpose(); }

}  // namespace

RenderBatch render_batch(Tape& tape, const SceneModel& scene, std::span<const Ray> rays, const RenderOptions& opt)
{
    if (rays.empty())
        throw Error("render_batch: no rays");
    const auto K = static_cast<Eigen::Index>(rays.size());
    const Eigen::Index N = opt.n_samples;
    Matrix pts(K * N, 3), dirs(K * N, 3), t(K, N), delta(K, N);
    for (Eigen::Index k = 0; k < K; ++k) {
        const Ray& ray = rays[static_cast<std::size_t>(k)];
        const SampleSet s = sample_ray(ray, opt.n_samples, opt.stratified, opt.seed);
        for (Eigen::Index n = 0; n < N; ++n) {
            const auto i = static_cast<std::size_t>(n);
            t(k, n) = s.t[i];
            delta(k, n) = s.delta[i];
            pts.row(k * N + n) = (ray.origin + s.t[i] * ray.direction).transpose();
            dirs.row(k * N + n) = ray.direction.transpose();
        }
    }
    const ParamStore& params = scene.params;
    const Rgb bg = opt.background.value_or(scene.background);

    const auto f = scene.sdf.evaluate(tape, params, pts, true);
    const Var gdotd = tape.row_sum(tape.mul(f.grad, tape.constant(dirs)));
    const Var sigma_col = opaque_density(tape, f.value, gdotd, scene.sharpness.evaluate(tape, params));
    const Var sigma = tape.reshape(sigma_col, K, N);
    const Var color = scene.radiance.evaluate(tape, params, pts, dirs);

    const bool medium = opt.haze && !scene.scattering.is_zero();
    const Var sigma_s = medium ? tape.reshape(scene.scattering.evaluate(tape, params, pts), K, N)
                               : tape.constant(Matrix::Zero(K, N));
    const Var c_s = opt.haze ? scene.airlight.evaluate(tape, params) : tape.constant(Matrix::Zero(1, 3));
    const Var delta_v = tape.constant(delta);
    const Var bg_v = tape.constant(Matrix(bg.transpose()));

    // scattering-aware composite
    const Var sigma_t = tape.add(sigma, sigma_s);
    Var od_t = tape.mul(sigma_t, delta_v);
    if (const double m = testing::alpha_mutation(); m != 0.0)
        od_t = tape.scale(od_t, 1.0 + m);
    const Var alpha_t = alpha_of(tape, od_t);
    const Var trans_t = tape.exclusive_cumprod(one_minus(tape, alpha_t));
    const Var w_t = tape.mul(tape.slice_cols(trans_t, 0, N), alpha_t);
    const Var w_surface = tape.mul(tape.ratio_or_zero(sigma, sigma_t), w_t);
    const Var w_haze = tape.mul(tape.ratio_or_zero(sigma_s, sigma_t), w_t);

    RenderBatch out;
    out.rays = K;
    out.surface = tape.add(tape.sample_weighted_sum(w_surface, color), tape.outer(tape.slice_cols(trans_t, N, 1), bg_v));
    out.haze = tape.outer(tape.row_sum(w_haze), c_s);
    out.hazy = tape.add(out.surface, out.haze);

    // clear view
    const Var alpha = alpha_of(tape, tape.mul(sigma, delta_v));
    const Var trans = tape.exclusive_cumprod(one_minus(tape, alpha));
    const Var w = tape.mul(tape.slice_cols(trans, 0, N), alpha);
    out.clear = tape.add(tape.sample_weighted_sum(w, color), tape.outer(tape.slice_cols(trans, N, 1), bg_v));
    out.depth = tape.row_sum(tape.mul(w, tape.constant(t)));
    out.opacity = tape.row_sum(w);

    const Var ones = tape.constant(Matrix::Ones(K, 1));
    out.sigma_s_bar = tape.row_mean(sigma_s);
    out.c_s_bar = tape.outer(ones, c_s);
    out.grad_norm = tape.sqrt(tape.row_sum(tape.square(f.grad)));
    return out;
}

RenderOutput render_pixel(const SceneModel& scene, const Ray& ray, int n_samples, std::uint64_t seed,
                          const Rgb& background)
{
    RenderOptions opt;
    opt.n_samples = n_samples;
    opt.seed = seed;
    opt.background = background;
    return render_rays(scene, std::span<const Ray>(&ray, 1), opt, 1).front();
}

RenderOutput render_exact(const SceneModel& scene, const Ray& ray, const RenderOptions& opt)
{
    if (!scene.is_analytic())
        throw Error("exact rendering needs an analytic scene");
    validate_ray(ray);
    const Rgb bg = opt.background.value_or(scene.background);
    const AnalyticSdf& sdf = scene.sdf.analytic();
    const auto hit = sdf.intersect(ray.origin, ray.direction, ray.t_near, ray.t_far);
    const double t_end = hit ? *hit : ray.t_far;
    const Vec3 p_end = ray.origin + t_end * ray.direction;

    RenderOutput out;
    const Rgb end_color = hit ? scene.radiance.eval(p_end, ray.direction) : bg;
    out.clear = end_color;
    out.opacity = hit ? 1.0 : 0.0;
    out.depth = hit ? *hit : 0.0;

    const ParamStore& params = scene.params;
    const Rgb c_s = opt.haze ? scene.airlight.value(params) : Rgb::Zero();
    if (!opt.haze || scene.scattering.is_zero()) {
        out.surface = end_color;
        out.hazy = out.surface;
        out.c_s_bar = c_s;
        return out;
    }
    if (opt.koschmieder) {
        const auto* c = std::get_if<ConstantScattering>(&scene.scattering.variant());
        if (!c)
            throw Error("Koschmieder synthesis needs a constant medium");
        const double tr = std::exp(-c->sigma * t_end);
        out.surface = end_color * tr;
        out.haze = c_s * (1.0 - tr);
        out.hazy = out.surface + out.haze;
        out.sigma_s_bar = c->sigma;
        out.c_s_bar = c_s;
        return out;
    }
    const int m = opt.exact_haze_samples;
    if (m < 1)
        throw Error("exact rendering needs at least one medium sample");
    const double h = (t_end - ray.t_near) / m;
    double trans = 1.0;
    double absorbed = 0.0;
    double ss_sum = 0.0;
    for (int i = 0; i < m; ++i) {
        const double ti = ray.t_near + (i + 0.5) * h;
        const double ss = scattering_eval(scene.scattering, params, ray.origin + ti * ray.direction);
        const double alpha = 1.0 - std::exp(-ss * h);
        absorbed += trans * alpha;
        trans *= 1.0 - alpha;
        ss_sum += ss;
    }
    out.surface = trans * end_color;
    out.haze = absorbed * c_s;
    out.hazy = out.surface + out.haze;
    out.sigma_s_bar = ss_sum / m;
    out.c_s_bar = c_s;
    return out;
}

std::vector<RenderOutput> render_rays(const SceneModel& scene, std::span<const Ray> rays, const RenderOptions& opt,
                                      int threads, std::size_t chunk)
{
    std::vector<RenderOutput> out(rays.size());
    if (opt.exact) {
        parallel_for(rays.size(), threads, [&](std::size_t i) { out[i] = render_exact(scene, rays[i], opt); });
        return out;
    }
    const std::size_t chunks = (rays.size() + chunk - 1) / chunk;
    parallel_for(chunks, threads, [&](std::size_t c) {
        const std::size_t begin = c * chunk;
        const std::size_t count = std::min(chunk, rays.size() - begin);
        Tape tape;
        const RenderBatch b = render_batch(tape, scene, rays.subspan(begin, count), opt);
        const Matrix& hazy = tape.value(b.hazy);
        const Matrix& surface = tape.value(b.surface);
        const Matrix& haze = tape.value(b.haze);
        const Matrix& clear = tape.value(b.clear);
        const Matrix& depth = tape.value(b.depth);
        const Matrix& opacity = tape.value(b.opacity);
        const Matrix& ssb = tape.value(b.sigma_s_bar);
        const Matrix& csb = tape.value(b.c_s_bar);
        for (std::size_t k = 0; k < count; ++k) {
            const auto r = static_cast<Eigen::Index>(k);
            RenderOutput& o = out[begin + k];
            o.hazy = row_rgb(hazy, r);
            o.surface = row_rgb(surface, r);
            o.haze = row_rgb(haze, r);
            o.clear = row_rgb(clear, r);
            o.depth = depth(r, 0);
            o.opacity = opacity(r, 0);
            o.sigma_s_bar = ssb(r, 0);
            o.c_s_bar = row_rgb(csb, r);
        }
    });
    return out;
}

std::vector<RenderOutput> render_image(const SceneModel& scene, const Camera& cam, const RenderOptions& opt,
                                       int threads)
{
    validate_camera(cam);
    std::vector<Ray> rays;
    rays.reserve(static_cast<std::size_t>(cam.width) * static_cast<std::size_t>(cam.height));
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            Ray r = pixel_ray(cam, x, y);
            r.id = static_cast<std::uint64_t>(y) * static_cast<std::uint64_t>(cam.width) + static_cast<std::uint64_t>(x);
            rays.push_back(r);
        }
    return render_rays(scene, rays, opt, threads);
}

}  // namespace hazerf
