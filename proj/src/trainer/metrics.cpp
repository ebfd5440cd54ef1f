#include "hazerf/trainer/metrics.hpp"

#include "hazerf/error.hpp"
#include "hazerf/util/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hazerf {

namespace {

void check_same(const Image& a, const Image& b, const char* what)
{
    if (a.width != b.width || a.height != b.height || a.channels != b.channels || a.data.empty())
        throw Error(std::string(what) + ": images must be non-empty and equally shaped");
}

}  // namespace

double psnr(const Image& a, const Image& b)
{
    check_same(a, b, "psnr");
    double se = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.data.size());
    if (mse == 0.0)
        return kPsnrCap;
    return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

double ssim(const Image& a, const Image& b)
{
    check_same(a, b, "ssim");
    const int win = std::min({11, a.width, a.height});
    const double sigma = 1.5;
    const double centre = 0.5 * (win - 1);
    std::vector<double> g(static_cast<std::size_t>(win));
    double gsum = 0.0;
    for (int i = 0; i < win; ++i) {
        g[static_cast<std::size_t>(i)] = std::exp(-(i - centre) * (i - centre) / (2.0 * sigma * sigma));
        gsum += g[static_cast<std::size_t>(i)];
    }
    for (double& v : g)
        v /= gsum;
    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;

    double total = 0.0;
    std::size_t windows = 0;
    for (int c = 0; c < a.channels; ++c)
        for (int y0 = 0; y0 + win <= a.height; ++y0)
            for (int x0 = 0; x0 + win <= a.width; ++x0) {
                double ma = 0.0, mb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
                for (int j = 0; j < win; ++j)
                    for (int i = 0; i < win; ++i) {
                        const double w = g[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(j)];
                        const double va = a.at(x0 + i, y0 + j, c);
                        const double vb = b.at(x0 + i, y0 + j, c);
                        ma += w * va;
                        mb += w * vb;
                        saa += w * va * va;
                        sbb += w * vb * vb;
                        sab += w * va * vb;
                    }
                const double var_a = saa - ma * ma;
                const double var_b = sbb - mb * mb;
                const double cov = sab - ma * mb;
                total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
                ++windows;
            }
    return total / static_cast<double>(windows);
}

namespace {

double area(const SdfPrimitive& p)
{
    if (const auto* s = std::get_if<SpherePrimitive>(&p))
        return 4.0 * std::numbers::pi * s->radius * s->radius;
    if (const auto* b = std::get_if<BoxPrimitive>(&p)) {
        const Vec3& h = b->half_extents;
        return 8.0 * (h.x() * h.y() + h.y() * h.z() + h.x() * h.z());
    }
    throw Error("sample_surface: unbounded primitive");
}

Vec3 point_on(const SdfPrimitive& p, double u0, double u1, double u2)
{
    if (const auto* s = std::get_if<SpherePrimitive>(&p)) {
        const double z = 1.0 - 2.0 * u0;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = 2.0 * std::numbers::pi * u1;
        return s->center + s->radius * Vec3(r * std::cos(phi), r * std::sin(phi), z);
    }
    const auto& b = std::get<BoxPrimitive>(p);
    const Vec3& h = b.half_extents;
    // six faces weighted by area, pairs in x, y, z order
    const double ax = h.y() * h.z(), ay = h.x() * h.z(), az = h.x() * h.y();
    double pick = u0 * 2.0 * (ax + ay + az);
    const int sign = pick < ax + ay + az ? 1 : -1;
    if (sign < 0)
        pick -= ax + ay + az;
    Vec3 q;
    if (pick < ax)
        q = Vec3(sign * h.x(), h.y() * (2 * u1 - 1), h.z() * (2 * u2 - 1));
    else if (pick < ax + ay)
        q = Vec3(h.x() * (2 * u1 - 1), sign * h.y(), h.z() * (2 * u2 - 1));
    else
        q = Vec3(h.x() * (2 * u1 - 1), h.y() * (2 * u2 - 1), sign * h.z());
    return b.center + q;
}

}  // namespace

std::vector<Vec3> sample_surface(const AnalyticSdf& sdf, int count, std::uint64_t seed)
{
    if (sdf.primitives.empty() || count < 1)
        throw Error("sample_surface: need primitives and a positive count");
    std::vector<double> cum;
    double total = 0.0;
    for (const auto& p : sdf.primitives)
        cum.push_back(total += area(p));
    std::vector<Vec3> pts;
    const std::uint64_t max_attempts = 100ULL * static_cast<std::uint64_t>(count);
    for (std::uint64_t i = 0; pts.size() < static_cast<std::size_t>(count); ++i) {
        if (i >= max_attempts)
            throw Error("sample_surface: surface is almost entirely hidden inside other primitives");
        auto u = [&](std::uint64_t j) { return uniform01(hash_key({seed, i, j})); };
        const double pick = u(0) * total;
        const auto k = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), pick) - cum.begin());
        const Vec3 p = point_on(sdf.primitives[std::min(k, cum.size() - 1)], u(1), u(2), u(3));
        if (sdf.eval(p) >= -1e-12)
            pts.push_back(p);
    }
    return pts;
}

double geometry_error(const SdfField& field, const ParamStore& params, const AnalyticSdf& truth, int count,
                      std::uint64_t seed)
{
    const auto pts = sample_surface(truth, count, seed);
    double s = 0.0;
    constexpr std::size_t chunk = 1024;
    for (std::size_t begin = 0; begin < pts.size(); begin += chunk) {
        const std::size_t n = std::min(chunk, pts.size() - begin);
        Matrix m(static_cast<Eigen::Index>(n), 3);
        for (std::size_t i = 0; i < n; ++i)
            m.row(static_cast<Eigen::Index>(i)) = pts[begin + i].transpose();
        Tape tape;
        const Matrix& f = tape.value(field.evaluate(tape, params, m, false).value);
        for (Eigen::Index i = 0; i < f.rows(); ++i)
            s += std::abs(f(i, 0));
    }
    return s / static_cast<double>(pts.size());
}

double pairwise_sigma_estimate(const Image& image_a, const Image& depth_a, const Image& image_b, const Image& depth_b,
                               const std::vector<PixelPair>& pairs, const Rgb& c_s_bar)
{
    if (image_a.channels != 3 || image_b.channels != 3 || depth_a.channels != 1 || depth_b.channels != 1)
        throw Error("pairwise_sigma_estimate: need RGB images and single-channel depths");
    auto inside = [](const Image& im, int x, int y) { return x >= 0 && y >= 0 && x < im.width && y < im.height; };
    std::vector<double> candidates;
    for (const auto& p : pairs) {
        if (!inside(image_a, p.xa, p.ya) || !inside(depth_a, p.xa, p.ya) || !inside(image_b, p.xb, p.yb) ||
            !inside(depth_b, p.xb, p.yb))
            throw Error("pairwise_sigma_estimate: pixel outside the image");
        const double da = depth_a.at(p.xa, p.ya, 0);
        const double db = depth_b.at(p.xb, p.yb, 0);
        if (!(std::abs(db - da) > 1e-6))
            continue;
        double sum = 0.0;
        int n = 0;
        for (int k = 0; k < 3; ++k) {
            const double e = std::log((image_a.at(p.xa, p.ya, k) - c_s_bar[k]) / (image_b.at(p.xb, p.yb, k) - c_s_bar[k])) /
                             (db - da);
            if (std::isfinite(e)) {
                sum += e;
                ++n;
            }
        }
        if (n == 0)
            continue;
        const double cand = sum / n;
        if (cand >= 0.0)
            candidates.push_back(cand);
    }
    if (candidates.empty())
        throw Error("pairwise_sigma_estimate: no valid candidate");
    const std::size_t mid = candidates.size() / 2;
    std::nth_element(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(mid), candidates.end());
    if (candidates.size() % 2 == 1)
        return candidates[mid];
    const double hi = candidates[mid];
    const double lo = *std::max_element(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

}  // namespace hazerf
