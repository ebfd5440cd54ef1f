#include "hazerf/renderer/composite.hpp"

#include "hazerf/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace hazerf {

namespace {

std::atomic<double> g_alpha_mutation{0.0};

void check_lengths(const SampleSet& s, std::size_t a, std::size_t b, const char* what)
{
    if (s.size() != a || s.size() != b)
        throw Error(std::string(what) + ": sequence lengths do not match the sample count");
}

void check_non_negative(std::span<const double> v, const char* what)
{
    for (double x : v)
        if (!(x >= 0.0))
            throw Error(std::string(what) + ": densities must be non-negative");
}

double alpha_of(double optical_depth) { return std::clamp(1.0 - std::exp(-optical_depth), 0.0, 1.0); }

double ratio_or_zero(double a, double b) { return b == 0.0 ? 0.0 : a / b; }

}  // namespace

namespace testing {
void set_alpha_mutation(double m) { g_alpha_mutation = m; }
double alpha_mutation() { return g_alpha_mutation; }
}  // namespace testing

RenderOutput composite_hazy(const SampleSet& samples, std::span<const double> sigma, std::span<const double> sigma_s,
                            std::span<const Rgb> c, std::span<const Rgb> c_s)
{
    check_lengths(samples, sigma.size(), sigma_s.size(), "composite_hazy");
    check_lengths(samples, c.size(), c.size(), "composite_hazy");
    if (c_s.size() != 1 && c_s.size() != samples.size())
        throw Error("composite_hazy: c_s must hold one colour or one per sample");
    check_non_negative(sigma, "composite_hazy");
    check_non_negative(sigma_s, "composite_hazy");
    const double mutation = testing::alpha_mutation();

    RenderOutput out;
    double trans = 1.0;
    Rgb cs_sum = Rgb::Zero();
    double ss_sum = 0.0;
    for (std::size_t n = 0; n < samples.size(); ++n) {
        const double sigma_t = sigma[n] + sigma_s[n];
        const double alpha = alpha_of(sigma_t * samples.delta[n] * (1.0 + mutation));
        const double w = trans * alpha;
        const Rgb& cs = c_s.size() == 1 ? c_s[0] : c_s[n];
        out.surface += (ratio_or_zero(sigma[n], sigma_t) * w) * c[n];
        out.haze += (ratio_or_zero(sigma_s[n], sigma_t) * w) * cs;
        trans *= 1.0 - alpha;
        ss_sum += sigma_s[n];
        cs_sum += cs;
    }
    out.hazy = out.surface + out.haze;
    const double count = static_cast<double>(samples.size());
    out.sigma_s_bar = ss_sum / count;
    out.c_s_bar = c_s.size() == 1 ? c_s[0] : Rgb(cs_sum / count);
    return out;
}

ClearComposite composite_clear(const SampleSet& samples, std::span<const double> sigma, std::span<const Rgb> c)
{
    check_lengths(samples, sigma.size(), c.size(), "composite_clear");
    check_non_negative(sigma, "composite_clear");
    ClearComposite out;
    double trans = 1.0;
    for (std::size_t n = 0; n < samples.size(); ++n) {
        const double alpha = alpha_of(sigma[n] * samples.delta[n]);
        const double w = trans * alpha;
        out.color += w * c[n];
        out.depth += w * samples.t[n];
        out.opacity += w;
        trans *= 1.0 - alpha;
    }
    return out;
}

std::vector<double> transmittance(std::span<const double> optical_depth)
{
    std::vector<double> t(optical_depth.size() + 1, 1.0);
    for (std::size_t n = 0; n < optical_depth.size(); ++n)
        t[n + 1] = t[n] * (1.0 - alpha_of(optical_depth[n]));
    return t;
}

Rgb koschmieder_forward(const Rgb& clear, double depth, double sigma_s_bar, const Rgb& c_s_bar)
{
    if (!(depth >= 0.0))
        throw Error("koschmieder_forward: depth must be non-negative");
    const double tr = std::exp(-sigma_s_bar * depth);
    return clear * tr + c_s_bar * (1.0 - tr);
}

}  // namespace hazerf
