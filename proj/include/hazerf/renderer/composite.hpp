#pragma once

#include "hazerf/renderer/ray.hpp"

#include <span>

namespace hazerf {

struct RenderOutput {
    Rgb hazy = Rgb::Zero();
    Rgb surface = Rgb::Zero();
    Rgb haze = Rgb::Zero();
    Rgb clear = Rgb::Zero();
    double depth = 0.0;
    double opacity = 0.0;
    double sigma_s_bar = 0.0;
    Rgb c_s_bar = Rgb::Zero();
};

/// Discrete scattering-aware composite. Fills hazy, surface, haze and the
/// ray averages of sigma_s and c_s; the clear-view fields are left zero.
/// `c_s` holds either one colour or one per sample.
RenderOutput composite_hazy(const SampleSet& samples, std::span<const double> sigma, std::span<const double> sigma_s,
                            std::span<const Rgb> c, std::span<const Rgb> c_s);

struct ClearComposite {
    Rgb color = Rgb::Zero();
    double opacity = 0.0;
    double depth = 0.0;
};

ClearComposite composite_clear(const SampleSet& samples, std::span<const double> sigma, std::span<const Rgb> c);

/// C e^{-sigma D} + c_s (1 - e^{-sigma D})
/// T[n] = prod_{m<n} (1 - alpha[m]) for n = 0..N, alpha = clamp(1 - exp(-optical_depth), 0, 1).
std::vector<double> transmittance(std::span<const double> optical_depth);

Rgb koschmieder_forward(const Rgb& clear, double depth, double sigma_s_bar, const Rgb& c_s_bar);

namespace testing {
/// Multiplies the optical depth used for the hazy alpha by (1 + m). Zero in
/// normal operation; the check suite sets it to confirm that it notices.
void set_alpha_mutation(double m);
double alpha_mutation();
}  // namespace testing

}  // namespace hazerf
