#pragma once

#include "hazerf/fields/scene.hpp"
#include "hazerf/renderer/image_io.hpp"

#include <optional>
#include <vector>

namespace hazerf {

inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) over every pixel and channel; identical images give kPsnrCap.
double psnr(const Image& a, const Image& b);

/// Mean SSIM over channels and valid 11x11 windows (Gaussian, sigma 1.5,
/// K1 = 0.01, K2 = 0.03, dynamic range 1). For images smaller than 11
/// pixels the window shrinks to the shorter side.
double ssim(const Image& a, const Image& b);

/// `count` points on the boundary of an analytic union, area-weighted over
/// primitives and keeping only points not inside another primitive.
std::vector<Vec3> sample_surface(const AnalyticSdf& sdf, int count, std::uint64_t seed);

/// Mean |f(p)| of `field` over points sampled on the ground-truth surface.
double geometry_error(const SdfField& field, const ParamStore& params, const AnalyticSdf& truth, int count,
                      std::uint64_t seed);

struct PixelPair {
    int xa = 0, ya = 0;
    int xb = 0, yb = 0;
};

/// Per pair, each channel gives ln((I_a - c) / (I_b - c)) / (D_b - D_a);
/// valid channels are averaged, negative or non-finite candidates dropped
/// and the median returned. Pairs with |D_b - D_a| <= 1e-6 are skipped.
/// Throws when no candidate survives.
double pairwise_sigma_estimate(const Image& image_a, const Image& depth_a, const Image& image_b, const Image& depth_b,
                               const std::vector<PixelPair>& pairs, const Rgb& c_s_bar);

}  // namespace hazerf
