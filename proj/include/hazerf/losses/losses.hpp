#pragma once

#include "hazerf/renderer/image_io.hpp"
#include "hazerf/renderer/render.hpp"

#include <filesystem>
#include <fstream>
#include <span>

namespace hazerf {

struct LossWeights {
    double lambda_eikonal = 0.1;
    double alpha_dcp = 5000.0;
    double beta_2d = 0.01;
    double gamma_mask = 0.1;
};

void validate_weights(const LossWeights& w);

inline constexpr double kMaskEpsilon = 1e-7;

// Plain evaluations.

/// Mean over rays of the per-ray L1 distance (channels summed).
double loss_color(std::span<const Rgb> pred, std::span<const Rgb> target);
double loss_eikonal(std::span<const double> grad_norms);
/// Per-pixel minimum over channels and a window clamped at the border.
Image dark_channel(const Image& patch, int window);
double loss_dcp(std::span<const Image> clear_patches, int window);
double loss_2d(std::span<const RenderOutput> out, std::span<const Rgb> target_hazy);
double loss_mask(std::span<const double> mask, std::span<const double> opacity);

struct LossParts {
    double color = 0.0;
    double eikonal = 0.0;
    double dcp = 0.0;
    double l2d = 0.0;
    double mask = 0.0;
};

double loss_total(const LossParts& parts, const LossWeights& w);

// Tape forms; every result is a 1 x 1 node.

Var loss_color(Tape& tape, Var pred, const Matrix& target);
Var loss_eikonal(Tape& tape, Var grad_norms);
/// `clear` holds `patches` stacked row-major (height x width) RGB images.
Var dark_channel(Tape& tape, Var clear, int height, int width, int window);
Var loss_dcp(Tape& tape, Var clear, int height, int width, int window);
Var loss_2d(Tape& tape, const RenderBatch& out, const Matrix& target_hazy);
Var loss_mask(Tape& tape, Var opacity, const Matrix& mask);

struct LossTerms {
    Var color, eikonal, dcp, l2d, mask, total;
};

/// Weighted sum of the present terms; invalid Vars count as absent.
Var loss_total(Tape& tape, LossTerms& terms, const LossWeights& w);

/// Append-only CSV of loss curves.
class LossLog {
public:
    LossLog(const std::filesystem::path& path, bool append);
    void write(std::int64_t iteration, const LossParts& raw, const LossWeights& w, double lr);

private:
    std::ofstream out_;
};

}  // namespace hazerf
