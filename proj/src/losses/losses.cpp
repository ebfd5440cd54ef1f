#include "hazerf/losses/losses.hpp"

#include "hazerf/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>

namespace hazerf {

void validate_weights(const LossWeights& w)
{
    for (double v : {w.lambda_eikonal, w.alpha_dcp, w.beta_2d, w.gamma_mask})
        if (!(v >= 0.0) || !std::isfinite(v))
            throw Error("loss weights must be finite and non-negative");
}

double loss_color(std::span<const Rgb> pred, std::span<const Rgb> target)
{
    if (pred.empty() || pred.size() != target.size())
        throw Error("loss_color: need equal, non-empty batches");
    double s = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k)
        s += (pred[k] - target[k]).cwiseAbs().sum();
    return s / static_cast<double>(pred.size());
}

double loss_eikonal(std::span<const double> grad_norms)
{
    if (grad_norms.empty())
        throw Error("loss_eikonal: empty batch");
    double s = 0.0;
    for (double g : grad_norms)
        s += (g - 1.0) * (g - 1.0);
    return s / static_cast<double>(grad_norms.size());
}

namespace {

void check_window(int window, int height, int width)
{
    if (window < 1 || window % 2 == 0)
        throw Error("dark channel: window must be odd and positive");
    if (window > std::min(height, width))
        throw Error("dark channel: window larger than the patch");
}

}  // namespace

Image dark_channel(const Image& patch, int window)
{
    if (patch.channels != 3)
        throw Error("dark channel: need an RGB patch");
    check_window(window, patch.height, patch.width);
    const int r = window / 2;
    Image out(patch.width, patch.height, 1);
    for (int y = 0; y < patch.height; ++y)
        for (int x = 0; x < patch.width; ++x) {
            double m = std::numeric_limits<double>::infinity();
            for (int yy = std::max(0, y - r); yy <= std::min(patch.height - 1, y + r); ++yy)
                for (int xx = std::max(0, x - r); xx <= std::min(patch.width - 1, x + r); ++xx)
                    for (int c = 0; c < 3; ++c)
                        m = std::min(m, patch.at(xx, yy, c));
            out.at(x, y, 0) = m;
        }
    return out;
}

double loss_dcp(std::span<const Image> clear_patches, int window)
{
    if (clear_patches.empty())
        throw Error("loss_dcp: empty batch");
    double s = 0.0;
    for (const auto& p : clear_patches) {
        const Image dc = dark_channel(p, window);
        double m = 0.0;
        for (double v : dc.data)
            m += std::abs(v);
        s += m / static_cast<double>(dc.data.size());
    }
    return s / static_cast<double>(clear_patches.size());
}

double loss_2d(std::span<const RenderOutput> out, std::span<const Rgb> target_hazy)
{
    if (out.empty() || out.size() != target_hazy.size())
        throw Error("loss_2d: need equal, non-empty batches");
    double s = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) {
        const RenderOutput& o = out[k];
        const double tr = std::exp(-o.sigma_s_bar * o.depth);
        const Rgb surf = o.clear * tr;
        const Rgb haze = o.c_s_bar * (1.0 - tr);
        s += (o.surface - surf).cwiseAbs().sum() + (o.haze - haze).cwiseAbs().sum() +
             (target_hazy[k] - surf - haze).cwiseAbs().sum();
    }
    return s / static_cast<double>(out.size());
}

double loss_mask(std::span<const double> mask, std::span<const double> opacity)
{
    if (mask.empty() || mask.size() != opacity.size())
        throw Error("loss_mask: need equal, non-empty batches");
    double s = 0.0;
    for (std::size_t k = 0; k < mask.size(); ++k) {
        if (mask[k] != 0.0 && mask[k] != 1.0)
            throw Error("loss_mask: mask values must be 0 or 1");
        const double o = std::clamp(opacity[k], kMaskEpsilon, 1.0 - kMaskEpsilon);
        s -= mask[k] * std::log(o) + (1.0 - mask[k]) * std::log(1.0 - o);
    }
    return s / static_cast<double>(mask.size());
}

double loss_total(const LossParts& p, const LossWeights& w)
{
    for (double v : {p.color, p.eikonal, p.dcp, p.l2d, p.mask})
        if (!std::isfinite(v))
            throw Error("loss_total: non-finite loss term");
    return p.color + w.lambda_eikonal * p.eikonal + w.alpha_dcp * p.dcp + w.beta_2d * p.l2d + w.gamma_mask * p.mask;
}

Var loss_color(Tape& tape, Var pred, const Matrix& target)
{
    if (tape.value(pred).rows() == 0)
        throw Error("loss_color: empty batch");
    return tape.scale(tape.sum(tape.abs(tape.sub(pred, tape.constant(target)))),
                      1.0 / static_cast<double>(target.rows()));
}

Var loss_eikonal(Tape& tape, Var grad_norms)
{
    if (tape.value(grad_norms).size() == 0)
        throw Error("loss_eikonal: empty batch");
    return tape.mean(tape.square(tape.add_scalar(grad_norms, -1.0)));
}

Var dark_channel(Tape& tape, Var clear, int height, int width, int window)
{
    check_window(window, height, width);
    return tape.window_min(tape.row_min(clear), height, width, window);
}

Var loss_dcp(Tape& tape, Var clear, int height, int width, int window)
{
    return tape.mean(tape.abs(dark_channel(tape, clear, height, width, window)));
}

Var loss_2d(Tape& tape, const RenderBatch& o, const Matrix& target_hazy)
{
    for (Var v : {o.surface, o.haze, o.clear, o.depth, o.sigma_s_bar, o.c_s_bar})
        if (!v.valid())
            throw Error("loss_2d: missing ray statistics");
    const Var tr = tape.exp(tape.scale(tape.mul(o.sigma_s_bar, o.depth), -1.0));
    const Var surf = tape.mul_col(o.clear, tr);
    const Var haze = tape.mul_col(o.c_s_bar, tape.add_scalar(tape.scale(tr, -1.0), 1.0));
    const Var a = tape.abs(tape.sub(o.surface, surf));
    const Var b = tape.abs(tape.sub(o.haze, haze));
    const Var c = tape.abs(tape.sub(tape.sub(tape.constant(target_hazy), surf), haze));
    return tape.scale(tape.sum(tape.add(tape.add(a, b), c)), 1.0 / static_cast<double>(target_hazy.rows()));
}

Var loss_mask(Tape& tape, Var opacity, const Matrix& mask)
{
    for (Eigen::Index i = 0; i < mask.size(); ++i)
        if (mask.data()[i] != 0.0 && mask.data()[i] != 1.0)
            throw Error("loss_mask: mask values must be 0 or 1");
    const Var o = tape.clamp(opacity, kMaskEpsilon, 1.0 - kMaskEpsilon);
    const Var m = tape.constant(mask);
    const Var not_m = tape.constant((1.0 - mask.array()).matrix());
    const Var ll = tape.add(tape.mul(m, tape.log(o)), tape.mul(not_m, tape.log(tape.add_scalar(tape.scale(o, -1.0), 1.0))));
    return tape.scale(tape.mean(ll), -1.0);
}

Var loss_total(Tape& tape, LossTerms& t, const LossWeights& w)
{
    Var total = t.color;
    auto add = [&](Var term, double weight) {
        if (!term.valid() || weight == 0.0)
            return;
        const Var scaled = tape.scale(term, weight);
        total = total.valid() ? tape.add(total, scaled) : scaled;
    };
    add(t.eikonal, w.lambda_eikonal);
    add(t.dcp, w.alpha_dcp);
    add(t.l2d, w.beta_2d);
    add(t.mask, w.gamma_mask);
    if (!total.valid())
        throw Error("loss_total: no loss terms");
    t.total = total;
    return total;
}

LossLog::LossLog(const std::filesystem::path& path, bool append)
    : out_(path, append ? std::ios::app : std::ios::trunc)
{
    if (!out_)
        throw Error("cannot open loss log " + path.string());
    if (!append || std::filesystem::file_size(path) == 0)
        out_ << "iteration,lr,color,eikonal,dcp,l2d,mask,w_color,w_eikonal,w_dcp,w_l2d,w_mask,total\n";
}

void LossLog::write(std::int64_t iteration, const LossParts& p, const LossWeights& w, double lr)
{
    out_ << iteration << ',' << std::setprecision(17) << lr << ',' << p.color << ',' << p.eikonal << ',' << p.dcp
         << ',' << p.l2d << ',' << p.mask << ',' << p.color << ',' << w.lambda_eikonal * p.eikonal << ','
         << w.alpha_dcp * p.dcp << ',' << w.beta_2d * p.l2d << ',' << w.gamma_mask * p.mask << ','
         << loss_total(p, w) << '\n';
    out_.flush();
}

}  // namespace hazerf
