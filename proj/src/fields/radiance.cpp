#include "hazerf/fields/radiance.hpp"

#include "hazerf/error.hpp"
#include "hazerf/fields/encoding.hpp"

#include <algorithm>
#include <cmath>

namespace hazerf {

Rgb TextureRadiance::eval(const Vec3& p) const
{
    Rgb c;
    for (int k = 0; k < 3; ++k)
        c[k] = std::clamp(offset + amplitude * std::sin(frequency * axes[static_cast<std::size_t>(k)].dot(p) + phases[k]),
                          0.0, 1.0);
    return c;
}

Rgb OctantRadiance::eval(const Vec3& p) const
{
    const int idx = (p.x() >= 0.0 ? 1 : 0) | (p.y() >= 0.0 ? 2 : 0) | (p.z() >= 0.0 ? 4 : 0);
    return colors[static_cast<std::size_t>(idx)];
}

NeuralRadiance::NeuralRadiance(NeuralRadianceConfig cfg, ParamStore& params, std::uint64_t seed,
                               const std::string& prefix)
    : cfg_(cfg)
{
    if (cfg.layers < 1 || cfg.hidden < 1)
        throw Error("neural radiance: invalid network size");
    int in = encoded_width(cfg.position_frequencies) + (cfg.view_dependent ? encoded_width(cfg.direction_frequencies) : 0);
    for (int l = 0; l <= cfg.layers; ++l) {
        const bool last = l == cfg.layers;
        const int out = last ? 3 : cfg.hidden;
        const std::string name = prefix + (last ? std::string(".out") : ".l" + std::to_string(l));
        Dense d = add_dense(params, name, in, out);
        auto rng = init_rng(seed, name);
        const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
        fill_uniform(params.at(d.weight).values, rng, -bound, bound);
        layers_.push_back(d);
        in = out;
    }
}

Var NeuralRadiance::evaluate(Tape& tape, const ParamStore& params, const Matrix& points, const Matrix& dirs) const
{
    const Matrix ep = positional_encoding(points, cfg_.position_frequencies);
    Var h;
    if (cfg_.view_dependent) {
        const Matrix ed = positional_encoding(dirs, cfg_.direction_frequencies);
        Matrix in(points.rows(), ep.cols() + ed.cols());
        in << ep, ed;
        h = tape.constant(std::move(in));
    } else {
        h = tape.constant(ep);
    }
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l)
        h = tape.relu(layers_[l].apply(tape, params, h));
    return tape.sigmoid(layers_.back().apply(tape, params, h));
}

Rgb RadianceField::eval(const Vec3& p, const Vec3&) const
{
    if (const auto* c = std::get_if<ConstantRadiance>(&impl_))
        return c->color;
    if (const auto* t = std::get_if<TextureRadiance>(&impl_))
        return t->eval(p);
    if (const auto* o = std::get_if<OctantRadiance>(&impl_))
        return o->eval(p);
    throw Error("radiance: plain evaluation of a neural field needs a tape");
}

Var RadianceField::evaluate(Tape& tape, const ParamStore& params, const Matrix& points, const Matrix& dirs) const
{
    if (const auto* n = std::get_if<NeuralRadiance>(&impl_))
        return n->evaluate(tape, params, points, dirs);
    Matrix c(points.rows(), 3);
    for (Eigen::Index r = 0; r < points.rows(); ++r)
        c.row(r) = eval(points.row(r).transpose(), dirs.row(r).transpose()).transpose();
    return tape.constant(std::move(c));
}

}  // namespace hazerf
