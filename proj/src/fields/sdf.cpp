#include "hazerf/fields/sdf.hpp"

#include "hazerf/error.hpp"
#include "hazerf/fields/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace hazerf {

namespace {

double prim_eval(const SpherePrimitive& s, const Vec3& p) { return (p - s.center).norm() - s.radius; }
double prim_eval(const PlanePrimitive& s, const Vec3& p) { return s.normal.dot(p) - s.offset; }

double prim_eval(const BoxPrimitive& b, const Vec3& p)
{
    const Vec3 q = (p - b.center).cwiseAbs() - b.half_extents;
    return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

Vec3 prim_grad(const SpherePrimitive& s, const Vec3& p) { return (p - s.center).normalized(); }
Vec3 prim_grad(const PlanePrimitive& s, const Vec3&) { return s.normal; }

Vec3 prim_grad(const BoxPrimitive& b, const Vec3& p)
{
    const Vec3 rel = p - b.center;
    const Vec3 q = rel.cwiseAbs() - b.half_extents;
    Vec3 sign;
    for (int i = 0; i < 3; ++i)
        sign[i] = rel[i] < 0.0 ? -1.0 : 1.0;
    if (q.maxCoeff() > 0.0) {
        const Vec3 outside = q.cwiseMax(0.0);
        return outside.normalized().cwiseProduct(sign);
    }
    int axis = 0;
    for (int i = 1; i < 3; ++i)
        if (q[i] > q[axis])
            axis = i;
    Vec3 g = Vec3::Zero();
    g[axis] = sign[axis];
    return g;
}

std::optional<double> prim_hit(const SpherePrimitive& s, const Vec3& o, const Vec3& d)
{
    const Vec3 oc = o - s.center;
    const double b = oc.dot(d);
    const double c = oc.squaredNorm() - s.radius * s.radius;
    const double disc = b * b - c;
    if (disc < 0.0)
        return std::nullopt;
    const double root = std::sqrt(disc);
    const double t0 = -b - root;
    if (t0 >= 0.0)
        return t0;
    const double t1 = -b + root;
    if (t1 >= 0.0)
        return 0.0;  // origin inside
    return std::nullopt;
}

std::optional<double> prim_hit(const PlanePrimitive& s, const Vec3& o, const Vec3& d)
{
    const double f0 = s.normal.dot(o) - s.offset;
    if (f0 <= 0.0)
        return 0.0;
    const double nd = s.normal.dot(d);
    if (nd >= 0.0)
        return std::nullopt;
    return -f0 / nd;
}

std::optional<double> prim_hit(const BoxPrimitive& b, const Vec3& o, const Vec3& d)
{
    double t_near = -std::numeric_limits<double>::infinity();
    double t_far = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
        const double lo = b.center[i] - b.half_extents[i];
        const double hi = b.center[i] + b.half_extents[i];
        if (d[i] == 0.0) {
            if (o[i] < lo || o[i] > hi)
                return std::nullopt;
            continue;
        }
        double t1 = (lo - o[i]) / d[i];
        double t2 = (hi - o[i]) / d[i];
        if (t1 > t2)
            std::swap(t1, t2);
        t_near = std::max(t_near, t1);
        t_far = std::min(t_far, t2);
    }
    if (t_near > t_far || t_far < 0.0)
        return std::nullopt;
    return std::max(t_near, 0.0);
}

}  // namespace

double AnalyticSdf::eval(const Vec3& p) const
{
    if (primitives.empty())
        return std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    for (const auto& prim : primitives)
        best = std::min(best, std::visit([&](const auto& s) { return prim_eval(s, p); }, prim));
    return best;
}

Vec3 AnalyticSdf::grad(const Vec3& p) const
{
    if (primitives.empty())
        return Vec3::Zero();
    std::size_t best = 0;
    double best_val = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < primitives.size(); ++i) {
        const double v = std::visit([&](const auto& s) { return prim_eval(s, p); }, primitives[i]);
        if (v < best_val) {
            best_val = v;
            best = i;
        }
    }
    return std::visit([&](const auto& s) { return prim_grad(s, p); }, primitives[best]);
}

std::optional<double> AnalyticSdf::intersect(const Vec3& origin, const Vec3& dir, double t_min, double t_max) const
{
    const Vec3 start = origin + t_min * dir;
    std::optional<double> best;
    for (const auto& prim : primitives) {
        const auto hit = std::visit([&](const auto& s) { return prim_hit(s, start, dir); }, prim);
        if (hit && (!best || *hit < *best))
            best = hit;
    }
    if (!best)
        return std::nullopt;
    const double t = t_min + *best;
    if (t > t_max)
        return std::nullopt;
    return t;
}

double AnalyticSdf::bounding_radius() const
{
    double r = 0.0;
    for (const auto& prim : primitives) {
        if (const auto* s = std::get_if<SpherePrimitive>(&prim))
            r = std::max(r, s->center.norm() + s->radius);
        else if (const auto* b = std::get_if<BoxPrimitive>(&prim))
            r = std::max(r, b->center.norm() + b->half_extents.norm());
        else
            return std::numeric_limits<double>::infinity();
    }
    return r;
}

NeuralSdf::NeuralSdf(NeuralSdfConfig cfg, ParamStore& params, std::uint64_t seed, const std::string& prefix)
    : cfg_(cfg)
{
    if (cfg.layers < 1 || cfg.hidden < 1 || cfg.frequencies < 0)
        throw Error("neural sdf: invalid network size");
    const int enc = encoded_width(cfg.frequencies);
    int in = enc;
    for (int l = 0; l < cfg.layers; ++l) {
        if (l == cfg.skip_layer && l > 0)
            in += enc;
        const std::string name = prefix + ".l" + std::to_string(l);
        Dense d = add_dense(params, name, in, cfg.hidden);
        auto rng = init_rng(seed, name);
        auto& w = params.at(d.weight).values;
        fill_normal(w, rng, 0.0, std::sqrt(2.0) / std::sqrt(static_cast<double>(cfg.hidden)));
        // only the raw coordinates feed the first layer and the skip input at init
        const int enc_first = (l == 0) ? 0 : (l == cfg.skip_layer ? in - enc : -1);
        if (enc_first >= 0 && cfg.frequencies > 0)
            for (int r = enc_first + 3; r < enc_first + enc; ++r)
                for (int c = 0; c < cfg.hidden; ++c)
                    w[static_cast<std::size_t>(r * cfg.hidden + c)] = 0.0;
        hidden_.push_back(d);
        in = cfg.hidden;
    }
    out_ = add_dense(params, prefix + ".out", cfg.hidden, 1);
    auto rng = init_rng(seed, prefix + ".out");
    fill_normal(params.at(out_.weight).values, rng, std::sqrt(std::numbers::pi) / std::sqrt(static_cast<double>(cfg.hidden)),
                1e-4);
    params.at(out_.bias).values[0] = -cfg.init_radius;
}

NeuralSdf::Output NeuralSdf::evaluate(Tape& tape, const ParamStore& params, const Matrix& points, bool with_grad) const
{
    const Eigen::Index B = points.rows();
    const Matrix enc = positional_encoding(points, cfg_.frequencies);
    Matrix enc_t;
    if (with_grad) {
        enc_t.resize(3 * B, enc.cols());
        for (int a = 0; a < 3; ++a)
            enc_t.middleRows(a * B, B) = positional_encoding_tangent(points, cfg_.frequencies, a);
    }
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    const Var x = tape.constant(enc);
    const Var xt = with_grad ? tape.constant(enc_t) : Var{};
    Var h = x;
    Var ht = xt;
    for (std::size_t l = 0; l < hidden_.size(); ++l) {
        if (static_cast<int>(l) == cfg_.skip_layer && l > 0) {
            h = tape.scale(tape.concat_cols(h, x), inv_sqrt2);
            if (with_grad)
                ht = tape.scale(tape.concat_cols(ht, xt), inv_sqrt2);
        }
        const Var z = hidden_[l].apply(tape, params, h);
        if (with_grad) {
            const Var zt = hidden_[l].apply_linear(tape, params, ht);
            ht = tape.mul_rowtile(zt, tape.sigmoid(tape.scale(z, cfg_.softplus_beta)));
        }
        h = tape.softplus(z, cfg_.softplus_beta);
    }
    Output o;
    o.value = out_.apply(tape, params, h);
    if (with_grad)
        o.grad = tape.transpose(tape.reshape(out_.apply_linear(tape, params, ht), 3, B));
    return o;
}

NeuralSdf::Output SdfField::evaluate(Tape& tape, const ParamStore& params, const Matrix& points, bool with_grad) const
{
    if (const auto* n = std::get_if<NeuralSdf>(&impl_))
        return n->evaluate(tape, params, points, with_grad);
    const auto& a = std::get<AnalyticSdf>(impl_);
    Matrix f(points.rows(), 1);
    Matrix g(points.rows(), 3);
    for (Eigen::Index r = 0; r < points.rows(); ++r) {
        const Vec3 p = points.row(r).transpose();
        f(r, 0) = a.eval(p);
        if (with_grad)
            g.row(r) = a.grad(p).transpose();
    }
    NeuralSdf::Output o;
    o.value = tape.constant(std::move(f));
    if (with_grad)
        o.grad = tape.constant(std::move(g));
    return o;
}

double sdf_eval(const SdfField& field, const ParamStore& params, const Vec3& p)
{
    if (!p.allFinite())
        throw Error("sdf_eval: non-finite point");
    if (field.is_analytic())
        return field.analytic().eval(p);
    Tape tape;
    const auto o = field.evaluate(tape, params, Matrix(p.transpose()), false);
    return tape.value(o.value)(0, 0);
}

Vec3 sdf_grad(const SdfField& field, const ParamStore& params, const Vec3& p)
{
    if (!p.allFinite())
        throw Error("sdf_grad: non-finite point");
    if (field.is_analytic())
        return field.analytic().grad(p);
    Tape tape;
    const auto o = field.evaluate(tape, params, Matrix(p.transpose()), true);
    return tape.value(o.grad).row(0).transpose();
}

double opaque_density(double f_val, double grad_dot_d, double s)
{
    if (!(s > 0.0))
        throw Error("opaque_density: sharpness must be positive");
    // Phi_s(f) - 1 = -sigmoid(-s f), evaluated without cancellation
    const double x = -s * f_val;
    const double sig = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    return std::max(0.0, -s * sig * grad_dot_d);
}

Var opaque_density(Tape& tape, Var f, Var grad_dot_d, Var s)
{
    const Var tail = tape.sigmoid(tape.scale(tape.mul_scalar(f, s), -1.0));
    const Var raw = tape.scale(tape.mul_scalar(tape.mul(tail, grad_dot_d), s), -1.0);
    return tape.relu(raw);
}

}  // namespace hazerf
