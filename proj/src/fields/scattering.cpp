#include "hazerf/fields/scattering.hpp"

#include "hazerf/error.hpp"

#include <cmath>
#include <numbers>

namespace hazerf {

double inverse_softplus(double y)
{
    if (!(y > 0.0))
        throw Error("inverse_softplus: argument must be positive");
    return y > 30.0 ? y : std::log(std::expm1(y));
}

double logit(double y)
{
    if (!(y > 0.0 && y < 1.0))
        throw Error("logit: argument must lie in (0, 1)");
    return std::log(y / (1.0 - y));
}

double BlobScattering::eval(const Vec3& p) const
{
    double s = 0.0;
    for (const auto& b : blobs)
        s += b.amplitude * std::exp(-(p - b.center).squaredNorm() / (2.0 * b.stddev * b.stddev));
    return s;
}

ScalarScattering::ScalarScattering(double init_sigma, ParamStore& params, const std::string& name)
    : param_(params.add(name, {1}, {inverse_softplus(init_sigma)}))
{
}

double ScalarScattering::value(const ParamStore& params) const
{
    const double t = params.at(param_).values[0];
    return t > 30.0 ? t : std::log1p(std::exp(t));
}

BandLimitedScattering::BandLimitedScattering(BandLimitedConfig cfg, ParamStore& params, std::uint64_t seed,
                                             const std::string& prefix)
    : cfg_(cfg)
{
    if (cfg.layers < 1 || cfg.hidden < 1 || !(cfg.max_frequency >= 0.0))
        throw Error("band-limited scattering: invalid configuration");
    const double per_filter = cfg.max_frequency / cfg.layers;
    for (int i = 0; i < cfg.layers; ++i) {
        auto rng = init_rng(seed, prefix + ".filter" + std::to_string(i));
        std::normal_distribution<double> n(0.0, 1.0);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        Matrix omega(3, cfg.hidden);
        Matrix phase(1, cfg.hidden);
        for (int c = 0; c < cfg.hidden; ++c) {
            Vec3 dir(n(rng), n(rng), n(rng));
            dir.normalize();
            omega.col(c) = dir * (per_filter * u(rng));
            phase(0, c) = std::numbers::pi * (2.0 * u(rng) - 1.0);
        }
        omegas_.push_back(std::move(omega));
        phases_.push_back(std::move(phase));
    }
    const double bound = std::sqrt(6.0 / cfg.hidden);
    for (int i = 1; i < cfg.layers; ++i) {
        const std::string name = prefix + ".l" + std::to_string(i);
        Dense d = add_dense(params, name, cfg.hidden, cfg.hidden);
        auto rng = init_rng(seed, name);
        fill_uniform(params.at(d.weight).values, rng, -bound, bound);
        linears_.push_back(d);
    }
    out_ = add_dense(params, prefix + ".out", cfg.hidden, 1);
    auto rng = init_rng(seed, prefix + ".out");
    fill_uniform(params.at(out_.weight).values, rng, -0.01 * bound, 0.01 * bound);
    params.at(out_.bias).values[0] = inverse_softplus(cfg.init_sigma);
}

Matrix BandLimitedScattering::filter(const Matrix& points, std::size_t i) const
{
    Matrix arg = (2.0 * std::numbers::pi) * (points * omegas_[i]);
    arg.rowwise() += phases_[i].row(0);
    return arg.array().sin();
}

Var BandLimitedScattering::evaluate(Tape& tape, const ParamStore& params, const Matrix& points) const
{
    Var z = tape.constant(filter(points, 0));
    for (std::size_t i = 0; i < linears_.size(); ++i)
        z = tape.mul(linears_[i].apply(tape, params, z), tape.constant(filter(points, i + 1)));
    return tape.softplus(out_.apply(tape, params, z));
}

Var ScatteringField::evaluate(Tape& tape, const ParamStore& params, const Matrix& points) const
{
    const Eigen::Index B = points.rows();
    if (std::holds_alternative<ZeroScattering>(impl_))
        return tape.constant(Matrix::Zero(B, 1));
    if (const auto* c = std::get_if<ConstantScattering>(&impl_))
        return tape.constant(Matrix::Constant(B, 1, c->sigma));
    if (const auto* b = std::get_if<BlobScattering>(&impl_)) {
        Matrix m(B, 1);
        for (Eigen::Index r = 0; r < B; ++r)
            m(r, 0) = b->eval(points.row(r).transpose());
        return tape.constant(std::move(m));
    }
    if (const auto* s = std::get_if<ScalarScattering>(&impl_))
        return tape.outer(tape.constant(Matrix::Ones(B, 1)), tape.softplus(tape.param(params, s->param())));
    return std::get<BandLimitedScattering>(impl_).evaluate(tape, params, points);
}

double scattering_eval(const ScatteringField& field, const ParamStore& params, const Vec3& p)
{
    if (!p.allFinite())
        throw Error("scattering_eval: non-finite point");
    const auto& v = field.variant();
    if (std::holds_alternative<ZeroScattering>(v))
        return 0.0;
    if (const auto* c = std::get_if<ConstantScattering>(&v))
        return c->sigma;
    if (const auto* b = std::get_if<BlobScattering>(&v))
        return b->eval(p);
    if (const auto* s = std::get_if<ScalarScattering>(&v))
        return s->value(params);
    Tape tape;
    return tape.value(field.evaluate(tape, params, Matrix(p.transpose())))(0, 0);
}

AtmosphericLight::AtmosphericLight(Rgb init, ParamStore& params, const std::string& name)
    : learnable_(true), param_(params.add(name, {3}, {logit(init[0]), logit(init[1]), logit(init[2])}))
{
}

Rgb AtmosphericLight::value(const ParamStore& params) const
{
    if (!learnable_)
        return fixed_;
    const auto& v = params.at(param_).values;
    Rgb c;
    for (int k = 0; k < 3; ++k)
        c[k] = 1.0 / (1.0 + std::exp(-v[static_cast<std::size_t>(k)]));
    return c;
}

Var AtmosphericLight::evaluate(Tape& tape, const ParamStore& params) const
{
    if (learnable_)
        return tape.sigmoid(tape.param(params, param_));
    return tape.constant(Matrix(fixed_.transpose()));
}

Sharpness::Sharpness(double fixed) : fixed_(fixed)
{
    if (!(fixed > 0.0))
        throw Error("sharpness must be positive");
}

Sharpness::Sharpness(double init, ParamStore& params, const std::string& name) : learnable_(true)
{
    if (!(init > 0.0))
        throw Error("sharpness must be positive");
    param_ = params.add(name, {1}, {std::log(init)});
}

double Sharpness::value(const ParamStore& params) const
{
    return learnable_ ? std::exp(params.at(param_).values[0]) : fixed_;
}

Var Sharpness::evaluate(Tape& tape, const ParamStore& params) const
{
    if (learnable_)
        return tape.exp(tape.param(params, param_));
    return tape.scalar(fixed_);
}

}  // namespace hazerf
