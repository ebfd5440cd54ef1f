#pragma once

#include "hazerf/diffcore/tape.hpp"
#include "hazerf/fields/mlp.hpp"
#include "hazerf/util/vec.hpp"

#include <variant>
#include <vector>

namespace hazerf {

struct ZeroScattering {};

/// Homogeneous medium with a fixed coefficient.
struct ConstantScattering {
    double sigma = 0.0;
};

struct GaussianBlob {
    Vec3 center = Vec3::Zero();
    double stddev = 1.0;
    double amplitude = 1.0;
};

/// sigma_s(p) = sum_k a_k exp(-|p - mu_k|^2 / (2 std_k^2))
struct BlobScattering {
    std::vector<GaussianBlob> blobs;

    double eval(const Vec3& p) const;
};

/// Spatially constant softplus(theta).
class ScalarScattering {
public:
    ScalarScattering() = default;
    ScalarScattering(double init_sigma, ParamStore& params, const std::string& name = "scatter.theta");

    std::size_t param() const { return param_; }
    double value(const ParamStore& params) const;

private:
    std::size_t param_ = 0;
};

struct BandLimitedConfig {
    /// Highest spatial frequency of the field, in cycles per unit length.
    double max_frequency = 10.0;
    int hidden = 32;
    int layers = 3;
    double init_sigma = 0.05;
};

/// Multiplicative filter network: z_1 = sin(2 pi p Omega_1 + phi_1),
/// z_{i+1} = (z_i W_i + b_i) * sin(2 pi p Omega_{i+1} + phi_{i+1}), output
/// softplus(z_K W + b). Every filter frequency vector has norm at most
/// max_frequency / layers, so the pre-activation output is band-limited to
/// max_frequency. Filter frequencies and phases are fixed by the seed.
class BandLimitedScattering {
public:
    BandLimitedScattering() = default;
    BandLimitedScattering(BandLimitedConfig cfg, ParamStore& params, std::uint64_t seed,
                          const std::string& prefix = "scatter");

    const BandLimitedConfig& config() const { return cfg_; }
    Var evaluate(Tape& tape, const ParamStore& params, const Matrix& points) const;

private:
    Matrix filter(const Matrix& points, std::size_t i) const;

    BandLimitedConfig cfg_;
    std::vector<Matrix> omegas_;  // 3 x hidden, cycles per unit
    std::vector<Matrix> phases_;  // 1 x hidden
    std::vector<Dense> linears_;
    Dense out_;
};

class ScatteringField {
public:
    using Variant = std::variant<ZeroScattering, ConstantScattering, BlobScattering, ScalarScattering,
                                 BandLimitedScattering>;

    ScatteringField() : impl_(ZeroScattering{}) {}
    template <typename T>
    ScatteringField(T v) : impl_(std::move(v)) {}

    bool is_zero() const { return std::holds_alternative<ZeroScattering>(impl_); }
    bool is_learnable() const
    {
        return std::holds_alternative<ScalarScattering>(impl_) || std::holds_alternative<BandLimitedScattering>(impl_);
    }
    const Variant& variant() const { return impl_; }

    /// B x 1 coefficients at the rows of `points`.
    Var evaluate(Tape& tape, const ParamStore& params, const Matrix& points) const;

private:
    Variant impl_;
};

double scattering_eval(const ScatteringField& field, const ParamStore& params, const Vec3& p);

/// Global in-scattered light, either fixed or sigmoid(theta).
class AtmosphericLight {
public:
    AtmosphericLight() = default;
    explicit AtmosphericLight(Rgb fixed) : fixed_(fixed) {}
    AtmosphericLight(Rgb init, ParamStore& params, const std::string& name = "airlight.theta");

    bool learnable() const { return learnable_; }
    std::size_t param() const { return param_; }
    Rgb value(const ParamStore& params) const;
    /// 1 x 3 node.
    Var evaluate(Tape& tape, const ParamStore& params) const;

private:
    bool learnable_ = false;
    Rgb fixed_ = Rgb::Zero();
    std::size_t param_ = 0;
};

/// Opaque-density sharpness s, fixed or exp(theta).
class Sharpness {
public:
    Sharpness() = default;
    explicit Sharpness(double fixed);
    Sharpness(double init, ParamStore& params, const std::string& name = "sharpness.theta");

    bool learnable() const { return learnable_; }
    double value(const ParamStore& params) const;
    /// 1 x 1 node.
    Var evaluate(Tape& tape, const ParamStore& params) const;

private:
    bool learnable_ = false;
    double fixed_ = 1.0;
    std::size_t param_ = 0;
};

/// softplus^{-1}(y) for y > 0.
double inverse_softplus(double y);
double logit(double y);

}  // namespace hazerf
