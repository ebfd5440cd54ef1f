#pragma once

#include "hazerf/diffcore/tape.hpp"
#include "hazerf/fields/mlp.hpp"
#include "hazerf/util/vec.hpp"

#include <optional>
#include <variant>
#include <vector>

namespace hazerf {

struct SpherePrimitive {
    Vec3 center = Vec3::Zero();
    double radius = 1.0;
};

/// f(p) = n . p - offset with unit n.
struct PlanePrimitive {
    Vec3 normal = Vec3::UnitZ();
    double offset = 0.0;
};

struct BoxPrimitive {
    Vec3 center = Vec3::Zero();
    Vec3 half_extents = Vec3::Constant(0.5);
};

using SdfPrimitive = std::variant<SpherePrimitive, PlanePrimitive, BoxPrimitive>;

/// Union (pointwise minimum) of primitives. Ties go to the lowest index.
struct AnalyticSdf {
    std::vector<SdfPrimitive> primitives;

    double eval(const Vec3& p) const;
    Vec3 grad(const Vec3& p) const;
    /// First t in [t_min, t_max] with f(o + t d) = 0 (d unit), if any.
    std::optional<double> intersect(const Vec3& origin, const Vec3& dir, double t_min, double t_max) const;
    /// Radius of a sphere about the origin enclosing every bounded primitive.
    double bounding_radius() const;
};

struct NeuralSdfConfig {
    int frequencies = 6;
    int hidden = 64;
    int layers = 4;
    /// Hidden layer index that receives the encoded input again.
    int skip_layer = 2;
    double init_radius = 0.5;
    double softplus_beta = 100.0;
};

/// Positional encoding -> softplus MLP -> scalar, with geometric
/// initialisation towards a sphere of `init_radius`.
class NeuralSdf {
public:
    NeuralSdf() = default;
    NeuralSdf(NeuralSdfConfig cfg, ParamStore& params, std::uint64_t seed, const std::string& prefix = "sdf");

    const NeuralSdfConfig& config() const { return cfg_; }

    struct Output {
        Var value;  // B x 1
        Var grad;   // B x 3, invalid when not requested
    };
    Output evaluate(Tape& tape, const ParamStore& params, const Matrix& points, bool with_grad) const;

private:
    NeuralSdfConfig cfg_;
    std::vector<Dense> hidden_;
    Dense out_;
};

class SdfField {
public:
    SdfField() = default;
    SdfField(AnalyticSdf a) : impl_(std::move(a)) {}
    SdfField(NeuralSdf n) : impl_(std::move(n)) {}

    bool is_analytic() const { return std::holds_alternative<AnalyticSdf>(impl_); }
    const AnalyticSdf& analytic() const { return std::get<AnalyticSdf>(impl_); }
    const NeuralSdf& neural() const { return std::get<NeuralSdf>(impl_); }

    /// Values and (optionally) gradients at each row of `points`.
    NeuralSdf::Output evaluate(Tape& tape, const ParamStore& params, const Matrix& points, bool with_grad) const;

private:
    std::variant<AnalyticSdf, NeuralSdf> impl_;
};

double sdf_eval(const SdfField& field, const ParamStore& params, const Vec3& p);
Vec3 sdf_grad(const SdfField& field, const ParamStore& params, const Vec3& p);

/// max(0, s (Phi_s(f) - 1) grad_dot_d) with Phi_s(x) = 1 / (1 + exp(-s x)).
double opaque_density(double f_val, double grad_dot_d, double s);

/// Tape form of opaque_density on column vectors; `s` is a 1 x 1 node.
Var opaque_density(Tape& tape, Var f, Var grad_dot_d, Var s);

}  // namespace hazerf
