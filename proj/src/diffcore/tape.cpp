#include "hazerf/diffcore/tape.hpp"

#include "hazerf/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hazerf {

namespace {

std::string shape_str(const Matrix& m)
{
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

double softplus_value(double x, double beta)
{
    const double z = beta * x;
    // log1p(exp(z)) without overflow
    return (z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z))) / beta;
}

double sigmoid_value(double x)
{
    if (x >= 0.0)
        return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Var Tape::push(Node n)
{
    n.grad = n.op == Op::Param || (n.a >= 0 && nodes_[static_cast<std::size_t>(n.a)].grad) ||
             (n.b >= 0 && nodes_[static_cast<std::size_t>(n.b)].grad);
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

void Tape::check_same_shape(Var a, Var b, const char* what) const
{
    const Matrix& x = value(a);
    const Matrix& y = value(b);
    if (x.rows() != y.rows() || x.cols() != y.cols())
        throw Error(std::string(what) + ": shape mismatch " + shape_str(x) + " vs " + shape_str(y));
}

double Tape::scalar_value(Var v) const
{
    const Matrix& m = value(v);
    if (m.size() != 1)
        throw Error("scalar_value on a " + shape_str(m) + " node");
    return m(0, 0);
}

Var Tape::constant(Matrix value)
{
    Node n;
    n.op = Op::Constant;
    n.value = std::move(value);
    return push(std::move(n));
}

Var Tape::scalar(double value)
{
    Matrix m(1, 1);
    m(0, 0) = value;
    return constant(std::move(m));
}

Var Tape::param(const ParamStore& params, std::size_t index)
{
    const auto& e = params.at(index);
    Node n;
    n.op = Op::Param;
    n.param = index;
    n.value = Eigen::Map<const Matrix>(e.values.data(), static_cast<Eigen::Index>(e.rows()),
                                       static_cast<Eigen::Index>(e.cols()));
    return push(std::move(n));
}

Var Tape::param(const ParamStore& params, std::string_view name)
{
    return param(params, params.index_of(name));
}

Var Tape::add(Var a, Var b)
{
    check_same_shape(a, b, "add");
    Node n{.op = Op::Add, .a = a.id, .b = b.id};
    n.value = val(a.id) + val(b.id);
    return push(std::move(n));
}

Var Tape::sub(Var a, Var b)
{
    check_same_shape(a, b, "sub");
    Node n{.op = Op::Sub, .a = a.id, .b = b.id};
    n.value = val(a.id) - val(b.id);
    return push(std::move(n));
}

Var Tape::mul(Var a, Var b)
{
    check_same_shape(a, b, "mul");
    Node n{.op = Op::Mul, .a = a.id, .b = b.id};
    n.value = val(a.id).cwiseProduct(val(b.id));
    return push(std::move(n));
}

Var Tape::ratio_or_zero(Var a, Var b)
{
    check_same_shape(a, b, "ratio_or_zero");
    Node n{.op = Op::RatioOrZero, .a = a.id, .b = b.id};
    const Matrix& x = val(a.id);
    const Matrix& y = val(b.id);
    n.value.resize(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i)
        n.value.data()[i] = y.data()[i] == 0.0 ? 0.0 : x.data()[i] / y.data()[i];
    return push(std::move(n));
}

Var Tape::scale(Var a, double c)
{
    Node n{.op = Op::Scale, .a = a.id, .c0 = c};
    n.value = val(a.id) * c;
    return push(std::move(n));
}

Var Tape::add_scalar(Var a, double c)
{
    Node n{.op = Op::AddScalar, .a = a.id, .c0 = c};
    n.value = val(a.id).array() + c;
    return push(std::move(n));
}

Var Tape::exp(Var a)
{
    Node n{.op = Op::Exp, .a = a.id};
    n.value = val(a.id).array().exp();
    return push(std::move(n));
}

Var Tape::log(Var a)
{
    Node n{.op = Op::Log, .a = a.id};
    n.value = val(a.id).array().log();
    return push(std::move(n));
}

Var Tape::sigmoid(Var a)
{
    Node n{.op = Op::Sigmoid, .a = a.id};
    n.value = val(a.id).unaryExpr([](double x) { return sigmoid_value(x); });
    return push(std::move(n));
}

Var Tape::softplus(Var a, double beta)
{
    if (!(beta > 0.0))
        throw Error("softplus: beta must be positive");
    Node n{.op = Op::Softplus, .a = a.id, .c0 = beta};
    n.value = val(a.id).unaryExpr([beta](double x) { return softplus_value(x, beta); });
    return push(std::move(n));
}

Var Tape::clamp(Var a, double lo, double hi)
{
    if (lo > hi)
        throw Error("clamp: empty interval");
    Node n{.op = Op::Clamp, .a = a.id, .c0 = lo, .c1 = hi};
    n.value = val(a.id).cwiseMax(lo).cwiseMin(hi);
    return push(std::move(n));
}

Var Tape::sin(Var a)
{
    Node n{.op = Op::Sin, .a = a.id};
    n.value = val(a.id).array().sin();
    return push(std::move(n));
}

Var Tape::cos(Var a)
{
    Node n{.op = Op::Cos, .a = a.id};
    n.value = val(a.id).array().cos();
    return push(std::move(n));
}

Var Tape::abs(Var a)
{
    Node n{.op = Op::Abs, .a = a.id};
    n.value = val(a.id).cwiseAbs();
    return push(std::move(n));
}

Var Tape::square(Var a)
{
    Node n{.op = Op::Square, .a = a.id};
    n.value = val(a.id).array().square();
    return push(std::move(n));
}

Var Tape::sqrt(Var a)
{
    Node n{.op = Op::Sqrt, .a = a.id};
    n.value = val(a.id).array().sqrt();
    return push(std::move(n));
}

Var Tape::add_row(Var a, Var row)
{
    const Matrix& x = val(a.id);
    const Matrix& r = val(row.id);
    if (r.rows() != 1 || r.cols() != x.cols())
        throw Error("add_row: shape mismatch " + shape_str(x) + " + " + shape_str(r));
    Node n{.op = Op::AddRow, .a = a.id, .b = row.id};
    n.value = x.rowwise() + r.row(0);
    return push(std::move(n));
}

Var Tape::mul_col(Var a, Var col)
{
    const Matrix& x = val(a.id);
    const Matrix& c = val(col.id);
    if (c.cols() != 1 || c.rows() != x.rows())
        throw Error("mul_col: shape mismatch " + shape_str(x) + " * " + shape_str(c));
    Node n{.op = Op::MulCol, .a = a.id, .b = col.id};
    n.value = x.array().colwise() * c.col(0).array();
    return push(std::move(n));
}

Var Tape::mul_scalar(Var a, Var s)
{
    const Matrix& sv = val(s.id);
    if (sv.size() != 1)
        throw Error("mul_scalar: scale is " + shape_str(sv));
    Node n{.op = Op::MulScalar, .a = a.id, .b = s.id};
    n.value = val(a.id) * sv(0, 0);
    return push(std::move(n));
}

Var Tape::outer(Var col, Var row)
{
    const Matrix& c = val(col.id);
    const Matrix& r = val(row.id);
    if (c.cols() != 1 || r.rows() != 1)
        throw Error("outer: shape mismatch " + shape_str(c) + " x " + shape_str(r));
    Node n{.op = Op::Outer, .a = col.id, .b = row.id};
    n.value = c * r;
    return push(std::move(n));
}

Var Tape::mul_rowtile(Var a, Var s)
{
    const Matrix& x = val(a.id);
    const Matrix& t = val(s.id);
    if (t.cols() != x.cols() || t.rows() == 0 || x.rows() % t.rows() != 0)
        throw Error("mul_rowtile: shape mismatch " + shape_str(x) + " * " + shape_str(t));
    Node n{.op = Op::MulRowTile, .a = a.id, .b = s.id};
    n.value.resize(x.rows(), x.cols());
    const Eigen::Index blocks = x.rows() / t.rows();
    for (Eigen::Index k = 0; k < blocks; ++k)
        n.value.middleRows(k * t.rows(), t.rows()) = x.middleRows(k * t.rows(), t.rows()).cwiseProduct(t);
    return push(std::move(n));
}

Var Tape::matmul(Var a, Var b)
{
    const Matrix& x = val(a.id);
    const Matrix& y = val(b.id);
    if (x.cols() != y.rows())
        throw Error("matmul: shape mismatch " + shape_str(x) + " . " + shape_str(y));
    Node n{.op = Op::MatMul, .a = a.id, .b = b.id};
    n.value.resize(x.rows(), y.cols());
    n.value.noalias() = x * y;
    return push(std::move(n));
}

Var Tape::reshape(Var a, Eigen::Index rows, Eigen::Index cols)
{
    const Matrix& x = val(a.id);
    if (rows * cols != x.size())
        throw Error("reshape: cannot view " + shape_str(x) + " as " + std::to_string(rows) + "x" +
                    std::to_string(cols));
    Node n{.op = Op::Reshape, .a = a.id};
    n.value = Eigen::Map<const Matrix>(x.data(), rows, cols);
    return push(std::move(n));
}

Var Tape::transpose(Var a)
{
    Node n{.op = Op::Transpose, .a = a.id};
    n.value = val(a.id).transpose();
    return push(std::move(n));
}

Var Tape::concat_cols(Var a, Var b)
{
    const Matrix& x = val(a.id);
    const Matrix& y = val(b.id);
    if (x.rows() != y.rows())
        throw Error("concat_cols: shape mismatch " + shape_str(x) + " | " + shape_str(y));
    Node n{.op = Op::ConcatCols, .a = a.id, .b = b.id};
    n.value.resize(x.rows(), x.cols() + y.cols());
    n.value.leftCols(x.cols()) = x;
    n.value.rightCols(y.cols()) = y;
    return push(std::move(n));
}

Var Tape::slice_cols(Var a, Eigen::Index start, Eigen::Index count)
{
    const Matrix& x = val(a.id);
    if (start < 0 || count < 0 || start + count > x.cols())
        throw Error("slice_cols: range out of bounds for " + shape_str(x));
    Node n{.op = Op::SliceCols, .a = a.id, .i0 = static_cast<int>(start), .i1 = static_cast<int>(count)};
    n.value = x.middleCols(start, count);
    return push(std::move(n));
}

Var Tape::sum(Var a)
{
    Node n{.op = Op::Sum, .a = a.id};
    n.value.resize(1, 1);
    n.value(0, 0) = val(a.id).sum();
    return push(std::move(n));
}

Var Tape::mean(Var a)
{
    const auto count = val(a.id).size();
    if (count == 0)
        throw Error("mean of an empty node");
    return scale(sum(a), 1.0 / static_cast<double>(count));
}

Var Tape::row_sum(Var a)
{
    Node n{.op = Op::RowSum, .a = a.id};
    n.value = val(a.id).rowwise().sum();
    return push(std::move(n));
}

Var Tape::row_mean(Var a)
{
    const auto cols = val(a.id).cols();
    if (cols == 0)
        throw Error("row_mean of an empty node");
    return scale(row_sum(a), 1.0 / static_cast<double>(cols));
}

Var Tape::row_min(Var a)
{
    const Matrix& x = val(a.id);
    if (x.cols() == 0)
        throw Error("row_min of an empty row");
    Node n{.op = Op::RowMin, .a = a.id};
    n.value.resize(x.rows(), 1);
    n.argmin.resize(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < x.cols(); ++c)
            if (x(r, c) < x(r, best))
                best = c;
        n.value(r, 0) = x(r, best);
        n.argmin[static_cast<std::size_t>(r)] = r * x.cols() + best;
    }
    return push(std::move(n));
}

Var Tape::window_min(Var a, int height, int width, int window)
{
    const Matrix& x = val(a.id);
    if (window <= 0 || window % 2 == 0)
        throw Error("window_min: window must be odd and positive");
    if (height <= 0 || width <= 0 || x.cols() != 1 || x.rows() % (static_cast<Eigen::Index>(height) * width) != 0)
        throw Error("window_min: input " + shape_str(x) + " is not a stack of " + std::to_string(height) + "x" +
                    std::to_string(width) + " patches");
    if (window > std::min(height, width))
        throw Error("window_min: window larger than the patch");
    Node n{.op = Op::WindowMin, .a = a.id, .i0 = height, .i1 = width, .i2 = window};
    const Eigen::Index patch = static_cast<Eigen::Index>(height) * width;
    const Eigen::Index patches = x.rows() / patch;
    const int half = window / 2;
    n.value.resize(x.rows(), 1);
    n.argmin.resize(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index p = 0; p < patches; ++p) {
        const Eigen::Index base = p * patch;
        for (int y = 0; y < height; ++y) {
            for (int xx = 0; xx < width; ++xx) {
                Eigen::Index best = -1;
                for (int yy = std::max(0, y - half); yy <= std::min(height - 1, y + half); ++yy)
                    for (int xw = std::max(0, xx - half); xw <= std::min(width - 1, xx + half); ++xw) {
                        const Eigen::Index idx = base + static_cast<Eigen::Index>(yy) * width + xw;
                        if (best < 0 || x(idx, 0) < x(best, 0))
                            best = idx;
                    }
                const Eigen::Index out = base + static_cast<Eigen::Index>(y) * width + xx;
                n.value(out, 0) = x(best, 0);
                n.argmin[static_cast<std::size_t>(out)] = best;
            }
        }
    }
    return push(std::move(n));
}

Var Tape::exclusive_cumprod(Var a)
{
    const Matrix& x = val(a.id);
    Node n{.op = Op::ExclusiveCumprod, .a = a.id};
    n.value.resize(x.rows(), x.cols() + 1);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        double p = 1.0;
        n.value(r, 0) = p;
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            p *= x(r, c);
            n.value(r, c + 1) = p;
        }
    }
    return push(std::move(n));
}

Var Tape::sample_weighted_sum(Var w, Var c)
{
    const Matrix& wv = val(w.id);
    const Matrix& cv = val(c.id);
    if (cv.rows() != wv.rows() * wv.cols())
        throw Error("sample_weighted_sum: weights " + shape_str(wv) + " do not match samples " + shape_str(cv));
    Node n{.op = Op::SampleWeightedSum, .a = w.id, .b = c.id};
    n.value = Matrix::Zero(wv.rows(), cv.cols());
    const Eigen::Index N = wv.cols();
    for (Eigen::Index b = 0; b < wv.rows(); ++b)
        for (Eigen::Index s = 0; s < N; ++s)
            n.value.row(b) += wv(b, s) * cv.row(b * N + s);
    return push(std::move(n));
}

void Tape::backward(Var out, const Matrix& adjoint, ParamStore& params)
{
    run_backward(out, adjoint, params.size(),
                 [&params](std::size_t i) { return std::span<double>(params.at(i).grad); });
}

void Tape::backward(Var out, const Matrix& adjoint, GradientBuffer& grads)
{
    run_backward(out, adjoint, grads.size(), [&grads](std::size_t i) { return grads[i]; });
}

void Tape::run_backward(Var out, const Matrix& adjoint, std::size_t n_params,
                        const std::function<std::span<double>(std::size_t)>& grad_of)
{
    if (!out.valid() || static_cast<std::size_t>(out.id) >= nodes_.size())
        throw Error("backward: invalid output node");
    const Matrix& ov = val(out.id);
    if (adjoint.rows() != ov.rows() || adjoint.cols() != ov.cols())
        throw Error("backward: adjoint " + shape_str(adjoint) + " does not match output " + shape_str(ov));

    std::vector<Matrix> adj(static_cast<std::size_t>(out.id) + 1);
    adj[static_cast<std::size_t>(out.id)] = adjoint;

    auto acc = [&](std::int32_t id) -> Matrix& {
        Matrix& m = adj[static_cast<std::size_t>(id)];
        if (m.size() == 0) {
            const Matrix& v = val(id);
            m = Matrix::Zero(v.rows(), v.cols());
        }
        return m;
    };
    // Adds `expr` to the adjoint of `id`; the first contribution is assigned
    // rather than added to a zero matrix. Nodes without gradient are skipped.
    auto add_to = [&](std::int32_t id, const auto& expr) {
        if (!nodes_[static_cast<std::size_t>(id)].grad)
            return;
        Matrix& m = adj[static_cast<std::size_t>(id)];
        if (m.size() == 0)
            m = expr;
        else
            m += expr;
    };

    for (std::int32_t id = out.id; id >= 0; --id) {
        Matrix& g = adj[static_cast<std::size_t>(id)];
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        if (g.size() == 0 || !n.grad)
            continue;
        const bool ga_on = n.a >= 0 && nodes_[static_cast<std::size_t>(n.a)].grad;
        const bool gb_on = n.b >= 0 && nodes_[static_cast<std::size_t>(n.b)].grad;
        switch (n.op) {
        case Op::Constant:
            break;
        case Op::Param: {
            if (n.param >= n_params)
                throw Error("backward: parameter index out of range for gradient sink");
            auto dst = grad_of(n.param);
            if (dst.size() != static_cast<std::size_t>(g.size()))
                throw Error("backward: gradient sink shape mismatch");
            for (Eigen::Index i = 0; i < g.size(); ++i)
                dst[static_cast<std::size_t>(i)] += g.data()[i];
            break;
        }
        case Op::Add:
            add_to(n.a, g);
            add_to(n.b, g);
            break;
        case Op::Sub:
            add_to(n.a, g);
            add_to(n.b, -g);
            break;
        case Op::Mul:
            add_to(n.a, g.cwiseProduct(val(n.b)));
            add_to(n.b, g.cwiseProduct(val(n.a)));
            break;
        case Op::RatioOrZero: {
            const Matrix& x = val(n.a);
            const Matrix& y = val(n.b);
            Matrix dummy = Matrix::Zero(g.rows(), g.cols());
            Matrix& ga = ga_on ? acc(n.a) : dummy;
            Matrix& gb = gb_on ? acc(n.b) : dummy;
            for (Eigen::Index i = 0; i < g.size(); ++i) {
                const double d = y.data()[i];
                if (d == 0.0)
                    continue;
                if (ga_on)
                    ga.data()[i] += g.data()[i] / d;
                if (gb_on)
                    gb.data()[i] -= g.data()[i] * x.data()[i] / (d * d);
            }
            break;
        }
        case Op::Scale:
            add_to(n.a, g * n.c0);
            break;
        case Op::AddScalar:
            add_to(n.a, g);
            break;
        case Op::Exp:
            add_to(n.a, g.cwiseProduct(n.value));
            break;
        case Op::Log:
            add_to(n.a, (g.array() / val(n.a).array()).matrix());
            break;
        case Op::Sigmoid:
            add_to(n.a, (g.array() * n.value.array() * (1.0 - n.value.array())).matrix());
            break;
        case Op::Softplus: {
            const double beta = n.c0;
            add_to(n.a, (g.array() * val(n.a).unaryExpr([beta](double x) { return sigmoid_value(beta * x); }).array())
                            .matrix());
            break;
        }
        case Op::Clamp: {
            const Matrix& x = val(n.a);
            Matrix& ga = acc(n.a);
            for (Eigen::Index i = 0; i < g.size(); ++i) {
                const double v = x.data()[i];
                if (v >= n.c0 && v <= n.c1)
                    ga.data()[i] += g.data()[i];
            }
            break;
        }
        case Op::Sin:
            add_to(n.a, (g.array() * val(n.a).array().cos()).matrix());
            break;
        case Op::Cos:
            add_to(n.a, (-g.array() * val(n.a).array().sin()).matrix());
            break;
        case Op::Abs: {
            const Matrix& x = val(n.a);
            Matrix& ga = acc(n.a);
            for (Eigen::Index i = 0; i < g.size(); ++i) {
                const double v = x.data()[i];
                ga.data()[i] += v > 0.0 ? g.data()[i] : (v < 0.0 ? -g.data()[i] : 0.0);
            }
            break;
        }
        case Op::Square:
            add_to(n.a, (2.0 * g.array() * val(n.a).array()).matrix());
            break;
        case Op::Sqrt: {
            Matrix& ga = acc(n.a);
            for (Eigen::Index i = 0; i < g.size(); ++i) {
                const double y = n.value.data()[i];
                if (y > 0.0)
                    ga.data()[i] += 0.5 * g.data()[i] / y;
            }
            break;
        }
        case Op::AddRow:
            add_to(n.a, g);
            add_to(n.b, g.colwise().sum());
            break;
        case Op::MulCol:
            add_to(n.a, (g.array().colwise() * val(n.b).col(0).array()).matrix());
            add_to(n.b, g.cwiseProduct(val(n.a)).rowwise().sum());
            break;
        case Op::MulScalar:
            if (ga_on)
                add_to(n.a, g * val(n.b)(0, 0));
            if (gb_on)
                acc(n.b)(0, 0) += g.cwiseProduct(val(n.a)).sum();
            break;
        case Op::Outer:
            if (ga_on)
                acc(n.a).noalias() += g * val(n.b).transpose();
            if (gb_on)
                acc(n.b).noalias() += val(n.a).transpose() * g;
            break;
        case Op::MulRowTile: {
            const Matrix& x = val(n.a);
            const Matrix& t = val(n.b);
            Matrix dummy;
            Matrix& ga = ga_on ? acc(n.a) : dummy;
            Matrix& gt = gb_on ? acc(n.b) : dummy;
            const Eigen::Index rows = t.rows();
            for (Eigen::Index k = 0; k < x.rows() / rows; ++k) {
                if (ga_on)
                    ga.middleRows(k * rows, rows) += g.middleRows(k * rows, rows).cwiseProduct(t);
                if (gb_on)
                    gt += g.middleRows(k * rows, rows).cwiseProduct(x.middleRows(k * rows, rows));
            }
            break;
        }
        case Op::MatMul: {
            auto gemm = [&](std::int32_t id, const auto& prod) {
                Matrix& m = adj[static_cast<std::size_t>(id)];
                if (m.size() == 0)
                    m.noalias() = prod;
                else
                    m.noalias() += prod;
            };
            if (ga_on)
                gemm(n.a, g * val(n.b).transpose());
            if (gb_on)
                gemm(n.b, val(n.a).transpose() * g);
            break;
        }
        case Op::Reshape: {
            Matrix& ga = acc(n.a);
            Eigen::Map<Matrix>(ga.data(), g.rows(), g.cols()) += g;
            break;
        }
        case Op::Transpose:
            add_to(n.a, g.transpose());
            break;
        case Op::ConcatCols: {
            const Eigen::Index left = val(n.a).cols();
            add_to(n.a, g.leftCols(left));
            add_to(n.b, g.rightCols(g.cols() - left));
            break;
        }
        case Op::SliceCols:
            acc(n.a).middleCols(n.i0, n.i1) += g;
            break;
        case Op::Sum:
            acc(n.a).array() += g(0, 0);
            break;
        case Op::RowSum:
            acc(n.a).colwise() += g.col(0);
            break;
        case Op::RowMin:
        case Op::WindowMin: {
            Matrix& ga = acc(n.a);
            for (std::size_t i = 0; i < n.argmin.size(); ++i)
                ga.data()[n.argmin[i]] += g.data()[i];
            break;
        }
        case Op::ExclusiveCumprod: {
            const Matrix& x = val(n.a);
            Matrix& ga = acc(n.a);
            const Eigen::Index N = x.cols();
            for (Eigen::Index r = 0; r < x.rows(); ++r) {
                // d out[k] / d x[m] = prod_{j<k, j!=m} x[j] for k > m
                double suffix = 0.0;
                for (Eigen::Index m = N - 1; m >= 0; --m) {
                    suffix = g(r, m + 1) + (m + 1 < N ? x(r, m + 1) * suffix : 0.0);
                    ga(r, m) += n.value(r, m) * suffix;
                }
            }
            break;
        }
        case Op::SampleWeightedSum: {
            const Matrix& w = val(n.a);
            const Matrix& c = val(n.b);
            const Eigen::Index N = w.cols();
            if (ga_on) {
                Matrix& gw = acc(n.a);
                for (Eigen::Index b = 0; b < w.rows(); ++b)
                    for (Eigen::Index s = 0; s < N; ++s)
                        gw(b, s) += g.row(b).dot(c.row(b * N + s));
            }
            if (gb_on) {
                Matrix& gc = acc(n.b);
                for (Eigen::Index b = 0; b < w.rows(); ++b)
                    for (Eigen::Index s = 0; s < N; ++s)
                        gc.row(b * N + s) += w(b, s) * g.row(b);
            }
            break;
        }
        }
        g.resize(0, 0);
    }
}

std::vector<double> forward(Tape& tape, const ParamStore& params, const Program& program,
                            std::span<const double> input)
{
    if (!program.build)
        throw Error("forward: empty program");
    if (input.size() != program.arity)
        throw Error("forward: input length " + std::to_string(input.size()) + " does not match program arity " +
                    std::to_string(program.arity));
    Matrix in(1, static_cast<Eigen::Index>(input.size()));
    for (std::size_t i = 0; i < input.size(); ++i)
        in(0, static_cast<Eigen::Index>(i)) = input[i];
    const Var x = tape.constant(std::move(in));
    const Var y = program.build(tape, params, x);
    tape.set_output(y);
    const Matrix& v = tape.value(y);
    return {v.data(), v.data() + v.size()};
}

void backward(Tape& tape, ParamStore& params, std::span<const double> output_adjoint)
{
    const Var out = tape.output();
    if (!out.valid())
        throw Error("backward: forward has not been run on this tape");
    const Matrix& v = tape.value(out);
    if (output_adjoint.size() != static_cast<std::size_t>(v.size()))
        throw Error("backward: adjoint length " + std::to_string(output_adjoint.size()) +
                    " does not match output length " + std::to_string(v.size()));
    Matrix adj = Eigen::Map<const Matrix>(output_adjoint.data(), v.rows(), v.cols());
    tape.backward(out, adj, params);
}

}  // namespace hazerf
