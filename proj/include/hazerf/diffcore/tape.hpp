#pragma once

#include "hazerf/diffcore/param_store.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

namespace hazerf {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Handle to a node on a Tape.
struct Var {
    std::int32_t id = -1;
    bool valid() const { return id >= 0; }
};

/// Append-only record of matrix-valued primitive operations. Forward values
/// are computed eagerly; `backward` replays the record in reverse and
/// accumulates parameter adjoints.
///
/// Shapes follow a rows-are-batch convention. The broadcasting forms are
/// explicit (add_row, mul_col, mul_scalar, outer, mul_rowtile); there is no
/// implicit broadcasting.
class Tape {
public:
    enum class Op : std::uint8_t {
        Constant, Param,
        Add, Sub, Mul, RatioOrZero,
        Scale, AddScalar,
        Exp, Log, Sigmoid, Softplus, Clamp, Sin, Cos, Abs, Square, Sqrt,
        AddRow, MulCol, MulScalar, Outer, MulRowTile,
        MatMul, Reshape, Transpose, ConcatCols, SliceCols,
        Sum, RowSum, RowMin, WindowMin, ExclusiveCumprod, SampleWeightedSum,
    };

    Tape() = default;

    Var constant(Matrix value);
    Var scalar(double value);
    Var param(const ParamStore& params, std::size_t index);
    Var param(const ParamStore& params, std::string_view name);

    const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
    double scalar_value(Var v) const;
    std::size_t size() const { return nodes_.size(); }
    Op op(Var v) const { return nodes_.at(v.id).op; }

    // elementwise, equal shapes
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    /// a / b, defined as 0 (with zero gradient) where b == 0.
    Var ratio_or_zero(Var a, Var b);

    Var scale(Var a, double c);
    Var add_scalar(Var a, double c);
    Var exp(Var a);
    Var log(Var a);
    Var sigmoid(Var a);
    /// log(1 + exp(beta x)) / beta
    Var softplus(Var a, double beta = 1.0);
    /// Subgradient 1 on [lo, hi] (boundary included), 0 outside.
    Var clamp(Var a, double lo, double hi);
    Var relu(Var a) { return clamp(a, 0.0, std::numeric_limits<double>::infinity()); }
    Var sin(Var a);
    Var cos(Var a);
    Var abs(Var a);
    Var square(Var a);
    Var sqrt(Var a);

    // broadcasting forms
    Var add_row(Var a, Var row);      // (B x n) + (1 x n)
    Var mul_col(Var a, Var col);      // (B x n) * (B x 1)
    Var mul_scalar(Var a, Var s);     // (B x n) * (1 x 1)
    Var outer(Var col, Var row);      // (B x 1) * (1 x n) -> B x n
    Var mul_rowtile(Var a, Var s);    // (kB x n) * tile_k(B x n)

    Var matmul(Var a, Var b);
    Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);
    Var transpose(Var a);
    Var concat_cols(Var a, Var b);
    Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);

    // reductions
    Var sum(Var a);                   // -> 1 x 1
    Var mean(Var a);
    Var row_sum(Var a);               // -> B x 1
    Var row_mean(Var a);
    /// Row-wise minimum; the adjoint is routed to the argmin (lowest index on ties).
    Var row_min(Var a);
    /// Input is a column of `patches` stacked row-major (height x width)
    /// images. Each output pixel is the minimum over a (window x window)
    /// neighbourhood clamped at the patch border.
    Var window_min(Var a, int height, int width, int window);
    /// (B x N) -> B x (N+1) with column n holding prod_{m<n} a[:, m].
    Var exclusive_cumprod(Var a);
    /// w (B x N), c (B*N x k) -> B x k with row b = sum_n w[b,n] c[b*N+n, :].
    Var sample_weighted_sum(Var w, Var c);

    /// Flat input indices the adjoint of a RowMin/WindowMin node is routed to.
    const std::vector<std::int64_t>& argmins(Var v) const { return nodes_.at(v.id).argmin; }

    void backward(Var out, const Matrix& adjoint, ParamStore& params);
    void backward(Var out, const Matrix& adjoint, GradientBuffer& grads);

    /// Output registered by the `forward` driver below.
    void set_output(Var v) { output_ = v; }
    Var output() const { return output_; }

private:
    struct Node {
        Op op = Op::Constant;
        std::int32_t a = -1;
        std::int32_t b = -1;
        double c0 = 0.0;
        double c1 = 0.0;
        int i0 = 0;
        int i1 = 0;
        int i2 = 0;
        std::size_t param = 0;
        bool grad = false;  // depends on a parameter
        Matrix value;
        std::vector<std::int64_t> argmin;
    };

    Var push(Node n);
    const Matrix& val(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    void check_same_shape(Var a, Var b, const char* what) const;
    void run_backward(Var out, const Matrix& adjoint, std::size_t n_params,
                      const std::function<std::span<double>(std::size_t)>& grad_of);

    std::vector<Node> nodes_;
    Var output_;
};

/// A computation description: builds a graph on the tape from a (1 x arity)
/// input row and returns the output node.
struct Program {
    std::size_t arity = 0;
    std::function<Var(Tape&, const ParamStore&, Var input)> build;
};

/// Runs `program` on `input`, records it on `tape` and returns the flattened output.
std::vector<double> forward(Tape& tape, const ParamStore& params, const Program& program,
                            std::span<const double> input);

/// Propagates `output_adjoint` through the last `forward` on this tape and
/// adds the result to the gradients in `params`.
void backward(Tape& tape, ParamStore& params, std::span<const double> output_adjoint);

}  // namespace hazerf
