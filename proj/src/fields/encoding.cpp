#include "hazerf/fields/encoding.hpp"

#include <cmath>

namespace hazerf {

Matrix positional_encoding(const Matrix& points, int frequencies)
{
    Matrix out(points.rows(), encoded_width(frequencies));
    for (Eigen::Index r = 0; r < points.rows(); ++r) {
        for (int j = 0; j < 3; ++j)
            out(r, j) = points(r, j);
        double f = 1.0;
        for (int k = 0; k < frequencies; ++k, f *= 2.0) {
            for (int j = 0; j < 3; ++j) {
                out(r, 3 + 6 * k + j) = std::sin(f * points(r, j));
                out(r, 6 + 6 * k + j) = std::cos(f * points(r, j));
            }
        }
    }
    return out;
}

Matrix positional_encoding_tangent(const Matrix& points, int frequencies, int axis)
{
    Matrix out = Matrix::Zero(points.rows(), encoded_width(frequencies));
    for (Eigen::Index r = 0; r < points.rows(); ++r) {
        out(r, axis) = 1.0;
        double f = 1.0;
        for (int k = 0; k < frequencies; ++k, f *= 2.0) {
            out(r, 3 + 6 * k + axis) = f * std::cos(f * points(r, axis));
            out(r, 6 + 6 * k + axis) = -f * std::sin(f * points(r, axis));
        }
    }
    return out;
}

}  // namespace hazerf
