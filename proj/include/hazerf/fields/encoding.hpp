#pragma once

#include "hazerf/diffcore/tape.hpp"

namespace hazerf {

/// [x, sin(2^k x), cos(2^k x)] for k < frequencies, applied to each row of
/// `points` (B x 3). Output is B x (3 + 6 * frequencies); block k holds the
/// three sines followed by the three cosines.
Matrix positional_encoding(const Matrix& points, int frequencies);

/// Derivative of positional_encoding with respect to coordinate `axis`.
Matrix positional_encoding_tangent(const Matrix& points, int frequencies, int axis);

inline int encoded_width(int frequencies) { return 3 + 6 * frequencies; }

}  // namespace hazerf
