#pragma once

#include <Eigen/Core>

namespace hazerf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Rgb = Eigen::Vector3d;

}  // namespace hazerf
