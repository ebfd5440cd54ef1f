#pragma once

#include "hazerf/renderer/ray.hpp"

#include <Eigen/Core>

namespace hazerf {

/// Pinhole camera in the x-right, y-down, z-forward convention. `rotation`
/// and `translation` map camera coordinates to world coordinates.
struct Camera {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.5;
    double cy = 0.5;
    int width = 1;
    int height = 1;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    double t_near = 1e-4;
    double t_far = 4.0;

    Vec3 center() const { return translation; }
    Vec3 forward() const { return rotation.col(2); }
};

/// Throws on non-positive focal lengths or image size, a non-rotation
/// matrix, or invalid near/far bounds.
void validate_camera(const Camera& cam);

/// Ray through continuous pixel coordinates (u, v); pixel (x, y) has its
/// centre at (x + 0.5, y + 0.5).
Ray camera_ray(const Camera& cam, double u, double v);
Ray pixel_ray(const Camera& cam, int x, int y);

/// Continuous pixel coordinates of a world point, and its camera-space z.
Eigen::Vector2d project(const Camera& cam, const Vec3& world, double* z = nullptr);

/// Camera at `eye` looking at `target`; `up` fixes the roll.
Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx, double fy, double cx, double cy,
               int width, int height);

}  // namespace hazerf
