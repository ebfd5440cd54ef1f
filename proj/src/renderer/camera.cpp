#include "hazerf/renderer/camera.hpp"

#include "hazerf/error.hpp"

#include <Eigen/Geometry>
#include <cmath>

namespace hazerf {

void validate_camera(const Camera& cam)
{
    if (!(cam.fx > 0.0) || !(cam.fy > 0.0))
        throw Error("camera: focal lengths must be positive");
    if (cam.width < 1 || cam.height < 1)
        throw Error("camera: image size must be positive");
    const Mat3& r = cam.rotation;
    if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 || std::abs(r.determinant() - 1.0) > 1e-9)
        throw Error("camera: rotation must be orthonormal with determinant 1");
    if (!(cam.t_near > 0.0 && cam.t_near < cam.t_far))
        throw Error("camera: need 0 < t_near < t_far");
}

Ray camera_ray(const Camera& cam, double u, double v)
{
    const Vec3 d_cam((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
    Ray r;
    r.origin = cam.translation;
    r.direction = (cam.rotation * d_cam).normalized();
    r.t_near = cam.t_near;
    r.t_far = cam.t_far;
    return r;
}

Ray pixel_ray(const Camera& cam, int x, int y) { return camera_ray(cam, x + 0.5, y + 0.5); }

Eigen::Vector2d project(const Camera& cam, const Vec3& world, double* z)
{
    const Vec3 p = cam.rotation.transpose() * (world - cam.translation);
    if (z)
        *z = p.z();
    return {cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy};
}

Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx, double fy, double cx, double cy,
               int width, int height)
{
    const Vec3 forward = (target - eye).normalized();
    Vec3 right = forward.cross(up);
    if (right.norm() < 1e-9)
        right = forward.cross(std::abs(forward.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY());
    right.normalize();
    const Vec3 down = forward.cross(right);
    Camera c;
    c.rotation.col(0) = right;
    c.rotation.col(1) = down;
    c.rotation.col(2) = forward;
    c.translation = eye;
    c.fx = fx;
    c.fy = fy;
    c.cx = cx;
    c.cy = cy;
    c.width = width;
    c.height = height;
    return c;
}

}  // namespace hazerf
