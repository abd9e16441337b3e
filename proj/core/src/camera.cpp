// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#include "solidsplat/camera.hpp"

#include <Eigen/Geometry>

#include <cmath>

namespace solidsplat {

Ray make_ray(const Vec3 &origin, const Vec3 &direction) {
    const double n = direction.norm();
    if (!(n > 0.0) || !std::isfinite(n) || !origin.allFinite()) {
        throw ValidationError("ray direction must be non-zero and finite");
    }
    return Ray{origin, direction / n};
}

Vec3 Camera::camera_direction(double u, double v) const {
    const Vec3 d((u - cx()) / fx() - intrinsics(0, 1) * (v - cy()) / (fx() * fy()),
                 (v - cy()) / fy(), 1.0);
    return d.normalized();
}

Ray Camera::pixel_ray(double u, double v) const {
    Ray ray;
    ray.origin = center();
    ray.direction = (rotation.transpose() * camera_direction(u, v)).normalized();
    return ray;
}

std::optional<Vec2> Camera::project(const Vec3 &world) const {
    const Vec3 pc = to_camera(world);
    if (!(pc.z() > 1e-12)) return std::nullopt;
    const Vec3 h = intrinsics * pc;
    return Vec2(h.x() / h.z(), h.y() / h.z());
}

Mat3 make_intrinsics(double fx, double fy, double cx, double cy) {
    Mat3 k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
}

Camera make_camera(double fx, double fy, double cx, double cy, const Mat3 &rotation,
                   const Vec3 &translation, int width, int height) {
    Camera cam;
    cam.intrinsics = make_intrinsics(fx, fy, cx, cy);
    cam.rotation = rotation;
    cam.translation = translation;
    cam.width = width;
    cam.height = height;
    validate(cam);
    return cam;
}

Camera look_at_camera(const Vec3 &eye, const Vec3 &target, const Vec3 &up, double fx, double fy,
                      int width, int height) {
    const Vec3 z = (target - eye).normalized();
    Vec3 x = z.cross(up);
    if (x.norm() < 1e-12) throw ValidationError("look_at: up vector parallel to view direction");
    x.normalize();
    // Image y points down, so the camera y axis is z cross x.
    const Vec3 y = z.cross(x);
    Mat3 r;
    r.row(0) = x.transpose();
    r.row(1) = y.transpose();
    r.row(2) = z.transpose();
    return make_camera(fx, fy, 0.5 * (width - 1), 0.5 * (height - 1), r, -r * eye, width,
                       height);
}

void validate(const Camera &camera) {
    const Mat3 &k = camera.intrinsics;
    if (!k.allFinite() || k(1, 0) != 0.0 || k(2, 0) != 0.0 || k(2, 1) != 0.0 || k(2, 2) != 1.0) {
        throw ValidationError("camera intrinsics must be upper triangular with K[2][2] = 1");
    }
    if (!(k(0, 0) > 0.0) || !(k(1, 1) > 0.0)) {
        throw ValidationError("camera focal lengths must be positive");
    }
    const Mat3 &r = camera.rotation;
    if (!r.allFinite() || (r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
        r.determinant() < 0.0) {
        throw ValidationError("camera rotation must be orthonormal with determinant +1");
    }
    if (!camera.translation.allFinite()) throw ValidationError("camera translation not finite");
    if (camera.width <= 0 || camera.height <= 0) {
        throw ValidationError("camera width and height must be positive");
    }
}

RelativePose relative_pose(const Camera &from, const Camera &to) {
    // x_to = R_to (R_from^T (x_from - t_from)) + t_to
    RelativePose pose;
    pose.rotation = to.rotation * from.rotation.transpose();
    pose.translation = to.translation - pose.rotation * from.translation;
    return pose;
}

} // namespace solidsplat
