// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "solidsplat/common.hpp"

#include <optional>

namespace solidsplat {

struct Ray {
    Vec3 origin = Vec3::Zero();
    Vec3 direction = Vec3::UnitZ();

    Vec3 at(double t) const { return origin + t * direction; }
};

/// Normalizes the direction; throws on a zero direction.
Ray make_ray(const Vec3 &origin, const Vec3 &direction);

/// Pinhole camera. World-to-camera is x_cam = rotation * x_world + translation,
/// the camera looks down +z, and pixel (x, y) has its center at image
/// coordinates (x, y).
struct Camera {
    Mat3 intrinsics = Mat3::Identity();
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    int width = 0;
    int height = 0;

    double fx() const { return intrinsics(0, 0); }
    double fy() const { return intrinsics(1, 1); }
    double cx() const { return intrinsics(0, 2); }
    double cy() const { return intrinsics(1, 2); }

    /// Camera center in world coordinates.
    Vec3 center() const { return -rotation.transpose() * translation; }

    Vec3 to_camera(const Vec3 &world) const { return rotation * world + translation; }
    Vec3 to_world(const Vec3 &cam) const { return rotation.transpose() * (cam - translation); }

    /// Unit ray direction through image point (u, v), in camera coordinates.
    Vec3 camera_direction(double u, double v) const;

    /// World-space ray through image point (u, v) starting at the camera center.
    Ray pixel_ray(double u, double v) const;

    /// Image coordinates of a world point, or nullopt when it lies behind the camera.
    std::optional<Vec2> project(const Vec3 &world) const;

    bool contains(const Vec2 &uv) const {
        return uv.x() >= 0.0 && uv.y() >= 0.0 && uv.x() <= width - 1.0 && uv.y() <= height - 1.0;
    }
};

Mat3 make_intrinsics(double fx, double fy, double cx, double cy);

Camera make_camera(double fx, double fy, double cx, double cy, const Mat3 &rotation,
                   const Vec3 &translation, int width, int height);

/// A camera at `eye` looking at `target`; `up` fixes the roll.
Camera look_at_camera(const Vec3 &eye, const Vec3 &target, const Vec3 &up, double fx, double fy,
                      int width, int height);

/// Throws ValidationError unless K is upper triangular with K22 = 1 and positive focal
/// lengths, the rotation is orthonormal within 1e-9 and the image is non-empty.
void validate(const Camera &camera);

/// Relative pose from camera a to camera b: x_b = R * x_a + T.
struct RelativePose {
    Mat3 rotation;
    Vec3 translation;
};

RelativePose relative_pose(const Camera &from, const Camera &to);

} // namespace solidsplat
