// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "solidsplat/camera.hpp"
#include "solidsplat/gaussian.hpp"
#include "solidsplat/image.hpp"

#include <cstdint>
#include <vector>

namespace solidsplat::synthetic {

/// Ground-truth view of an analytic surface; depth is the ray parameter.
struct AnalyticView {
    RgbImage image;
    DepthMap depth;
    Image<Vec3> normal; // world frame, facing the camera
};

struct Sphere {
    Vec3 center = Vec3::Zero();
    double radius = 1.0;
};

struct Plane {
    Vec3 point = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
};

/// Smooth color pattern on the unit sphere of directions.
Vec3 sphere_texture(const Vec3 &direction);
/// Smooth color pattern over in-plane coordinates.
Vec3 plane_texture(const Vec2 &uv);

/// Ray-traced textured sphere on a black background.
AnalyticView render_sphere(const Camera &camera, const Sphere &sphere);
/// Ray-traced textured plane; pixels whose ray misses the plane are masked.
AnalyticView render_plane(const Camera &camera, const Plane &plane);

/// Fibonacci-lattice samples of the sphere surface.
std::vector<Vec3> sphere_points(const Sphere &sphere, std::size_t count);

/// `count` cameras evenly spaced on a horizontal circle around `target`,
/// raised by `height`, all looking at `target` with +y as up.
std::vector<Camera> camera_ring(std::size_t count, const Vec3 &target, double radius,
                                double height, double focal, int width, int height_px);

/// Flattened, textured Gaussians tangent to the sphere.
Scene sphere_gaussians(const Sphere &sphere, std::size_t count, double opacity = 0.95);

/// Random Gaussians with centers uniform in [lo, hi], isotropic-ish scales in
/// [min_scale, max_scale], random rotations, opacities in [0.3, 0.9] and colors.
Scene random_scene(std::size_t count, const Vec3 &lo, const Vec3 &hi, double min_scale,
                   double max_scale, std::uint64_t seed);

/// Two wide, opaque, flattened Gaussians meeting in a crease in front of a
/// camera at the origin looking down +z. Every ray of a narrow field of view
/// first meets a Gaussian whose peak exceeds 0.75.
Scene crease_scene();

/// A row of y-elongated, z-flattened Gaussians at z = 2 whose opacity ramps
/// from near 0 to near 1 along +x, in front of an opaque backdrop at z = 2.3.
Scene translucent_ramp_scene();

/// Uniform random rotation quaternion (w, x, y, z) from three uniforms in [0, 1).
Vec4 random_rotation(double u1, double u2, double u3);

} // namespace solidsplat::synthetic
