// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#include "solidsplat/synthetic.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <random>

namespace solidsplat::synthetic {

Vec3 sphere_texture(const Vec3 &d) {
    const Vec3 n = d.normalized();
    return Vec3(0.5 + 0.35 * std::sin(4.0 * n.x() + 1.3 * n.y()),
                0.5 + 0.35 * std::sin(3.5 * n.y() - 2.0 * n.z() + 0.7),
                0.5 + 0.35 * std::cos(4.5 * n.z() + 1.1 * n.x()));
}

Vec3 plane_texture(const Vec2 &uv) {
    const double u = uv.x(), v = uv.y();
    return Vec3(0.5 + 0.3 * std::sin(6.0 * u) * std::cos(5.0 * v),
                0.5 + 0.3 * std::sin(4.0 * u + 7.0 * v + 0.4),
                0.5 + 0.3 * std::cos(8.0 * v - 3.0 * u));
}

namespace {

AnalyticView empty_view(const Camera &c) {
    return {RgbImage(c.width, c.height, Vec3::Zero()),
            {Image<double>(c.width, c.height, 0.0), Mask(c.width, c.height, 0)},
            Image<Vec3>(c.width, c.height, Vec3::Zero())};
}

// Orthonormal tangent basis of a unit normal.
std::pair<Vec3, Vec3> tangent_basis(const Vec3 &n) {
    const Vec3 helper = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    const Vec3 a = n.cross(helper).normalized();
    return {a, n.cross(a)};
}

Vec4 quaternion_from_axes(const Vec3 &a, const Vec3 &b, const Vec3 &c) {
    Mat3 r;
    r.col(0) = a;
    r.col(1) = b;
    r.col(2) = c;
    if (r.determinant() < 0) r.col(2) = -c;
    const Eigen::Quaterniond q(r);
    return Vec4(q.w(), q.x(), q.y(), q.z());
}

} // namespace

AnalyticView render_sphere(const Camera &camera, const Sphere &sphere) {
    AnalyticView view = empty_view(camera);
    for (int y = 0; y < camera.height; ++y) {
        for (int x = 0; x < camera.width; ++x) {
            const Ray ray = camera.pixel_ray(x, y);
            const Vec3 oc = ray.origin - sphere.center;
            const double b = oc.dot(ray.direction);
            const double c = oc.squaredNorm() - sphere.radius * sphere.radius;
            const double disc = b * b - c;
            if (disc < 0.0) continue;
            const double t = -b - std::sqrt(disc);
            if (t <= 0.0) continue;
            const Vec3 n = (ray.at(t) - sphere.center).normalized();
            view.image(x, y) = sphere_texture(n);
            view.depth.depth(x, y) = t;
            view.depth.mask(x, y) = 1;
            view.normal(x, y) = n;
        }
    }
    return view;
}

AnalyticView render_plane(const Camera &camera, const Plane &plane) {
    AnalyticView view = empty_view(camera);
    const Vec3 n = plane.normal.normalized();
    const auto [ta, tb] = tangent_basis(n);
    for (int y = 0; y < camera.height; ++y) {
        for (int x = 0; x < camera.width; ++x) {
            const Ray ray = camera.pixel_ray(x, y);
            const double denom = ray.direction.dot(n);
            if (std::abs(denom) < 1e-12) continue;
            const double t = (plane.point - ray.origin).dot(n) / denom;
            if (t <= 0.0) continue;
            const Vec3 rel = ray.at(t) - plane.point;
            view.image(x, y) = plane_texture(Vec2(rel.dot(ta), rel.dot(tb)));
            view.depth.depth(x, y) = t;
            view.depth.mask(x, y) = 1;
            view.normal(x, y) = denom > 0.0 ? Vec3(-n) : n;
        }
    }
    return view;
}

std::vector<Vec3> sphere_points(const Sphere &sphere, std::size_t count) {
    std::vector<Vec3> pts;
    pts.reserve(count);
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (std::size_t i = 0; i < count; ++i) {
        const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(count);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * static_cast<double>(i);
        pts.push_back(sphere.center + sphere.radius * Vec3(r * std::cos(phi), z, r * std::sin(phi)));
    }
    return pts;
}

std::vector<Camera> camera_ring(std::size_t count, const Vec3 &target, double radius,
                                double height, double focal, int width, int height_px) {
    std::vector<Camera> cams;
    for (std::size_t i = 0; i < count; ++i) {
        const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(count);
        const Vec3 eye = target + Vec3(radius * std::sin(a), height, -radius * std::cos(a));
        cams.push_back(look_at_camera(eye, target, Vec3::UnitY(), focal, focal, width, height_px));
    }
    return cams;
}

Scene sphere_gaussians(const Sphere &sphere, std::size_t count, double opacity) {
    const auto pts = sphere_points(sphere, count);
    const double spacing = sphere.radius * std::sqrt(4.0 * std::numbers::pi / static_cast<double>(count));
    Scene scene;
    scene.reserve(count);
    for (const auto &p : pts) {
        const Vec3 n = (p - sphere.center).normalized();
        const auto [ta, tb] = tangent_basis(n);
        scene.push_back(make_gaussian(p, Vec3(0.6 * spacing, 0.6 * spacing, 0.08 * spacing),
                                      quaternion_from_axes(ta, tb, n), opacity, sphere_texture(n)));
    }
    return scene;
}

Vec4 random_rotation(double u1, double u2, double u3) {
    const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
    const double t1 = 2.0 * std::numbers::pi * u2, t2 = 2.0 * std::numbers::pi * u3;
    return Vec4(b * std::cos(t2), a * std::sin(t1), a * std::cos(t1), b * std::sin(t2));
}

Scene random_scene(std::size_t count, const Vec3 &lo, const Vec3 &hi, double min_scale,
                   double max_scale, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Scene scene;
    scene.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Vec3 c;
        for (int k = 0; k < 3; ++k) c[k] = lo[k] + (hi[k] - lo[k]) * u(rng);
        Vec3 s;
        for (int k = 0; k < 3; ++k) s[k] = min_scale + (max_scale - min_scale) * u(rng);
        const double u1 = u(rng), u2 = u(rng), u3 = u(rng);
        const Vec4 q = random_rotation(u1, u2, u3);
        const double o = 0.3 + 0.6 * u(rng);
        const Vec3 col(u(rng), u(rng), u(rng));
        scene.push_back(make_gaussian(c, s, q, o, col));
    }
    return scene;
}

Scene crease_scene() {
    const double tilt = 0.5;
    const Vec3 na(std::sin(tilt), 0.0, -std::cos(tilt));
    const Vec3 nb(-std::sin(tilt), 0.0, -std::cos(tilt));
    Scene scene;
    for (const auto &[n, c, col] : {std::tuple{na, Vec3(-0.6, 0.0, 3.0), Vec3(0.8, 0.3, 0.2)},
                                    std::tuple{nb, Vec3(0.6, 0.0, 3.0), Vec3(0.2, 0.4, 0.8)}}) {
        const auto [ta, tb] = tangent_basis(n);
        scene.push_back(make_gaussian(c, Vec3(3.0, 3.0, 0.15), quaternion_from_axes(ta, tb, n),
                                      kMaxOpacity, col));
    }
    return scene;
}

Scene translucent_ramp_scene() {
    Scene scene;
    const double s = 0.1;
    const double spacing = 0.5 * s;
    const double x0 = -0.8, x1 = 0.8;
    for (double x = x0 - 2 * s; x <= x1 + 2 * s + 1e-9; x += spacing) {
        const double u = std::clamp((x - x0) / (x1 - x0), 0.0, 1.0);
        const double o = std::clamp(0.01 + 0.89 * u, 0.001, kMaxOpacity);
        scene.push_back(make_gaussian(Vec3(x, 0.0, 2.0), Vec3(s, 2.0, 0.05), Vec4(1, 0, 0, 0), o,
                                      Vec3(0.9, 0.9, 0.9)));
    }
    scene.push_back(make_gaussian(Vec3(0.0, 0.0, 2.3), Vec3(4.0, 4.0, 0.05), Vec4(1, 0, 0, 0),
                                  kMaxOpacity, Vec3(0.2, 0.2, 0.2)));
    return scene;
}

} // namespace solidsplat::synthetic
