// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <solidsplat/synthetic.hpp>
#include <solidsplat/transmittance.hpp>

#include <solidsplat/grad.hpp>
#include <solidsplat/render.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <span>

namespace solidsplat::fixtures {

inline Vec4 random_quaternion(std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return synthetic::random_rotation(u(rng), u(rng), u(rng));
}

inline GaussianPrimitive random_gaussian(std::mt19937_64 &rng, const Vec3 &lo, const Vec3 &hi,
                                         double min_scale, double max_scale, double min_opacity = 0.1,
                                         double max_opacity = 0.9) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vec3 c;
    for (int k = 0; k < 3; ++k) c[k] = lo[k] + (hi[k] - lo[k]) * u(rng);
    Vec3 s;
    for (int k = 0; k < 3; ++k) s[k] = min_scale + (max_scale - min_scale) * u(rng);
    const double o = min_opacity + (max_opacity - min_opacity) * u(rng);
    const Vec3 color(u(rng), u(rng), u(rng));
    return make_gaussian(c, s, random_quaternion(rng), o, color);
}

struct RandomRay {
    Scene scene;
    Ray ray;
    TransmittanceProfile profile;
};

/// `count` Gaussians strung along the +z axis from the origin.
inline RandomRay random_ray_scene(std::mt19937_64 &rng, std::size_t count, double min_opacity = 0.1,
                                  double max_opacity = 0.9) {
    RandomRay out;
    for (std::size_t i = 0; i < count; ++i) {
        out.scene.push_back(random_gaussian(rng, Vec3(-0.3, -0.3, 2.0), Vec3(0.3, 0.3, 6.0), 0.2, 0.8,
                                            min_opacity, max_opacity));
    }
    out.ray = make_ray(Vec3::Zero(), Vec3::UnitZ());
    out.profile = gather_profile(out.scene, out.ray);
    return out;
}

/// A random ray profile that crosses T = 0.5.
inline RandomRay random_crossing_ray(std::mt19937_64 &rng, std::size_t count) {
    for (;;) {
        auto r = random_ray_scene(rng, count, 0.3, 0.95);
        if (!r.profile.empty() && residual_transmittance(r.profile) < 0.45) return r;
    }
}

struct Splat {
    double t_star;
    double peak;
    double curvature = 1.0;
    Vec3 color = Vec3::Constant(0.5);
    Vec3 normal = Vec3(0.0, 0.0, -1.0);
};

/// Hand-built profile on the +z ray from the origin.
inline TransmittanceProfile profile_of(const std::vector<Splat> &splats) {
    std::vector<RayRestriction> rs;
    std::vector<Vec3> colors, normals;
    for (std::size_t i = 0; i < splats.size(); ++i) {
        RayRestriction r;
        r.gaussian_id = i;
        r.t_star = splats[i].t_star;
        r.peak_value = splats[i].peak;
        r.curvature = splats[i].curvature;
        rs.push_back(r);
        colors.push_back(splats[i].color);
        normals.push_back(splats[i].normal);
    }
    return make_profile(make_ray(Vec3::Zero(), Vec3::UnitZ()), rs, colors, normals);
}

/// center(3), scales(3), raw quaternion(4), opacity, color(3): GaussianGrad::flatten order.
inline std::vector<double> natural_params(const GaussianPrimitive &g) {
    return {g.center.x(), g.center.y(), g.center.z(), g.scales.x(), g.scales.y(), g.scales.z(),
            g.rotation[0], g.rotation[1], g.rotation[2], g.rotation[3], g.opacity,
            g.color.x(), g.color.y(), g.color.z()};
}

/// Inverse of natural_params; the quaternion is renormalized.
inline GaussianPrimitive from_params(std::span<const double> v) {
    return make_gaussian(Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5]), Vec4(v[6], v[7], v[8], v[9]),
                         v[10], Vec3(v[11], v[12], v[13]));
}

/// Analytic gradient in flatten order with the rotation projected to the tangent space,
/// comparable with finite differences through from_params.
inline std::vector<double> comparable(const GaussianPrimitive &g, GaussianGrad grad) {
    grad.rotation = project_to_tangent(g.rotation, grad.rotation);
    return grad.flatten();
}

/// ||a - b|| / max(||a||, ||b||, floor) over [begin, end).
inline double relative_error(std::span<const double> a, std::span<const double> b, std::size_t begin,
                             std::size_t end, double floor = 1e-8) {
    double d = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t k = begin; k < end; ++k) {
        d += (a[k] - b[k]) * (a[k] - b[k]);
        na += a[k] * a[k];
        nb += b[k] * b[k];
    }
    return std::sqrt(d) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

/// Largest per-group error over center, scales, rotation, opacity and color.
inline double max_group_error(std::span<const double> a, std::span<const double> b, double floor = 1e-8) {
    double worst = 0.0;
    const std::size_t bounds[] = {0, 3, 6, 10, 11, 14};
    for (int k = 0; k < 5; ++k) worst = std::max(worst, relative_error(a, b, bounds[k], bounds[k + 1], floor));
    return worst;
}

/// Render buffers carrying exact analytic geometry and texture.
inline DepthRenderResult analytic_render(const synthetic::AnalyticView &v) {
    DepthRenderResult r;
    r.median_depth = v.depth.depth;
    r.valid_mask = v.depth.mask;
    r.step_median_depth = v.depth.depth;
    r.step_mask = v.depth.mask;
    r.expected_depth = v.depth.depth;
    r.expected_mask = v.depth.mask;
    r.color = v.image;
    r.normal = v.normal;
    r.normal_mask = v.depth.mask;
    return r;
}

/// A textured plane facing two nearby cameras.
struct PlanePair {
    synthetic::Plane plane;
    Camera ref, nbr;
    synthetic::AnalyticView ref_view, nbr_view;
};

inline PlanePair plane_pair(int size = 40) {
    PlanePair p;
    p.plane.point = Vec3(0.0, 0.0, 3.0);
    p.plane.normal = Vec3(0.2, -0.1, -1.0).normalized();
    const double f = 1.1 * size;
    p.ref = look_at_camera(Vec3::Zero(), Vec3(0, 0, 3), Vec3(0, -1, 0), f, f, size, size);
    p.nbr = look_at_camera(Vec3(0.3, 0.1, 0.05), Vec3(0, 0, 3), Vec3(0, -1, 0), f, f, size, size);
    p.ref_view = synthetic::render_plane(p.ref, p.plane);
    p.nbr_view = synthetic::render_plane(p.nbr, p.plane);
    return p;
}

} // namespace solidsplat::fixtures
