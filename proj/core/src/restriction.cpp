// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#include "solidsplat/restriction.hpp"

#include <cmath>

namespace solidsplat {

namespace {

constexpr double kMaxCondition = 1e12;

} // namespace

RayRestriction restrict_to_ray(const GaussianPrimitive &g, const Ray &ray, std::size_t id) {
    const double s_min = g.scales.minCoeff();
    const double s_max = g.scales.maxCoeff();
    const double condition = (s_max / s_min) * (s_max / s_min);
    if (!(condition <= kMaxCondition)) {
        throw NumericError("gaussian " + std::to_string(id) +
                           " rejected: covariance condition number " + std::to_string(condition) +
                           " exceeds 1e12");
    }
    // Quadratic form along the ray, evaluated in the Gaussian's principal frame.
    const Mat3 rot = rotation_matrix(g.rotation);
    const Vec3 inv_s = g.scales.cwiseInverse();
    const Vec3 w = (rot.transpose() * ray.direction).cwiseProduct(inv_s);
    const Vec3 d = (rot.transpose() * (ray.origin - g.center)).cwiseProduct(inv_s);

    RayRestriction r;
    r.gaussian_id = id;
    r.curvature = w.squaredNorm();
    r.t_star = -w.dot(d) / r.curvature;
    const Vec3 closest = d + r.t_star * w;
    r.peak_value = g.opacity * std::exp(-closest.squaredNorm());
    return r;
}

double vacancy(const RayRestriction &r, double t) { return std::sqrt(1.0 - r.value(t)); }

double attenuation_sigma(const RayRestriction &r, double t) {
    // |G'| / (2 (1 - G)) with G' = -2 a (t - t*) G
    const double g = r.value(t);
    return r.curvature * std::abs(t - r.t_star) * g / (1.0 - g);
}

} // namespace solidsplat
