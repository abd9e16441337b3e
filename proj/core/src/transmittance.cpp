// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#include "solidsplat/transmittance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace solidsplat {

TransmittanceProfile make_profile(const Ray &ray, std::vector<RayRestriction> restrictions,
                                  std::vector<Vec3> colors, std::vector<Vec3> normals) {
    const std::size_t n = restrictions.size();
    if (colors.size() != n || normals.size() != n) {
        throw ValidationError("profile: restrictions, colors and normals differ in length");
    }
    for (const auto &r : restrictions) {
        if (!(r.peak_value > 0.0 && r.peak_value <= kMaxOpacity) || !(r.curvature > 0.0) ||
            !std::isfinite(r.t_star)) {
            throw ValidationError("profile: restriction of gaussian " +
                                  std::to_string(r.gaussian_id) + " is out of range");
        }
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto &ra = restrictions[a];
        const auto &rb = restrictions[b];
        if (ra.t_star != rb.t_star) return ra.t_star < rb.t_star;
        return ra.gaussian_id < rb.gaussian_id;
    });
    TransmittanceProfile profile;
    profile.ray = ray;
    profile.restrictions.reserve(n);
    profile.colors.reserve(n);
    profile.normals.reserve(n);
    for (std::size_t i : order) {
        profile.restrictions.push_back(restrictions[i]);
        profile.colors.push_back(colors[i]);
        profile.normals.push_back(normals[i]);
    }
    return profile;
}

TransmittanceProfile gather_profile(const Scene &scene, const Ray &ray,
                                    const GatherOptions &options) {
    std::vector<RayRestriction> restrictions;
    std::vector<Vec3> colors;
    std::vector<Vec3> normals;
    const double log_cutoff = std::log(options.cutoff);
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const GaussianPrimitive &g = scene[i];
        // peak >= cutoff needs the quadratic form at the closest point to be at
        // most log(o / cutoff); the quadratic form is at least dist^2 / s_max^2.
        const double budget = std::log(g.opacity) - log_cutoff;
        if (budget < 0.0) continue;
        const Vec3 rel = g.center - ray.origin;
        const double along = rel.dot(ray.direction);
        const double perp_sq = std::max(0.0, rel.squaredNorm() - along * along);
        const double s_max = g.scales.maxCoeff();
        if (perp_sq > budget * s_max * s_max * (1.0 + 1e-9)) continue;

        const RayRestriction r = restrict_to_ray(g, ray, i);
        if (r.peak_value < options.cutoff || r.t_star < options.t_near) continue;
        restrictions.push_back(r);
        colors.push_back(g.color);
        normals.push_back(oriented_normal(g, ray.direction));
    }
    return make_profile(ray, std::move(restrictions), std::move(colors), std::move(normals));
}

double ti(const RayRestriction &r, double t) {
    const double v = vacancy(r, t);
    if (t <= r.t_star) return v;
    return (1.0 - r.peak_value) / v;
}

double total_transmittance(const TransmittanceProfile &profile, double t) {
    double product = 1.0;
    for (const auto &r : profile.restrictions) product *= ti(r, t);
    return product;
}

void total_transmittance(const TransmittanceProfile &profile, std::span<const double> ts,
                         std::span<double> out) {
    std::fill(out.begin(), out.end(), 1.0);
    for (const auto &r : profile.restrictions) {
        for (std::size_t k = 0; k < ts.size(); ++k) out[k] *= ti(r, ts[k]);
    }
}

double residual_transmittance(const TransmittanceProfile &profile) {
    double product = 1.0;
    for (const auto &r : profile.restrictions) product *= 1.0 - r.peak_value;
    return product;
}

Vec3 single_gaussian_color(const RayRestriction &r, const Vec3 &color) {
    return color * r.peak_value;
}

std::vector<double> compositing_weights(const TransmittanceProfile &profile) {
    std::vector<double> w(profile.size());
    double transmitted = 1.0;
    for (std::size_t i = 0; i < profile.size(); ++i) {
        const double alpha = profile.restrictions[i].peak_value;
        w[i] = alpha * transmitted;
        transmitted *= 1.0 - alpha;
    }
    return w;
}

Vec3 composite_color(const TransmittanceProfile &profile) {
    Vec3 c = Vec3::Zero();
    double transmitted = 1.0;
    for (std::size_t i = 0; i < profile.size(); ++i) {
        const double alpha = profile.restrictions[i].peak_value;
        c += profile.colors[i] * (alpha * transmitted);
        transmitted *= 1.0 - alpha;
    }
    return c;
}

std::optional<Vec3> composite_normal(const TransmittanceProfile &profile) {
    const std::vector<double> w = compositing_weights(profile);
    Vec3 n = Vec3::Zero();
    for (std::size_t i = 0; i < profile.size(); ++i) n += w[i] * profile.normals[i];
    const double len = n.norm();
    if (!(len > 0.0)) return std::nullopt;
    return Vec3(n / len);
}

} // namespace solidsplat
