// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "solidsplat/restriction.hpp"

#include <optional>
#include <span>
#include <vector>

namespace solidsplat {

/// All restrictions along one ray, in compositing order (ascending t_star,
/// ties broken by gaussian_id), with their colors and camera-facing normals.
struct TransmittanceProfile {
    Ray ray;
    std::vector<RayRestriction> restrictions;
    std::vector<Vec3> colors;
    std::vector<Vec3> normals;

    std::size_t size() const noexcept { return restrictions.size(); }
    bool empty() const noexcept { return restrictions.empty(); }
};

struct GatherOptions {
    double cutoff = kContributionCutoff;
    // Restrictions peaking before this ray parameter are dropped.
    double t_near = 0.01;
};

/// Sorts the entries into compositing order and validates peak values.
TransmittanceProfile make_profile(const Ray &ray, std::vector<RayRestriction> restrictions,
                                  std::vector<Vec3> colors, std::vector<Vec3> normals);

/// Restricts every scene Gaussian to the ray and keeps those with
/// peak_value >= cutoff and t_star >= t_near. A bounding-sphere test rejects
/// Gaussians that cannot reach the cutoff before the restriction is computed.
TransmittanceProfile gather_profile(const Scene &scene, const Ray &ray,
                                    const GatherOptions &options = {});

/// Transmittance of one stochastic Gaussian solid along the ray:
/// v(t) before the peak, v(t*)^2 / v(t) after it.
double ti(const RayRestriction &r, double t);

/// T(t) = prod_i T_i(t).
double total_transmittance(const TransmittanceProfile &profile, double t);

/// Evaluates T at several ray parameters in a single pass over the profile.
void total_transmittance(const TransmittanceProfile &profile, std::span<const double> ts,
                         std::span<double> out);

/// T(+inf) = prod_i (1 - alpha_i).
double residual_transmittance(const TransmittanceProfile &profile);

Vec3 single_gaussian_color(const RayRestriction &r, const Vec3 &color);

/// omega_i = alpha_i * prod_{j<i} (1 - alpha_j) with alpha_i = peak_value.
std::vector<double> compositing_weights(const TransmittanceProfile &profile);

Vec3 composite_color(const TransmittanceProfile &profile);

/// Weighted, renormalized normal; nullopt when the weights sum to zero.
std::optional<Vec3> composite_normal(const TransmittanceProfile &profile);

} // namespace solidsplat
