// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "solidsplat/camera.hpp"
#include "solidsplat/gaussian.hpp"

#include <cmath>
#include <cstddef>

namespace solidsplat {

/// A Gaussian restricted to a ray: G(t) = peak_value * exp(-curvature * (t - t_star)^2).
///
/// peak_value is the per-pixel alpha used for compositing.
struct RayRestriction {
    std::size_t gaussian_id = 0;
    double curvature = 1.0;
    double t_star = 0.0;
    double peak_value = 0.0;

    double value(double t) const {
        const double dt = t - t_star;
        return peak_value * std::exp(-curvature * dt * dt);
    }
};

/// Exact 1D restriction of `g` along `ray`. Throws NumericError when the
/// covariance condition number exceeds 1e12.
RayRestriction restrict_to_ray(const GaussianPrimitive &g, const Ray &ray, std::size_t id = 0);

/// v(t) = sqrt(1 - G(t)).
double vacancy(const RayRestriction &r, double t);

/// sigma(t) = |d/dt log v(t)|.
double attenuation_sigma(const RayRestriction &r, double t);

} // namespace solidsplat
