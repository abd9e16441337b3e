// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Brute-force references used to validate the closed forms. None of this code
// calls into the transmittance, depth or gradient implementations; it only
// reads the restriction parameters stored in a profile.

#include "solidsplat/camera.hpp"
#include "solidsplat/image.hpp"
#include "solidsplat/transmittance.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace solidsplat::oracle {

struct QuadratureSpec {
    double lower = 0.0;
    double upper = 0.0;
    double tolerance = 1e-10;
    std::size_t max_subdivisions = 1u << 22;
};

/// Bounds covering every peak +-10/sqrt(curvature).
QuadratureSpec covering_spec(const TransmittanceProfile &profile, double tolerance = 1e-10);

/// Sum of per-Gaussian attenuation coefficients, computed from first principles.
double sigma_total(const TransmittanceProfile &profile, double t);

/// exp(-integral_{lower}^{t} sigma_total) by adaptive Simpson quadrature.
double quadrature_transmittance(const TransmittanceProfile &profile, double t,
                                const QuadratureSpec &spec);

/// integral p(t) dt with p = T sigma over [spec.lower, spec.upper].
double free_flight_integral(const TransmittanceProfile &profile, const QuadratureSpec &spec);

/// integral p(t) c dt: the volume-rendered color of a uniformly colored profile.
Vec3 quadrature_color(const TransmittanceProfile &profile, const Vec3 &color,
                      const QuadratureSpec &spec);

/// Bisection on an independent evaluation of the closed-form transmittance
/// until |T - 0.5| < 1e-12 (or the bracket can no longer shrink). nullopt
/// when T never reaches 0.5.
std::optional<double> numeric_median(const TransmittanceProfile &profile);

/// T(t) evaluated directly from the piecewise vacancy definition.
double reference_transmittance(const TransmittanceProfile &profile, double t);

using ScalarFunction = std::function<double(std::span<const double>)>;

struct FdOptions {
    std::vector<double> steps{1e-4, 1e-5, 1e-6};
    // Steps are scaled by max(1, |x_i|) when true.
    bool relative_steps = false;
};

/// Central differences at each step; per component, returns the estimate of
/// the finer step from the adjacent pair that agrees best. Throws
/// NumericError if any evaluation is non-finite.
std::vector<double> fd_gradient(const ScalarFunction &f, std::span<const double> x,
                                const FdOptions &options = {});

/// Exhaustive O(n m) nearest-neighbour distance from p to the cloud.
double nearest_distance_exhaustive(const Vec3 &p, std::span<const Vec3> cloud);

/// Symmetric mean nearest-neighbour distance by exhaustive search.
double chamfer_exhaustive(std::span<const Vec3> a, std::span<const Vec3> b);

/// Mean SSIM over channels with an 11x11 Gaussian window (sigma 1.5),
/// renormalized at the borders, computed pixel by pixel.
double reference_ssim(const RgbImage &a, const RgbImage &b);

/// o * exp(-d^T Sigma^-1 d) with Sigma assembled explicitly from the
/// quaternion and scales and the quadratic form taken by a dense LU solve.
double dense_gaussian_value(const GaussianPrimitive &g, const Vec3 &x);

struct GridPeak {
    double t = 0.0;
    double value = 0.0;
    double spacing = 0.0;
};

/// Largest dense_gaussian_value over `samples` evenly spaced ray parameters in [lo, hi].
GridPeak grid_peak(const GaussianPrimitive &g, const Ray &ray, double lo, double hi,
                   std::size_t samples);

/// Exact rational alpha num / den.
struct RationalAlpha {
    std::uint64_t num = 0;
    std::uint64_t den = 1;
};

/// Index of the first splat at which prod (1 - alpha) <= 1/2, by exact
/// integer arithmetic; nullopt if never. Throws when products overflow.
std::optional<std::size_t> step_crossing_index(std::span<const RationalAlpha> alphas);

/// sum c_i alpha_i prod_{j<i}(1 - alpha_j) accumulated in long double.
Vec3 composite_color_extended(const TransmittanceProfile &profile);

/// Weighted normal sum in long double, renormalized; nullopt on zero weight.
std::optional<Vec3> composite_normal_direct(const TransmittanceProfile &profile);

/// sum t_i w_i / sum w_i in long double; nullopt when the weight sum is below 1e-6.
std::optional<double> expected_depth_direct(const TransmittanceProfile &profile);

/// sum w_i (1 - n_i . n) in long double.
double normal_consistency_direct(const TransmittanceProfile &profile, const Vec3 &depth_normal);

/// First grid node in [lo, hi] (samples points) at which reference_transmittance
/// drops to 0.5, refined by linear interpolation with its predecessor.
std::optional<double> grid_median(const TransmittanceProfile &profile, double lo, double hi,
                                  std::size_t samples);

/// Transfers reference pixel u to the neighbour by intersecting its ray with
/// the plane {x : n . x = n . p} (reference camera frame), then projecting.
std::optional<Vec2> plane_transfer(const Camera &ref, const Camera &nbr, const Vec3 &n_ref,
                                   const Vec3 &p_ref, const Vec2 &u);

} // namespace solidsplat::oracle
