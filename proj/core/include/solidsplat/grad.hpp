// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "solidsplat/depth.hpp"

#include <span>
#include <utility>
#include <vector>

namespace solidsplat {

/// Derivatives with respect to one primitive's parameters. Rotation entries
/// are with respect to the raw quaternion components (w, x, y, z).
struct GaussianGrad {
    Vec3 center = Vec3::Zero();
    Vec3 scales = Vec3::Zero();
    Vec4 rotation = Vec4::Zero();
    double opacity = 0.0;
    Vec3 color = Vec3::Zero();

    GaussianGrad &operator+=(const GaussianGrad &o);
    GaussianGrad &operator*=(double s);
    friend GaussianGrad operator*(double s, GaussianGrad g) { return g *= s; }
    friend GaussianGrad operator+(GaussianGrad a, const GaussianGrad &b) { return a += b; }

    bool all_finite() const;
    /// Flattened as center(3), scales(3), rotation(4), opacity, color(3).
    std::vector<double> flatten() const;
    static GaussianGrad unflatten(std::span<const double> v);
    static constexpr std::size_t kFlatSize = 14;
};

/// Projects a raw quaternion gradient onto the tangent space of the unit sphere at q.
Vec4 project_to_tangent(const Vec4 &q, const Vec4 &grad);

/// Vector-Jacobian product of the quaternion-to-matrix map.
Vec4 rotation_vjp(const Vec4 &q, const Mat3 &d_rotation);

/// Per-primitive accumulators. Accumulation throws NumericError on non-finite input.
class GradientBuffer {
public:
    GradientBuffer() = default;
    explicit GradientBuffer(std::size_t count) : grads_(count) {}

    std::size_t size() const noexcept { return grads_.size(); }
    const GaussianGrad &operator[](std::size_t i) const { return grads_[i]; }

    void add(std::size_t id, const GaussianGrad &g);
    void clear();
    /// Replaces every rotation gradient by its tangent-space projection.
    void project_rotations(const Scene &scene);

    const std::vector<GaussianGrad> &grads() const noexcept { return grads_; }
    /// True when every stored value is bit-for-bit equal.
    bool bitwise_equal(const GradientBuffer &other) const;

private:
    std::vector<GaussianGrad> grads_;
};

using GradientTerms = std::vector<std::pair<std::size_t, GaussianGrad>>;

/// Collects contributions per work chunk and reduces them in chunk order, so
/// the result is independent of how chunks were scheduled across workers.
class ChunkedGradients {
public:
    explicit ChunkedGradients(std::size_t chunks) : chunks_(chunks) {}

    GradientTerms &chunk(std::size_t i) { return chunks_[i]; }
    void reduce_into(GradientBuffer &buffer) const;

private:
    std::vector<GradientTerms> chunks_;
};

/// dT_i/dt, evaluated branch-wise; 0 at t = t_star.
double dti_dt(const RayRestriction &r, double t);

/// dT_i(t)/dtheta through the curvature, peak location and peak value.
GaussianGrad dti_dtheta(const RayRestriction &r, const GaussianPrimitive &g, const Ray &ray,
                        double t);

/// dG(t)/dtheta of the restricted Gaussian at ray parameter t.
GaussianGrad restricted_value_gradient(const GaussianPrimitive &g, const Ray &ray, double t);

/// d(peak_value)/dtheta, i.e. the gradient of the compositing alpha.
GaussianGrad dalpha_dtheta(const RayRestriction &r, const GaussianPrimitive &g, const Ray &ray);

/// Jacobian-transpose product of the camera-facing normal: d(upstream . n)/dtheta.
GaussianGrad normal_vjp(const GaussianPrimitive &g, const Vec3 &view_direction,
                        const Vec3 &upstream);

/// sum_i (0.5 / T_i(t_med)) dT_i/dt. Throws NumericError when the magnitude is below 1e-10.
double dT_dt_at_median(const TransmittanceProfile &profile, double t_med);

// Largest Newton correction accepted by refine_median.
inline constexpr double kMaxMedianRefinement = 1e-3;

/// One Newton step on T(t) = 0.5 from the search result. The backward pass
/// evaluates the implicit gradient at the refined root; steps larger than
/// kMaxMedianRefinement are rejected and t_med is returned unchanged.
double refine_median(const TransmittanceProfile &profile, double t_med);

/// d t_med / d theta_i for every Gaussian of the profile (implicit-function gradient).
GradientTerms depth_gradient_terms(const TransmittanceProfile &profile, const Scene &scene,
                                   double t_med);

struct DepthBackwardStats {
    std::size_t accumulated = 0;
    std::size_t masked = 0;
    std::size_t degenerate = 0;
};

/// Adds upstream * d t_med / d theta_i, evaluated at refine_median(median.depth),
/// for all contributing Gaussians. Masked
/// pixels and degenerate denominators leave the buffer untouched; the latter
/// are counted in stats.
void depth_backward(const TransmittanceProfile &profile, const Scene &scene,
                    const MedianDepth &median, double upstream, GradientBuffer &buffer,
                    DepthBackwardStats *stats = nullptr);

/// Same, appending terms to `out` instead of a dense buffer.
bool depth_backward(const TransmittanceProfile &profile, const Scene &scene,
                    const MedianDepth &median, double upstream, GradientTerms &out,
                    DepthBackwardStats *stats = nullptr);

/// Gradients of out = sum_i omega_i * s_i with respect to alpha_i, given the
/// projected features s_i. Returns d out / d alpha_i.
std::vector<double> composite_alpha_gradient(const TransmittanceProfile &profile,
                                             std::span<const double> features);

/// Backward of composite_color for upstream g on the pixel color.
void composite_color_backward(const TransmittanceProfile &profile, const Scene &scene,
                              const std::vector<double> &weights, const Vec3 &g,
                              GradientTerms &out);

/// Backward of the renormalized composite_normal for upstream g.
void composite_normal_backward(const TransmittanceProfile &profile, const Scene &scene,
                               const std::vector<double> &weights, const Vec3 &g,
                               GradientTerms &out);

} // namespace solidsplat
