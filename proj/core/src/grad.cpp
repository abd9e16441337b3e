// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#include "solidsplat/grad.hpp"

#include <bit>
#include <cmath>
#include <cstdint>

namespace solidsplat {

GaussianGrad &GaussianGrad::operator+=(const GaussianGrad &o) {
    center += o.center;
    scales += o.scales;
    rotation += o.rotation;
    opacity += o.opacity;
    color += o.color;
    return *this;
}

GaussianGrad &GaussianGrad::operator*=(double s) {
    center *= s;
    scales *= s;
    rotation *= s;
    opacity *= s;
    color *= s;
    return *this;
}

bool GaussianGrad::all_finite() const {
    return center.allFinite() && scales.allFinite() && rotation.allFinite() &&
           std::isfinite(opacity) && color.allFinite();
}

std::vector<double> GaussianGrad::flatten() const {
    return {center[0],   center[1],   center[2],   scales[0], scales[1],
            scales[2],   rotation[0], rotation[1], rotation[2], rotation[3],
            opacity,     color[0],    color[1],    color[2]};
}

GaussianGrad GaussianGrad::unflatten(std::span<const double> v) {
    if (v.size() != kFlatSize) throw ValidationError("GaussianGrad::unflatten: bad length");
    GaussianGrad g;
    g.center = Vec3(v[0], v[1], v[2]);
    g.scales = Vec3(v[3], v[4], v[5]);
    g.rotation = Vec4(v[6], v[7], v[8], v[9]);
    g.opacity = v[10];
    g.color = Vec3(v[11], v[12], v[13]);
    return g;
}

Vec4 project_to_tangent(const Vec4 &q, const Vec4 &grad) {
    const Vec4 u = q.normalized();
    return grad - grad.dot(u) * u;
}

Vec4 rotation_vjp(const Vec4 &q, const Mat3 &d) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Vec4 g;
    g[0] = -2.0 * z * d(0, 1) + 2.0 * y * d(0, 2) + 2.0 * z * d(1, 0) - 2.0 * x * d(1, 2) -
           2.0 * y * d(2, 0) + 2.0 * x * d(2, 1);
    g[1] = 2.0 * y * d(0, 1) + 2.0 * z * d(0, 2) + 2.0 * y * d(1, 0) - 4.0 * x * d(1, 1) -
           2.0 * w * d(1, 2) + 2.0 * z * d(2, 0) + 2.0 * w * d(2, 1) - 4.0 * x * d(2, 2);
    g[2] = -4.0 * y * d(0, 0) + 2.0 * x * d(0, 1) + 2.0 * w * d(0, 2) + 2.0 * x * d(1, 0) +
           2.0 * z * d(1, 2) - 2.0 * w * d(2, 0) + 2.0 * z * d(2, 1) - 4.0 * y * d(2, 2);
    g[3] = -4.0 * z * d(0, 0) - 2.0 * w * d(0, 1) + 2.0 * x * d(0, 2) + 2.0 * w * d(1, 0) -
           4.0 * z * d(1, 1) + 2.0 * y * d(1, 2) + 2.0 * x * d(2, 0) + 2.0 * y * d(2, 1);
    return g;
}

void GradientBuffer::add(std::size_t id, const GaussianGrad &g) {
    if (!g.all_finite()) {
        throw NumericError("non-finite gradient for gaussian " + std::to_string(id));
    }
    if (id >= grads_.size()) throw ValidationError("gradient id out of range");
    grads_[id] += g;
}

void GradientBuffer::clear() {
    for (auto &g : grads_) g = GaussianGrad{};
}

void GradientBuffer::project_rotations(const Scene &scene) {
    for (std::size_t i = 0; i < grads_.size(); ++i) {
        grads_[i].rotation = project_to_tangent(scene[i].rotation, grads_[i].rotation);
    }
}

bool GradientBuffer::bitwise_equal(const GradientBuffer &other) const {
    if (grads_.size() != other.grads_.size()) return false;
    for (std::size_t i = 0; i < grads_.size(); ++i) {
        const auto a = grads_[i].flatten();
        const auto b = other.grads_[i].flatten();
        for (std::size_t k = 0; k < a.size(); ++k) {
            if (std::bit_cast<std::uint64_t>(a[k]) != std::bit_cast<std::uint64_t>(b[k])) {
                return false;
            }
        }
    }
    return true;
}

void ChunkedGradients::reduce_into(GradientBuffer &buffer) const {
    for (const auto &chunk : chunks_) {
        for (const auto &[id, g] : chunk) buffer.add(id, g);
    }
}

namespace {

/// Gradient of the quadratic form Q(x) = (x - c)^T Sigma^{-1} (x - c) with
/// respect to center, scales and quaternion, at world point x.
GaussianGrad quadratic_form_gradient(const GaussianPrimitive &g, const Vec3 &x) {
    const Mat3 rot = rotation_matrix(g.rotation);
    const Vec3 rel = x - g.center;
    const Vec3 local = rot.transpose() * rel;
    const Vec3 y = local.cwiseQuotient(g.scales);
    const Vec3 y_over_s = y.cwiseQuotient(g.scales);

    GaussianGrad dq;
    dq.center = -2.0 * (rot * y_over_s);
    dq.scales = -2.0 * y.cwiseProduct(y).cwiseQuotient(g.scales);
    // dQ/dR_jk = 2 rel_j y_k / s_k
    const Mat3 d_rot = 2.0 * rel * y_over_s.transpose();
    dq.rotation = rotation_vjp(g.rotation, d_rot);
    return dq;
}

/// dG/dtheta for G = o exp(-Q) given G and Q's gradient.
GaussianGrad value_gradient(const GaussianPrimitive &g, double value, const GaussianGrad &dq) {
    GaussianGrad out = (-value) * dq;
    out.opacity = value / g.opacity;
    return out;
}

} // namespace

double dti_dt(const RayRestriction &r, double t) {
    const double dt = t - r.t_star;
    if (dt == 0.0) return 0.0;
    const double gt = r.value(t);
    const double one_minus = 1.0 - gt;
    if (dt < 0.0) {
        // d sqrt(1 - G)/dt = -G' / (2 v), G' = -2 a dt G
        return r.curvature * dt * gt / std::sqrt(one_minus);
    }
    // d ((1 - g) (1 - G)^{-1/2}) / dt = (1 - g) G' / (2 (1 - G)^{3/2})
    return -(1.0 - r.peak_value) * r.curvature * dt * gt / (one_minus * std::sqrt(one_minus));
}

GaussianGrad restricted_value_gradient(const GaussianPrimitive &g, const Ray &ray, double t) {
    const Vec3 x = ray.at(t);
    const Vec3 rel = x - g.center;
    const double value = g.opacity * std::exp(-rel.dot(precision_matrix(g) * rel));
    return value_gradient(g, value, quadratic_form_gradient(g, x));
}

GaussianGrad dalpha_dtheta(const RayRestriction &r, const GaussianPrimitive &g, const Ray &ray) {
    // The peak is a stationary point of Q along the ray, so moving t_star
    // contributes nothing to first order.
    return value_gradient(g, r.peak_value, quadratic_form_gradient(g, ray.at(r.t_star)));
}

GaussianGrad dti_dtheta(const RayRestriction &r, const GaussianPrimitive &g, const Ray &ray,
                        double t) {
    const double gt = r.value(t);
    const double v = std::sqrt(1.0 - gt);
    const GaussianGrad d_gt = value_gradient(g, gt, quadratic_form_gradient(g, ray.at(t)));
    if (t <= r.t_star) return (-0.5 / v) * d_gt;
    const GaussianGrad d_peak = dalpha_dtheta(r, g, ray);
    return (-1.0 / v) * d_peak + (0.5 * (1.0 - r.peak_value) / (v * v * v)) * d_gt;
}

GaussianGrad normal_vjp(const GaussianPrimitive &g, const Vec3 &view_direction,
                        const Vec3 &upstream) {
    const int k = normal_axis(g);
    const Vec3 n = principal_normal(g);
    const double sign = n.dot(view_direction) > 0.0 ? -1.0 : 1.0;
    Mat3 d_rot = Mat3::Zero();
    d_rot.col(k) = sign * upstream;
    GaussianGrad out;
    out.rotation = rotation_vjp(g.rotation, d_rot);
    return out;
}

double dT_dt_at_median(const TransmittanceProfile &profile, double t_med) {
    double sum = 0.0;
    for (const auto &r : profile.restrictions) sum += 0.5 / ti(r, t_med) * dti_dt(r, t_med);
    if (!(std::abs(sum) >= 1e-10)) {
        throw NumericError("degenerate depth gradient: transmittance is flat at the median");
    }
    return sum;
}

double refine_median(const TransmittanceProfile &profile, double t_med) {
    double value = 1.0;
    double slope = 0.0;
    for (const auto &r : profile.restrictions) {
        const double t_i = ti(r, t_med);
        value *= t_i;
        slope += dti_dt(r, t_med) / t_i;
    }
    slope *= value;
    if (!(std::abs(slope) >= 1e-10)) return t_med;
    const double step = (value - 0.5) / slope;
    return std::abs(step) <= kMaxMedianRefinement ? t_med - step : t_med;
}

GradientTerms depth_gradient_terms(const TransmittanceProfile &profile, const Scene &scene,
                                   double t_med) {
    const double denom = dT_dt_at_median(profile, t_med);
    GradientTerms terms;
    terms.reserve(profile.size());
    for (const auto &r : profile.restrictions) {
        const GaussianPrimitive &g = scene.at(r.gaussian_id);
        const GaussianGrad d_t = dti_dtheta(r, g, profile.ray, t_med);
        terms.emplace_back(r.gaussian_id, (-0.5 / ti(r, t_med) / denom) * d_t);
    }
    return terms;
}

bool depth_backward(const TransmittanceProfile &profile, const Scene &scene,
                    const MedianDepth &median, double upstream, GradientTerms &out,
                    DepthBackwardStats *stats) {
    if (!median.valid) {
        if (stats) ++stats->masked;
        return false;
    }
    GradientTerms terms;
    try {
        terms = depth_gradient_terms(profile, scene, refine_median(profile, median.depth));
    } catch (const NumericError &) {
        if (stats) ++stats->degenerate;
        return false;
    }
    for (auto &[id, g] : terms) {
        g *= upstream;
        if (!g.all_finite()) {
            throw NumericError("non-finite depth gradient for gaussian " + std::to_string(id));
        }
        out.emplace_back(id, g);
    }
    if (stats) ++stats->accumulated;
    return true;
}

void depth_backward(const TransmittanceProfile &profile, const Scene &scene,
                    const MedianDepth &median, double upstream, GradientBuffer &buffer,
                    DepthBackwardStats *stats) {
    GradientTerms terms;
    if (!depth_backward(profile, scene, median, upstream, terms, stats)) return;
    for (const auto &[id, g] : terms) buffer.add(id, g);
}

std::vector<double> composite_alpha_gradient(const TransmittanceProfile &profile,
                                             std::span<const double> features) {
    const std::size_t n = profile.size();
    if (features.size() != n) throw ValidationError("composite_alpha_gradient: size mismatch");
    std::vector<double> transmitted(n);
    std::vector<double> weighted(n);
    double acc = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double alpha = profile.restrictions[i].peak_value;
        transmitted[i] = acc;
        weighted[i] = alpha * acc * features[i];
        acc *= 1.0 - alpha;
    }
    std::vector<double> grad(n);
    double suffix = 0.0;
    for (std::size_t k = n; k-- > 0;) {
        const double alpha = profile.restrictions[k].peak_value;
        grad[k] = transmitted[k] * features[k] - suffix / (1.0 - alpha);
        suffix += weighted[k];
    }
    return grad;
}

void composite_normal_backward(const TransmittanceProfile &profile, const Scene &scene,
                               const std::vector<double> &weights, const Vec3 &g,
                               GradientTerms &out) {
    Vec3 m = Vec3::Zero();
    for (std::size_t i = 0; i < profile.size(); ++i) m += weights[i] * profile.normals[i];
    const double len = m.norm();
    if (!(len > 0.0)) return;
    const Vec3 n_hat = m / len;
    const Vec3 dm = (g - n_hat * n_hat.dot(g)) / len;
    std::vector<double> features(profile.size());
    for (std::size_t i = 0; i < profile.size(); ++i) features[i] = dm.dot(profile.normals[i]);
    const auto d_alpha = composite_alpha_gradient(profile, features);
    for (std::size_t i = 0; i < profile.size(); ++i) {
        const auto &r = profile.restrictions[i];
        const GaussianPrimitive &gp = scene[r.gaussian_id];
        GaussianGrad term = d_alpha[i] * dalpha_dtheta(r, gp, profile.ray);
        term += normal_vjp(gp, profile.ray.direction, weights[i] * dm);
        out.emplace_back(r.gaussian_id, term);
    }
}

void composite_color_backward(const TransmittanceProfile &profile, const Scene &scene,
                              const std::vector<double> &weights, const Vec3 &g,
                              GradientTerms &out) {
    std::vector<double> features(profile.size());
    for (std::size_t i = 0; i < profile.size(); ++i) features[i] = g.dot(profile.colors[i]);
    const auto d_alpha = composite_alpha_gradient(profile, features);
    for (std::size_t i = 0; i < profile.size(); ++i) {
        const auto &r = profile.restrictions[i];
        GaussianGrad term = d_alpha[i] * dalpha_dtheta(r, scene[r.gaussian_id], profile.ray);
        term.color += weights[i] * g;
        out.emplace_back(r.gaussian_id, term);
    }
}

} // namespace solidsplat
