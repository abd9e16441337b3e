// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#include "solidsplat/gaussian.hpp"

#include <cmath>
#include <sstream>

namespace solidsplat {

GaussianPrimitive make_gaussian(const Vec3 &center, const Vec3 &scales, const Vec4 &rotation,
                                double opacity, const Vec3 &color) {
    const double qn = rotation.norm();
    if (!(qn > 0.0) || !std::isfinite(qn)) {
        throw ValidationError("gaussian rotation quaternion must be non-zero and finite");
    }
    GaussianPrimitive g;
    g.center = center;
    g.scales = scales;
    g.rotation = rotation / qn;
    g.opacity = opacity;
    g.color = color;
    validate(g);
    return g;
}

void validate(const GaussianPrimitive &g) {
    std::ostringstream msg;
    if (!g.center.allFinite()) msg << "center is not finite; ";
    if (!g.scales.allFinite() || (g.scales.array() <= 0.0).any()) {
        msg << "scales must be strictly positive; ";
    }
    if (!g.rotation.allFinite() || std::abs(g.rotation.norm() - 1.0) > 1e-9) {
        msg << "rotation must be a unit quaternion; ";
    }
    if (!(g.opacity > 0.0 && g.opacity <= kMaxOpacity)) {
        msg << "opacity " << g.opacity << " outside (0, " << kMaxOpacity << "]; ";
    }
    if (!g.color.allFinite() || (g.color.array() < 0.0).any() || (g.color.array() > 1.0).any()) {
        msg << "color outside [0, 1]; ";
    }
    const std::string problems = msg.str();
    if (!problems.empty()) throw ValidationError("invalid gaussian: " + problems);
}

Mat3 rotation_matrix(const Vec4 &q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 r;
    r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
    return r;
}

Mat3 precision_matrix(const GaussianPrimitive &g) {
    const Mat3 r = rotation_matrix(g.rotation);
    const Vec3 inv_sq = g.scales.array().square().inverse();
    Mat3 p = r * inv_sq.asDiagonal() * r.transpose();
    // Exact symmetry, independent of rounding in the product above.
    return 0.5 * (p + p.transpose());
}

Mat3 covariance(const GaussianPrimitive &g) {
    const Mat3 r = rotation_matrix(g.rotation);
    return r * g.scales.array().square().matrix().asDiagonal() * r.transpose();
}

int normal_axis(const GaussianPrimitive &g) {
    int axis = 0;
    for (int k = 1; k < 3; ++k) {
        if (g.scales[k] < g.scales[axis]) axis = k;
    }
    return axis;
}

Vec3 principal_normal(const GaussianPrimitive &g) {
    return rotation_matrix(g.rotation).col(normal_axis(g));
}

Vec3 oriented_normal(const GaussianPrimitive &g, const Vec3 &view_direction) {
    const Vec3 n = principal_normal(g);
    return n.dot(view_direction) > 0.0 ? Vec3(-n) : n;
}

double eval_gaussian(const GaussianPrimitive &g, const Vec3 &x) {
    const Vec3 d = x - g.center;
    return g.opacity * std::exp(-d.dot(precision_matrix(g) * d));
}

} // namespace solidsplat
