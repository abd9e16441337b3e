// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "solidsplat/common.hpp"

#include <vector>

namespace solidsplat {

/// Anisotropic 3D Gaussian G(x) = o * exp(-(x - c)^T Sigma^{-1} (x - c)).
///
/// There is no 1/2 in the exponent. Sigma = R diag(scales^2) R^T with R built
/// from the unit quaternion `rotation` stored as (w, x, y, z).
struct GaussianPrimitive {
    Vec3 center = Vec3::Zero();
    Vec3 scales = Vec3::Ones();
    Vec4 rotation = Vec4(1.0, 0.0, 0.0, 0.0);
    double opacity = 0.5;
    Vec3 color = Vec3::Constant(0.5);
};

using Scene = std::vector<GaussianPrimitive>;

/// Builds a primitive with a normalized quaternion and checks every invariant.
GaussianPrimitive make_gaussian(const Vec3 &center, const Vec3 &scales, const Vec4 &rotation,
                                double opacity, const Vec3 &color = Vec3::Constant(0.5));

/// Throws ValidationError when scales, quaternion norm, opacity or color are out of range.
void validate(const GaussianPrimitive &g);

/// Rotation matrix of a unit quaternion (w, x, y, z).
Mat3 rotation_matrix(const Vec4 &q);

/// Sigma^{-1} assembled as R diag(1/s^2) R^T; symmetric by construction.
Mat3 precision_matrix(const GaussianPrimitive &g);

Mat3 covariance(const GaussianPrimitive &g);

/// Index of the smallest scale.
int normal_axis(const GaussianPrimitive &g);

/// Unoriented normal: the rotated axis of the smallest scale.
Vec3 principal_normal(const GaussianPrimitive &g);

/// The normal flipped so that it faces against the viewing direction.
Vec3 oriented_normal(const GaussianPrimitive &g, const Vec3 &view_direction);

double eval_gaussian(const GaussianPrimitive &g, const Vec3 &x);

} // namespace solidsplat
