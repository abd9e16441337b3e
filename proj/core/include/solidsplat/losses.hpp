// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "solidsplat/camera.hpp"
#include "solidsplat/grad.hpp"
#include "solidsplat/image.hpp"
#include "solidsplat/render.hpp"

#include <optional>
#include <span>

namespace solidsplat {

struct LossWeights {
    double lambda = 0.2;                    // D-SSIM share of the photometric loss
    double normal = 0.05;                   // w_n
    double photometric_consistency = 0.6;   // w_pc
    double geometric_consistency = 0.02;    // w_gc

    void validate() const;
};

// --- photometric -----------------------------------------------------------

/// Mean SSIM over pixels and channels: 11x11 Gaussian window with sigma 1.5,
/// renormalized where it leaves the image, C1 = 0.01^2, C2 = 0.03^2.
double ssim(const RgbImage &a, const RgbImage &b);

struct PhotometricLoss {
    double value = 0.0;
    double l1 = 0.0;
    double ssim = 1.0;
    RgbImage gradient; // d value / d rendered, filled on request
};

/// (1 - lambda) * L1 + lambda * (1 - SSIM) / 2. Throws ValidationError on a size mismatch.
PhotometricLoss photometric_loss(const RgbImage &rendered, const RgbImage &reference,
                                 double lambda = 0.2, bool with_gradient = false);

// --- normal consistency ----------------------------------------------------

/// sum_i omega_i (1 - n_i . depth_normal).
double normal_consistency_loss(const TransmittanceProfile &profile, const Vec3 &depth_normal);

/// Gradient of scale * normal_consistency_loss. Appends per-Gaussian terms and
/// returns d/d depth_normal.
Vec3 normal_consistency_backward(const TransmittanceProfile &profile, const Scene &scene,
                                 const Vec3 &depth_normal, double scale, GradientTerms &out);

struct NormalMap {
    Image<Vec3> normal; // world coordinates, facing the camera
    Mask mask;
};

/// Normals from the cross product of +x and +y back-projected neighbour
/// differences. Invalid wherever the pixel or either neighbour is masked.
NormalMap depth_to_normal(const DepthMap &depth, const Camera &camera);

/// Gradient of sum_p g(p) . normal(p) with respect to the depth image.
Image<double> depth_to_normal_backward(const DepthMap &depth, const Camera &camera,
                                       const NormalMap &normals, const Image<Vec3> &grad_normal);

// --- multi-view --------------------------------------------------------------

struct Homography {
    Mat3 matrix = Mat3::Identity();
};

/// H = K_n (R_rn + T_rn n_r^T / (p_r . n_r)) K_r^{-1}. Throws NumericError when
/// |p_r . n_r| < 1e-9 or the result is singular.
Homography plane_homography(const Mat3 &k_ref, const Mat3 &k_nbr, const Mat3 &r_rn,
                            const Vec3 &t_rn, const Vec3 &n_ref, const Vec3 &p_ref);

/// Dehomogenized H * (u, 1); nullopt when the third coordinate is <= 1e-12.
std::optional<Vec2> warp(const Homography &h, const Vec2 &u);

/// |u - H_nr H_rn u| in pixels; +inf when either warp sends u to infinity.
double cycle_error(const Vec2 &u, const Homography &h_rn, const Homography &h_nr);

/// exp(-phi) below one pixel, zero otherwise.
double confidence_weight(double phi);

/// Normalized cross-correlation; nullopt when either patch has zero variance.
std::optional<double> ncc(std::span<const double> a, std::span<const double> b);

struct ViewInput {
    Camera camera;
    RgbImage image;
};

struct MultiViewOptions {
    int patch_size = 7;
    double min_variance = 1e-10;
};

struct MultiViewLoss {
    double value = 0.0;            // w_pc * L_pc + w_gc * L_gc, per valid pixel
    double photometric = 0.0;      // L_pc / valid
    double geometric = 0.0;        // L_gc / valid
    double mean_cycle_error = 0.0; // over valid pixels with finite error
    std::size_t valid_pixels = 0;
    std::size_t skipped_patches = 0;
    std::size_t empty_warnings = 0;
    Image<double> cycle;           // phi per pixel, NaN where not evaluated
    Image<double> confidence;      // w(phi), 0 where not evaluated
    Image<double> ncc_score;       // NaN where the patch was skipped
    Image<double> grad_depth;      // d value / d reference median depth
    Image<Vec3> grad_normal;       // d value / d reference rendered normal
};

/// Plane-induced homography, NCC and cycle-reprojection loss between a
/// reference view and a neighbour. Gradients flow to the reference depth and
/// normal; the confidence weight and the neighbour geometry are constants.
MultiViewLoss multiview_loss(const ViewInput &ref_view, const ViewInput &nbr_view,
                             const DepthRenderResult &render_ref,
                             const DepthRenderResult &render_nbr,
                             const LossWeights &weights = {}, const MultiViewOptions &options = {},
                             bool with_gradient = false);

} // namespace solidsplat
