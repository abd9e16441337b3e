// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#include "solidsplat/losses.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/AutoDiff>

#include <array>
#include <cmath>
#include <limits>

namespace solidsplat {

void LossWeights::validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("loss lambda must lie in [0, 1]");
    if (!(normal >= 0.0) || !(photometric_consistency >= 0.0) || !(geometric_consistency >= 0.0)) {
        throw ValidationError("loss weights must be non-negative");
    }
}

namespace {

constexpr int kSsimRadius = 5;
constexpr double kSsimSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::array<double, 2 * kSsimRadius + 1> &ssim_window() {
    static const auto w = [] {
        std::array<double, 2 * kSsimRadius + 1> g{};
        for (int k = -kSsimRadius; k <= kSsimRadius; ++k) {
            g[k + kSsimRadius] = std::exp(-(k * k) / (2.0 * kSsimSigma * kSsimSigma));
        }
        return g;
    }();
    return w;
}

// In-bounds window mass along one axis at coordinate i of an axis of length n.
double window_mass(int i, int n) {
    const auto &g = ssim_window();
    double z = 0.0;
    for (int k = -kSsimRadius; k <= kSsimRadius; ++k) {
        if (i + k >= 0 && i + k < n) z += g[k + kSsimRadius];
    }
    return z;
}

// Separable Gaussian filter restricted to the image. With `normalize` each
// output is divided by the in-bounds window mass.
Image<double> filter(const Image<double> &in, bool normalize) {
    const auto &g = ssim_window();
    const int w = in.width();
    const int h = in.height();
    Image<double> tmp(w, h, 0.0);
    Image<double> out(w, h, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int k = -kSsimRadius; k <= kSsimRadius; ++k) {
                const int xx = x + k;
                if (xx >= 0 && xx < w) s += g[k + kSsimRadius] * in(xx, y);
            }
            tmp(x, y) = normalize ? s / window_mass(x, w) : s;
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int k = -kSsimRadius; k <= kSsimRadius; ++k) {
                const int yy = y + k;
                if (yy >= 0 && yy < h) s += g[k + kSsimRadius] * tmp(x, yy);
            }
            out(x, y) = normalize ? s / window_mass(y, h) : s;
        }
    }
    return out;
}

Image<double> channel(const RgbImage &img, int c) {
    Image<double> out(img.width(), img.height());
    for (std::size_t i = 0; i < img.size(); ++i) out[i] = img[i][c];
    return out;
}

template <class F>
Image<double> map_pixels(int w, int h, F &&f) {
    Image<double> out(w, h);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(i);
    return out;
}

// Sum of SSIM over one channel's pixels; optionally the gradient of that sum
// with respect to a.
double ssim_channel(const Image<double> &a, const Image<double> &b, Image<double> *grad) {
    const int w = a.width();
    const int h = a.height();
    const auto mu_a = filter(a, true);
    const auto mu_b = filter(b, true);
    const auto aa = filter(map_pixels(w, h, [&](std::size_t i) { return a[i] * a[i]; }), true);
    const auto bb = filter(map_pixels(w, h, [&](std::size_t i) { return b[i] * b[i]; }), true);
    const auto ab = filter(map_pixels(w, h, [&](std::size_t i) { return a[i] * b[i]; }), true);

    Image<double> d_mu(w, h), d_var(w, h), d_cov(w, h);
    double total = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double ma = mu_a(x, y), mb = mu_b(x, y);
            const double var_a = aa(x, y) - ma * ma;
            const double var_b = bb(x, y) - mb * mb;
            const double cov = ab(x, y) - ma * mb;
            const double n1 = 2.0 * ma * mb + kC1;
            const double n2 = 2.0 * cov + kC2;
            const double d1 = ma * ma + mb * mb + kC1;
            const double d2 = var_a + var_b + kC2;
            const double s = n1 * n2 / (d1 * d2);
            total += s;
            if (grad) {
                const double z = window_mass(x, w) * window_mass(y, h);
                d_mu(x, y) = (2.0 * mb * n2 / (d1 * d2) - 2.0 * ma * s / d1) / z;
                d_var(x, y) = (-s / d2) / z;
                d_cov(x, y) = (2.0 * n1 / (d1 * d2)) / z;
            }
        }
    }
    if (grad) {
        const auto f_mu = filter(d_mu, false);
        const auto f_var = filter(d_var, false);
        const auto f_var_mu = filter(map_pixels(w, h, [&](std::size_t i) { return d_var[i] * mu_a[i]; }), false);
        const auto f_cov = filter(d_cov, false);
        const auto f_cov_mu = filter(map_pixels(w, h, [&](std::size_t i) { return d_cov[i] * mu_b[i]; }), false);
        *grad = Image<double>(w, h);
        for (std::size_t i = 0; i < grad->size(); ++i) {
            (*grad)[i] = f_mu[i] + 2.0 * a[i] * f_var[i] - 2.0 * f_var_mu[i] + b[i] * f_cov[i] -
                         f_cov_mu[i];
        }
    }
    return total;
}

void check_same_size(const RgbImage &a, const RgbImage &b) {
    if (a.width() != b.width() || a.height() != b.height() || a.empty()) {
        throw ValidationError("image dimensions differ (" + std::to_string(a.width()) + "x" +
                              std::to_string(a.height()) + " vs " + std::to_string(b.width()) +
                              "x" + std::to_string(b.height()) + ")");
    }
}

} // namespace

double ssim(const RgbImage &a, const RgbImage &b) {
    check_same_size(a, b);
    double total = 0.0;
    for (int c = 0; c < 3; ++c) total += ssim_channel(channel(a, c), channel(b, c), nullptr);
    return total / (3.0 * static_cast<double>(a.size()));
}

PhotometricLoss photometric_loss(const RgbImage &rendered, const RgbImage &reference,
                                 double lambda, bool with_gradient) {
    check_same_size(rendered, reference);
    const double count = 3.0 * static_cast<double>(rendered.size());
    PhotometricLoss out;
    double l1 = 0.0;
    for (std::size_t i = 0; i < rendered.size(); ++i) {
        l1 += (rendered[i] - reference[i]).cwiseAbs().sum();
    }
    out.l1 = l1 / count;
    if (with_gradient) out.gradient = RgbImage(rendered.width(), rendered.height(), Vec3::Zero());
    double ssim_sum = 0.0;
    for (int c = 0; c < 3; ++c) {
        Image<double> g;
        ssim_sum += ssim_channel(channel(rendered, c), channel(reference, c),
                                 with_gradient ? &g : nullptr);
        if (with_gradient) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double diff = rendered[i][c] - reference[i][c];
                const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
                out.gradient[i][c] = ((1.0 - lambda) * sign - 0.5 * lambda * g[i]) / count;
            }
        }
    }
    out.ssim = ssim_sum / count;
    out.value = (1.0 - lambda) * out.l1 + lambda * 0.5 * (1.0 - out.ssim);
    return out;
}

double normal_consistency_loss(const TransmittanceProfile &profile, const Vec3 &depth_normal) {
    const auto w = compositing_weights(profile);
    double loss = 0.0;
    for (std::size_t i = 0; i < profile.size(); ++i) {
        loss += w[i] * (1.0 - profile.normals[i].dot(depth_normal));
    }
    return loss;
}

Vec3 normal_consistency_backward(const TransmittanceProfile &profile, const Scene &scene,
                                 const Vec3 &depth_normal, double scale, GradientTerms &out) {
    const auto w = compositing_weights(profile);
    std::vector<double> features(profile.size());
    for (std::size_t i = 0; i < profile.size(); ++i) {
        features[i] = scale * (1.0 - profile.normals[i].dot(depth_normal));
    }
    const auto d_alpha = composite_alpha_gradient(profile, features);
    Vec3 d_depth_normal = Vec3::Zero();
    for (std::size_t i = 0; i < profile.size(); ++i) {
        const auto &r = profile.restrictions[i];
        const GaussianPrimitive &g = scene.at(r.gaussian_id);
        GaussianGrad term = d_alpha[i] * dalpha_dtheta(r, g, profile.ray);
        term += normal_vjp(g, profile.ray.direction, -scale * w[i] * depth_normal);
        out.emplace_back(r.gaussian_id, term);
        d_depth_normal -= scale * w[i] * profile.normals[i];
    }
    return d_depth_normal;
}

namespace {

struct NormalStencil {
    Vec3 p0, p1, p2; // back-projected pixel, +x and +y neighbours (camera frame)
    Vec3 cross;
    double sign;
};

std::optional<NormalStencil> normal_stencil(const DepthMap &depth, const Camera &camera, int x,
                                            int y) {
    const int w = depth.depth.width();
    const int h = depth.depth.height();
    if (x + 1 >= w || y + 1 >= h) return std::nullopt;
    if (!depth.mask(x, y) || !depth.mask(x + 1, y) || !depth.mask(x, y + 1)) return std::nullopt;
    NormalStencil s;
    s.p0 = depth.depth(x, y) * camera.camera_direction(x, y);
    s.p1 = depth.depth(x + 1, y) * camera.camera_direction(x + 1, y);
    s.p2 = depth.depth(x, y + 1) * camera.camera_direction(x, y + 1);
    s.cross = (s.p1 - s.p0).cross(s.p2 - s.p0);
    if (!(s.cross.norm() > 1e-300) || !s.cross.allFinite()) return std::nullopt;
    s.sign = s.cross.dot(s.p0) > 0.0 ? -1.0 : 1.0;
    return s;
}

} // namespace

NormalMap depth_to_normal(const DepthMap &depth, const Camera &camera) {
    const int w = depth.depth.width();
    const int h = depth.depth.height();
    NormalMap out{Image<Vec3>(w, h, Vec3::Zero()), Mask(w, h, 0)};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const auto s = normal_stencil(depth, camera, x, y);
            if (!s) continue;
            const Vec3 n_cam = s->sign * s->cross.normalized();
            out.normal(x, y) = camera.rotation.transpose() * n_cam;
            out.mask(x, y) = 1;
        }
    }
    return out;
}

Image<double> depth_to_normal_backward(const DepthMap &depth, const Camera &camera,
                                       const NormalMap &normals, const Image<Vec3> &grad_normal) {
    const int w = depth.depth.width();
    const int h = depth.depth.height();
    Image<double> grad(w, h, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!normals.mask(x, y)) continue;
            const Vec3 &g_world = grad_normal(x, y);
            if (g_world.isZero(0.0)) continue;
            const auto s = normal_stencil(depth, camera, x, y);
            if (!s) continue;
            const Vec3 g_cam = camera.rotation * g_world;
            const double len = s->cross.norm();
            const Vec3 c_hat = s->cross / len;
            const Vec3 d_cross = s->sign * (g_cam - c_hat * c_hat.dot(g_cam)) / len;
            const Vec3 a = s->p1 - s->p0;
            const Vec3 b = s->p2 - s->p0;
            const Vec3 d_a = b.cross(d_cross);
            const Vec3 d_b = d_cross.cross(a);
            grad(x, y) -= (d_a + d_b).dot(camera.camera_direction(x, y));
            grad(x + 1, y) += d_a.dot(camera.camera_direction(x + 1, y));
            grad(x, y + 1) += d_b.dot(camera.camera_direction(x, y + 1));
        }
    }
    return grad;
}

Homography plane_homography(const Mat3 &k_ref, const Mat3 &k_nbr, const Mat3 &r_rn,
                            const Vec3 &t_rn, const Vec3 &n_ref, const Vec3 &p_ref) {
    const double offset = p_ref.dot(n_ref);
    if (!(std::abs(offset) >= 1e-9)) {
        throw NumericError("plane_homography: plane passes through the reference camera center");
    }
    Homography h;
    h.matrix = k_nbr * (r_rn + t_rn * n_ref.transpose() / offset) * k_ref.inverse();
    if (!(std::abs(h.matrix.determinant()) > 1e-12) || !h.matrix.allFinite()) {
        throw NumericError("plane_homography: singular homography");
    }
    return h;
}

std::optional<Vec2> warp(const Homography &h, const Vec2 &u) {
    const Vec3 x = h.matrix * Vec3(u.x(), u.y(), 1.0);
    if (!(x.z() > 1e-12)) return std::nullopt;
    return Vec2(x.x() / x.z(), x.y() / x.z());
}

double cycle_error(const Vec2 &u, const Homography &h_rn, const Homography &h_nr) {
    const auto there = warp(h_rn, u);
    if (!there) return std::numeric_limits<double>::infinity();
    const auto back = warp(h_nr, *there);
    if (!back) return std::numeric_limits<double>::infinity();
    return (u - *back).norm();
}

double confidence_weight(double phi) { return phi < 1.0 ? std::exp(-phi) : 0.0; }

std::optional<double> ncc(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) throw ValidationError("ncc: patch sizes differ");
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double va = 0.0, vb = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
        cov += (a[i] - ma) * (b[i] - mb);
    }
    if (!(va > 1e-10 * n) || !(vb > 1e-10 * n)) return std::nullopt;
    return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
}

namespace {

using Dual = Eigen::AutoDiffScalar<Eigen::Matrix<double, 4, 1>>;

template <class S>
using V3 = Eigen::Matrix<S, 3, 1>;
template <class S>
using M3 = Eigen::Matrix<S, 3, 3>;

inline double value_of(double v) { return v; }
inline double value_of(const Dual &v) { return v.value(); }

struct MultiViewContext {
    const ViewInput &ref;
    const ViewInput &nbr;
    const DepthRenderResult &render_nbr;
    Image<double> gray_ref;
    Image<double> gray_nbr;
    RelativePose rn;
    RelativePose nr;
    Mat3 k_ref_inv;
    int half;
    double min_variance;
};

template <class S>
std::optional<S> sample_bilinear(const Image<double> &img, const S &u, const S &v) {
    const double uv = value_of(u), vv = value_of(v);
    if (!(uv >= 0.0 && vv >= 0.0 && uv <= img.width() - 1.0 && vv <= img.height() - 1.0)) {
        return std::nullopt;
    }
    int x0 = static_cast<int>(std::floor(uv));
    int y0 = static_cast<int>(std::floor(vv));
    x0 = std::min(x0, img.width() - 2);
    y0 = std::min(y0, img.height() - 2);
    if (x0 < 0 || y0 < 0) return std::nullopt;
    const S fx = u - static_cast<double>(x0);
    const S fy = v - static_cast<double>(y0);
    const S top = img(x0, y0) * (1.0 - fx) + img(x0 + 1, y0) * fx;
    const S bottom = img(x0, y0 + 1) * (1.0 - fx) + img(x0 + 1, y0 + 1) * fx;
    return S(top * (1.0 - fy) + bottom * fy);
}

template <class S>
struct PixelTerms {
    S phi;
    std::optional<S> ncc;
};

template <class S>
std::optional<PixelTerms<S>> evaluate_pixel(const MultiViewContext &ctx, int x, int y,
                                            const S &depth, const V3<S> &normal_world) {
    const Camera &cam_r = ctx.ref.camera;
    const Camera &cam_n = ctx.nbr.camera;
    const V3<S> p_ref = cam_r.camera_direction(x, y).cast<S>() * depth;
    const V3<S> n_ref = cam_r.rotation.cast<S>() * normal_world;
    const S offset = p_ref.dot(n_ref);
    if (!(std::abs(value_of(offset)) >= 1e-9)) return std::nullopt;

    const M3<S> h_rn = cam_n.intrinsics.cast<S>() *
                       (ctx.rn.rotation.cast<S>() +
                        ctx.rn.translation.cast<S>() * n_ref.transpose() / offset) *
                       ctx.k_ref_inv.cast<S>();
    auto apply = [&](double px, double py) -> std::optional<std::pair<S, S>> {
        const V3<S> q = h_rn * V3<S>(S(px), S(py), S(1.0));
        if (!(value_of(q.z()) > 1e-12)) return std::nullopt;
        return std::make_pair(S(q.x() / q.z()), S(q.y() / q.z()));
    };
    const auto center = apply(x, y);
    if (!center) return std::nullopt;
    const double un = value_of(center->first);
    const double vn = value_of(center->second);
    const int px = static_cast<int>(std::lround(un));
    const int py = static_cast<int>(std::lround(vn));
    if (!std::isfinite(un) || !std::isfinite(vn) || px < 0 || py < 0 || px >= cam_n.width ||
        py >= cam_n.height) {
        return std::nullopt;
    }
    const auto &rn = ctx.render_nbr;
    if (!rn.valid_mask(px, py) || !rn.normal_mask(px, py)) return std::nullopt;

    // Neighbour plane at the nearest pixel, held constant.
    const Vec3 p_nbr = rn.median_depth(px, py) * cam_n.camera_direction(px, py);
    const Vec3 n_nbr = cam_n.rotation * rn.normal(px, py);
    const double offset_n = p_nbr.dot(n_nbr);
    if (!(std::abs(offset_n) >= 1e-9)) return std::nullopt;
    const Mat3 h_nr = cam_r.intrinsics *
                      (ctx.nr.rotation + ctx.nr.translation * n_nbr.transpose() / offset_n) *
                      cam_n.intrinsics.inverse();
    const V3<S> back = h_nr.cast<S>() * V3<S>(center->first, center->second, S(1.0));
    if (!(value_of(back.z()) > 1e-12)) return std::nullopt;
    const S du = back.x() / back.z() - static_cast<double>(x);
    const S dv = back.y() / back.z() - static_cast<double>(y);
    const S sq = du * du + dv * dv;
    using std::sqrt;
    PixelTerms<S> terms{value_of(sq) > 0.0 ? S(sqrt(sq)) : S(0.0), std::nullopt};

    // Photometric patch term.
    const int half = ctx.half;
    if (x - half < 0 || y - half < 0 || x + half >= cam_r.width || y + half >= cam_r.height) {
        return terms;
    }
    const int count = (2 * half + 1) * (2 * half + 1);
    std::vector<double> a;
    std::vector<S> b;
    a.reserve(count);
    b.reserve(count);
    for (int dy = -half; dy <= half; ++dy) {
        for (int dx = -half; dx <= half; ++dx) {
            const auto q = apply(x + dx, y + dy);
            if (!q) return terms;
            const auto s = sample_bilinear(ctx.gray_nbr, q->first, q->second);
            if (!s) return terms;
            a.push_back(ctx.gray_ref(x + dx, y + dy));
            b.push_back(*s);
        }
    }
    double ma = 0.0;
    S mb = S(0.0);
    for (int i = 0; i < count; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= count;
    mb /= static_cast<double>(count);
    double va = 0.0;
    S vb = S(0.0), cov = S(0.0);
    for (int i = 0; i < count; ++i) {
        const S db = b[i] - mb;
        va += (a[i] - ma) * (a[i] - ma);
        vb += db * db;
        cov += (a[i] - ma) * db;
    }
    if (!(va > ctx.min_variance * count) || !(value_of(vb) > ctx.min_variance * count)) {
        return terms;
    }
    S corr = cov / sqrt(vb * va);
    if (value_of(corr) > 1.0) corr = S(1.0);
    if (value_of(corr) < -1.0) corr = S(-1.0);
    terms.ncc = corr;
    return terms;
}

Image<double> gray(const RgbImage &img) {
    Image<double> out(img.width(), img.height());
    for (std::size_t i = 0; i < img.size(); ++i) out[i] = luminance(img[i]);
    return out;
}

} // namespace

MultiViewLoss multiview_loss(const ViewInput &ref_view, const ViewInput &nbr_view,
                             const DepthRenderResult &render_ref,
                             const DepthRenderResult &render_nbr, const LossWeights &weights,
                             const MultiViewOptions &options, bool with_gradient) {
    const Camera &cam_r = ref_view.camera;
    if (render_ref.width() != cam_r.width || render_ref.height() != cam_r.height ||
        render_nbr.width() != nbr_view.camera.width ||
        render_nbr.height() != nbr_view.camera.height ||
        ref_view.image.width() != cam_r.width || ref_view.image.height() != cam_r.height ||
        nbr_view.image.width() != nbr_view.camera.width ||
        nbr_view.image.height() != nbr_view.camera.height) {
        throw ValidationError("multiview_loss: image and camera dimensions differ");
    }
    if (options.patch_size < 1 || options.patch_size % 2 == 0) {
        throw ValidationError("multiview_loss: patch size must be odd and positive");
    }
    MultiViewContext ctx{ref_view,
                         nbr_view,
                         render_nbr,
                         gray(ref_view.image),
                         gray(nbr_view.image),
                         relative_pose(cam_r, nbr_view.camera),
                         relative_pose(nbr_view.camera, cam_r),
                         cam_r.intrinsics.inverse(),
                         options.patch_size / 2,
                         options.min_variance};

    const int w = cam_r.width;
    const int h = cam_r.height;
    MultiViewLoss out;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.cycle = Image<double>(w, h, nan);
    out.confidence = Image<double>(w, h, 0.0);
    out.ncc_score = Image<double>(w, h, nan);
    if (with_gradient) {
        out.grad_depth = Image<double>(w, h, 0.0);
        out.grad_normal = Image<Vec3>(w, h, Vec3::Zero());
    }
    double sum_pc = 0.0, sum_gc = 0.0, sum_phi = 0.0;
    std::size_t finite_phi = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!render_ref.valid_mask(x, y) || !render_ref.normal_mask(x, y)) continue;
            const double t = render_ref.median_depth(x, y);
            const Vec3 &n = render_ref.normal(x, y);
            if (with_gradient) {
                const Dual td(t, 4, 0);
                const V3<Dual> nd(Dual(n.x(), 4, 1), Dual(n.y(), 4, 2), Dual(n.z(), 4, 3));
                const auto terms = evaluate_pixel<Dual>(ctx, x, y, td, nd);
                if (!terms) continue;
                const double phi = terms->phi.value();
                if (!std::isfinite(phi)) continue;
                ++out.valid_pixels;
                sum_phi += phi;
                ++finite_phi;
                const double wgt = confidence_weight(phi);
                out.cycle(x, y) = phi;
                out.confidence(x, y) = wgt;
                Eigen::Vector4d d = weights.geometric_consistency * wgt * terms->phi.derivatives();
                sum_gc += wgt * phi;
                if (terms->ncc) {
                    out.ncc_score(x, y) = terms->ncc->value();
                    sum_pc += wgt * (1.0 - terms->ncc->value());
                    d -= weights.photometric_consistency * wgt * terms->ncc->derivatives();
                } else {
                    ++out.skipped_patches;
                }
                out.grad_depth(x, y) = d[0];
                out.grad_normal(x, y) = Vec3(d[1], d[2], d[3]);
            } else {
                const auto terms = evaluate_pixel<double>(ctx, x, y, t, n);
                if (!terms) continue;
                const double phi = terms->phi;
                if (!std::isfinite(phi)) continue;
                ++out.valid_pixels;
                sum_phi += phi;
                ++finite_phi;
                const double wgt = confidence_weight(phi);
                out.cycle(x, y) = phi;
                out.confidence(x, y) = wgt;
                sum_gc += wgt * phi;
                if (terms->ncc) {
                    out.ncc_score(x, y) = *terms->ncc;
                    sum_pc += wgt * (1.0 - *terms->ncc);
                } else {
                    ++out.skipped_patches;
                }
            }
        }
    }
    if (out.valid_pixels == 0) {
        out.empty_warnings = 1;
        return out;
    }
    const double inv = 1.0 / static_cast<double>(out.valid_pixels);
    out.photometric = sum_pc * inv;
    out.geometric = sum_gc * inv;
    out.value = weights.photometric_consistency * out.photometric +
                weights.geometric_consistency * out.geometric;
    out.mean_cycle_error = finite_phi ? sum_phi / static_cast<double>(finite_phi) : 0.0;
    if (with_gradient) {
        for (auto &g : out.grad_depth.data()) g *= inv;
        for (auto &g : out.grad_normal.data()) g *= inv;
    }
    return out;
}

} // namespace solidsplat
