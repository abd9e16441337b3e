// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#include "solidsplat/oracle.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>

namespace solidsplat::oracle {

namespace {

double restricted(const RayRestriction &r, double t) {
    return r.peak_value * std::exp(-r.curvature * (t - r.t_star) * (t - r.t_star));
}

// |d/dt log sqrt(1 - G)| written out from G(t).
double sigma_one(const RayRestriction &r, double t) {
    const double g = restricted(r, t);
    const double dg = -2.0 * r.curvature * (t - r.t_star) * g;
    return std::abs(-0.5 * dg / (1.0 - g));
}

struct SimpsonState {
    const TransmittanceProfile &profile;
    double tolerance;
    std::size_t budget;
    std::size_t used = 0;

    void charge() {
        if (++used > budget) throw NumericError("quadrature: subdivision budget exhausted");
    }
};

double simpson_sigma(SimpsonState &s, double a, double b, double fa, double fm, double fb,
                     double whole, double tol, int depth) {
    s.charge();
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = sigma_total(s.profile, lm);
    const double frm = sigma_total(s.profile, rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double diff = left + right - whole;
    if (depth <= 0 || std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
    return simpson_sigma(s, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_sigma(s, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

// Optical depth over a sub-interval on which sigma is smooth.
double optical_depth(SimpsonState &s, double a, double b) {
    if (b <= a) return 0.0;
    const double m = 0.5 * (a + b);
    const double fa = sigma_total(s.profile, a);
    const double fm = sigma_total(s.profile, m);
    const double fb = sigma_total(s.profile, b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_sigma(s, a, b, fa, fm, fb, whole, s.tolerance * 1e-3, 40);
}

// Adaptive Simpson for p(t) = sigma(t) exp(-tau(t)). tau at new nodes is
// obtained from the optical depth of the sub-interval to the left.
double simpson_density(SimpsonState &s, double a, double b, double fa, double fm, double fb,
                       double tau_a, double tau_m, double whole, double tol, int depth) {
    s.charge();
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double tau_lm = tau_a + optical_depth(s, a, lm);
    const double tau_rm = tau_m + optical_depth(s, m, rm);
    const double flm = sigma_total(s.profile, lm) * std::exp(-tau_lm);
    const double frm = sigma_total(s.profile, rm) * std::exp(-tau_rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double diff = left + right - whole;
    if (depth <= 0 || std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
    return simpson_density(s, a, m, fa, flm, fm, tau_a, tau_lm, left, 0.5 * tol, depth - 1) +
           simpson_density(s, m, b, fm, frm, fb, tau_m, tau_rm, right, 0.5 * tol, depth - 1);
}

// Panel boundaries: bounds, every peak, and +-1, +-3 widths around each peak.
std::vector<double> breakpoints(const TransmittanceProfile &profile, double lo, double hi) {
    std::vector<double> pts{lo, hi};
    for (const auto &r : profile.restrictions) {
        const double w = 1.0 / std::sqrt(r.curvature);
        for (double k : {-3.0, -1.0, 0.0, 1.0, 3.0}) {
            const double t = r.t_star + k * w;
            if (t > lo && t < hi) pts.push_back(t);
        }
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

} // namespace

QuadratureSpec covering_spec(const TransmittanceProfile &profile, double tolerance) {
    QuadratureSpec spec;
    spec.tolerance = tolerance;
    if (profile.empty()) {
        spec.lower = 0.0;
        spec.upper = 1.0;
        return spec;
    }
    spec.lower = std::numeric_limits<double>::infinity();
    spec.upper = -std::numeric_limits<double>::infinity();
    for (const auto &r : profile.restrictions) {
        const double w = 10.0 / std::sqrt(r.curvature);
        spec.lower = std::min(spec.lower, r.t_star - w);
        spec.upper = std::max(spec.upper, r.t_star + w);
    }
    return spec;
}

double sigma_total(const TransmittanceProfile &profile, double t) {
    double s = 0.0;
    for (const auto &r : profile.restrictions) s += sigma_one(r, t);
    return s;
}

double quadrature_transmittance(const TransmittanceProfile &profile, double t,
                                const QuadratureSpec &spec) {
    if (!(spec.tolerance > 0.0)) throw ValidationError("quadrature tolerance must be positive");
    SimpsonState s{profile, spec.tolerance, spec.max_subdivisions};
    const double end = std::min(t, spec.upper);
    const auto pts = breakpoints(profile, spec.lower, std::max(end, spec.lower));
    double tau = 0.0;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) tau += optical_depth(s, pts[k], pts[k + 1]);
    return std::exp(-tau);
}

double free_flight_integral(const TransmittanceProfile &profile, const QuadratureSpec &spec) {
    if (!(spec.tolerance > 0.0)) throw ValidationError("quadrature tolerance must be positive");
    SimpsonState s{profile, spec.tolerance, spec.max_subdivisions};
    const auto pts = breakpoints(profile, spec.lower, spec.upper);
    const double panel_tol = spec.tolerance / static_cast<double>(pts.size());
    double tau = 0.0;
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
        const double a = pts[k];
        const double b = pts[k + 1];
        const double m = 0.5 * (a + b);
        const double tau_m = tau + optical_depth(s, a, m);
        const double tau_b = tau_m + optical_depth(s, m, b);
        const double fa = sigma_total(profile, a) * std::exp(-tau);
        const double fm = sigma_total(profile, m) * std::exp(-tau_m);
        const double fb = sigma_total(profile, b) * std::exp(-tau_b);
        const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        total += simpson_density(s, a, b, fa, fm, fb, tau, tau_m, whole, panel_tol, 50);
        tau = tau_b;
    }
    return total;
}

Vec3 quadrature_color(const TransmittanceProfile &profile, const Vec3 &color,
                      const QuadratureSpec &spec) {
    return color * free_flight_integral(profile, spec);
}

double reference_transmittance(const TransmittanceProfile &profile, double t) {
    double product = 1.0;
    for (const auto &r : profile.restrictions) {
        const double v_t = std::sqrt(1.0 - restricted(r, t));
        const double v_peak_sq = 1.0 - r.peak_value;
        product *= (t <= r.t_star) ? v_t : v_peak_sq / v_t;
    }
    return product;
}

std::optional<double> numeric_median(const TransmittanceProfile &profile) {
    if (profile.empty()) return std::nullopt;
    double residual = 1.0;
    for (const auto &r : profile.restrictions) residual *= 1.0 - r.peak_value;
    if (residual > 0.5) return std::nullopt;

    double lo = profile.restrictions.front().t_star;
    double hi = profile.restrictions.back().t_star;
    double width = 1.0;
    for (int k = 0; k < 200 && reference_transmittance(profile, lo) < 0.5; ++k) {
        lo -= width;
        width *= 2.0;
    }
    width = 1.0;
    for (int k = 0; k < 200 && reference_transmittance(profile, hi) > 0.5; ++k) {
        hi += width;
        width *= 2.0;
    }
    if (reference_transmittance(profile, lo) < 0.5 || reference_transmittance(profile, hi) > 0.5) {
        return std::nullopt;
    }
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (reference_transmittance(profile, mid) > 0.5) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

std::vector<double> fd_gradient(const ScalarFunction &f, std::span<const double> x,
                                const FdOptions &options) {
    if (options.steps.empty()) throw ValidationError("fd_gradient: empty step schedule");
    std::vector<double> point(x.begin(), x.end());
    auto eval = [&](std::size_t i, double value) {
        const double saved = point[i];
        point[i] = value;
        const double y = f(point);
        point[i] = saved;
        if (!std::isfinite(y)) {
            throw NumericError("fd_gradient: non-finite evaluation for component " +
                               std::to_string(i));
        }
        return y;
    };
    if (!std::isfinite(f(point))) throw NumericError("fd_gradient: non-finite base evaluation");

    std::vector<double> grad(x.size());
    std::vector<double> est(options.steps.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double scale = options.relative_steps ? std::max(1.0, std::abs(x[i])) : 1.0;
        for (std::size_t k = 0; k < options.steps.size(); ++k) {
            const double h = options.steps[k] * scale;
            est[k] = (eval(i, x[i] + h) - eval(i, x[i] - h)) / (2.0 * h);
        }
        std::size_t best = est.size() - 1;
        double best_gap = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k + 1 < est.size(); ++k) {
            const double gap = std::abs(est[k] - est[k + 1]);
            if (gap < best_gap) {
                best_gap = gap;
                best = k + 1;
            }
        }
        grad[i] = est[best];
    }
    return grad;
}

double nearest_distance_exhaustive(const Vec3 &p, std::span<const Vec3> cloud) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3 &q : cloud) best = std::min(best, (p - q).squaredNorm());
    return std::sqrt(best);
}

double chamfer_exhaustive(std::span<const Vec3> a, std::span<const Vec3> b) {
    if (a.empty() || b.empty()) throw ValidationError("chamfer: empty cloud");
    double sa = 0.0;
    for (const Vec3 &p : a) sa += nearest_distance_exhaustive(p, b);
    double sb = 0.0;
    for (const Vec3 &p : b) sb += nearest_distance_exhaustive(p, a);
    return 0.5 * sa / static_cast<double>(a.size()) + 0.5 * sb / static_cast<double>(b.size());
}

double reference_ssim(const RgbImage &a, const RgbImage &b) {
    if (a.width() != b.width() || a.height() != b.height()) {
        throw ValidationError("reference_ssim: size mismatch");
    }
    constexpr int kRadius = 5;
    constexpr double kSigma = 1.5;
    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;
    const int w = a.width();
    const int h = a.height();
    double total = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double wsum = 0, ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                for (int dy = -kRadius; dy <= kRadius; ++dy) {
                    for (int dx = -kRadius; dx <= kRadius; ++dx) {
                        const int xx = x + dx, yy = y + dy;
                        if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
                        const double wt = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
                        const double va = a(xx, yy)[ch];
                        const double vb = b(xx, yy)[ch];
                        wsum += wt;
                        ma += wt * va;
                        mb += wt * vb;
                        saa += wt * va * va;
                        sbb += wt * vb * vb;
                        sab += wt * va * vb;
                    }
                }
                ma /= wsum;
                mb /= wsum;
                const double var_a = saa / wsum - ma * ma;
                const double var_b = sbb / wsum - mb * mb;
                const double cov = sab / wsum - ma * mb;
                total += (2 * ma * mb + c1) * (2 * cov + c2) /
                         ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
            }
        }
    }
    return total / (3.0 * w * h);
}

double dense_gaussian_value(const GaussianPrimitive &g, const Vec3 &x) {
    const Eigen::Quaterniond q(g.rotation[0], g.rotation[1], g.rotation[2], g.rotation[3]);
    const Mat3 r = q.normalized().toRotationMatrix();
    const Vec3 s2 = g.scales.cwiseProduct(g.scales);
    const Mat3 sigma = r * s2.asDiagonal() * r.transpose();
    const Vec3 d = x - g.center;
    const Vec3 y = sigma.partialPivLu().solve(d);
    return g.opacity * std::exp(-d.dot(y));
}

GridPeak grid_peak(const GaussianPrimitive &g, const Ray &ray, double lo, double hi,
                   std::size_t samples) {
    GridPeak best;
    best.spacing = (hi - lo) / static_cast<double>(samples - 1);
    best.value = -1.0;
    for (std::size_t k = 0; k < samples; ++k) {
        const double t = lo + best.spacing * static_cast<double>(k);
        const double v = dense_gaussian_value(g, ray.origin + t * ray.direction);
        if (v > best.value) {
            best.value = v;
            best.t = t;
        }
    }
    return best;
}

std::optional<std::size_t> step_crossing_index(std::span<const RationalAlpha> alphas) {
    // Residual = num / den, kept unreduced.
    unsigned __int128 num = 1, den = 1;
    const unsigned __int128 limit = static_cast<unsigned __int128>(1) << 120;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        const auto &a = alphas[i];
        if (a.den == 0 || a.num > a.den) throw ValidationError("step_crossing_index: alpha outside [0, 1]");
        num *= a.den - a.num;
        den *= a.den;
        if (num > limit || den > limit) throw NumericError("step_crossing_index: overflow");
        if (2 * num <= den) return i;
    }
    return std::nullopt;
}

Vec3 composite_color_extended(const TransmittanceProfile &profile) {
    long double acc[3] = {0, 0, 0};
    long double transmitted = 1;
    for (std::size_t i = 0; i < profile.size(); ++i) {
        const long double a = profile.restrictions[i].peak_value;
        for (int c = 0; c < 3; ++c) acc[c] += transmitted * a * profile.colors[i][c];
        transmitted *= 1 - a;
    }
    return Vec3(static_cast<double>(acc[0]), static_cast<double>(acc[1]), static_cast<double>(acc[2]));
}

std::optional<Vec3> composite_normal_direct(const TransmittanceProfile &profile) {
    long double acc[3] = {0, 0, 0};
    long double transmitted = 1, total = 0;
    for (std::size_t i = 0; i < profile.size(); ++i) {
        const long double a = profile.restrictions[i].peak_value;
        const long double w = transmitted * a;
        total += w;
        for (int c = 0; c < 3; ++c) acc[c] += w * profile.normals[i][c];
        transmitted *= 1 - a;
    }
    const long double len = std::sqrt(acc[0] * acc[0] + acc[1] * acc[1] + acc[2] * acc[2]);
    if (!(total > 0) || !(len > 0)) return std::nullopt;
    return Vec3(static_cast<double>(acc[0] / len), static_cast<double>(acc[1] / len),
                static_cast<double>(acc[2] / len));
}

std::optional<double> expected_depth_direct(const TransmittanceProfile &profile) {
    long double num = 0, den = 0, transmitted = 1;
    for (std::size_t i = 0; i < profile.size(); ++i) {
        const long double a = profile.restrictions[i].peak_value;
        const long double w = transmitted * a;
        num += w * profile.restrictions[i].t_star;
        den += w;
        transmitted *= 1 - a;
    }
    if (den < 1e-6L) return std::nullopt;
    return static_cast<double>(num / den);
}

double normal_consistency_direct(const TransmittanceProfile &profile, const Vec3 &depth_normal) {
    long double sum = 0, transmitted = 1;
    for (std::size_t i = 0; i < profile.size(); ++i) {
        const long double a = profile.restrictions[i].peak_value;
        const long double dot = static_cast<long double>(profile.normals[i].x()) * depth_normal.x() +
                                static_cast<long double>(profile.normals[i].y()) * depth_normal.y() +
                                static_cast<long double>(profile.normals[i].z()) * depth_normal.z();
        sum += transmitted * a * (1 - dot);
        transmitted *= 1 - a;
    }
    return static_cast<double>(sum);
}

std::optional<double> grid_median(const TransmittanceProfile &profile, double lo, double hi,
                                  std::size_t samples) {
    const double h = (hi - lo) / static_cast<double>(samples - 1);
    double prev_t = lo;
    double prev = reference_transmittance(profile, lo);
    if (prev <= 0.5) return lo;
    for (std::size_t k = 1; k < samples; ++k) {
        const double t = lo + h * static_cast<double>(k);
        const double v = reference_transmittance(profile, t);
        if (v <= 0.5) return prev_t + (prev - 0.5) / (prev - v) * (t - prev_t);
        prev_t = t;
        prev = v;
    }
    return std::nullopt;
}

std::optional<Vec2> plane_transfer(const Camera &ref, const Camera &nbr, const Vec3 &n_ref,
                                   const Vec3 &p_ref, const Vec2 &u) {
    const Vec3 d = ref.intrinsics.inverse() * Vec3(u.x(), u.y(), 1.0);
    const double denom = n_ref.dot(d);
    if (std::abs(denom) < 1e-15) return std::nullopt;
    const Vec3 x_ref = d * (n_ref.dot(p_ref) / denom);
    const Vec3 world = ref.rotation.transpose() * (x_ref - ref.translation);
    const Vec3 x_nbr = nbr.rotation * world + nbr.translation;
    if (!(x_nbr.z() > 1e-12)) return std::nullopt;
    const Vec3 q = nbr.intrinsics * x_nbr;
    return Vec2(q.x() / q.z(), q.y() / q.z());
}

} // namespace solidsplat::oracle
