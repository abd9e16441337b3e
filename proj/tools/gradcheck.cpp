// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#include "gradcheck.hpp"

#include <solidsplat/grad.hpp>
#include <solidsplat/oracle.hpp>
#include <solidsplat/parallel.hpp>

#include <Eigen/Geometry>
#include <json.hpp>

#include <cmath>
#include <numbers>
#include <random>

namespace solidsplat::tools {

namespace {

constexpr int kTightTraversals = 16;
// Group norms below this are compared absolutely; FD round-off sits near 1e-9.
constexpr double kGradientFloor = 1e-5;

struct RaySample {
    Ray ray;
    std::vector<GradcheckEntry> entries;
    double identity_residual = 0.0;
    bool valid = false;
};

double tight_median(const Scene &scene, const Ray &ray, double t_init) {
    const auto p = gather_profile(scene, ray);
    const auto m = median_depth(p, t_init, kDefaultBracketRadius, kTightTraversals);
    if (!m.valid) throw NumericError("perturbed median left the search bracket");
    return m.depth;
}

double group_error(std::span<const double> a, std::span<const double> f, double &an, double &fn) {
    double diff = 0.0;
    an = 0.0;
    fn = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        diff += (a[k] - f[k]) * (a[k] - f[k]);
        an += a[k] * a[k];
        fn += f[k] * f[k];
    }
    an = std::sqrt(an);
    fn = std::sqrt(fn);
    const double denom = std::max({an, fn, kGradientFloor});
    return std::sqrt(diff) / denom;
}

void check_ray(const Scene &scene, RaySample &s, std::size_t ray_index) {
    const auto profile = gather_profile(scene, s.ray);
    const auto t_init = initial_depth(profile);
    if (!t_init) return;
    const auto median = median_depth(profile, *t_init);
    if (!median.valid) return;
    const double t_root = refine_median(profile, median.depth);
    GradientTerms terms;
    try {
        terms = depth_gradient_terms(profile, scene, t_root);
    } catch (const NumericError &) {
        return;
    }
    // The FD derivative is taken at the root of the tightened search.
    const double t_ref = tight_median(scene, s.ray, *t_init);
    const double slope = dT_dt_at_median(profile, t_root);
    const double total = total_transmittance(profile, t_root);
    for (std::size_t k = 0; k < terms.size(); ++k) {
        const auto &[id, analytic] = terms[k];
        const auto &r = profile.restrictions[k];
        const GaussianGrad dT = (total / ti(r, t_root)) *
                                dti_dtheta(r, scene[id], profile.ray, t_root);
        const auto a = analytic.flatten();
        const auto b = dT.flatten();
        for (std::size_t j = 0; j < 11; ++j) {
            s.identity_residual = std::max(s.identity_residual, std::abs(slope * a[j] + b[j]));
        }

        const GaussianPrimitive &g0 = scene[id];
        std::vector<double> x{g0.center.x(), g0.center.y(), g0.center.z(), g0.scales.x(),
                              g0.scales.y(), g0.scales.z(), g0.rotation[0], g0.rotation[1],
                              g0.rotation[2], g0.rotation[3], g0.opacity};
        Scene perturbed = scene;
        auto f = [&](std::span<const double> v) {
            perturbed[id] = make_gaussian(Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5]),
                                          Vec4(v[6], v[7], v[8], v[9]), v[10], g0.color);
            return tight_median(perturbed, s.ray, *t_init) - t_ref;
        };
        oracle::FdOptions fd_opts;
        fd_opts.relative_steps = true;
        const auto fd = oracle::fd_gradient(f, x, fd_opts);

        GaussianGrad projected = analytic;
        projected.rotation = project_to_tangent(g0.rotation, analytic.rotation);
        const auto an = projected.flatten();
        struct Group {
            const char *name;
            std::size_t begin, end;
        };
        for (const Group grp : {Group{"center", 0, 3}, Group{"scales", 3, 6}, Group{"rotation", 6, 10},
                                Group{"opacity", 10, 11}}) {
            GradcheckEntry e;
            e.ray = ray_index;
            e.gaussian = id;
            e.group = grp.name;
            e.rel_error = group_error(std::span(an).subspan(grp.begin, grp.end - grp.begin),
                                      std::span(fd).subspan(grp.begin, grp.end - grp.begin),
                                      e.analytic_norm, e.fd_norm);
            s.entries.push_back(e);
        }
    }
    s.valid = true;
}

} // namespace

GradcheckReport run_gradcheck(const Scene &scene, const GradcheckOptions &options) {
    if (scene.empty()) throw ValidationError("gradcheck: empty scene");
    if (options.rays < 1 || options.workers < 1) throw ValidationError("gradcheck: rays and workers must be positive");
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<RaySample> samples(static_cast<std::size_t>(options.rays));
    for (auto &s : samples) {
        const GaussianPrimitive &g = scene[static_cast<std::size_t>(rng() % scene.size())];
        Vec3 d(n(rng), n(rng), n(rng));
        d.normalize();
        Vec3 side = d.cross(std::abs(d.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY()).normalized();
        side = Eigen::AngleAxisd(2.0 * std::numbers::pi * u(rng), d) * side;
        const double offset = 0.3 * g.scales.minCoeff() * u(rng);
        const double back = 4.0 + 4.0 * g.scales.maxCoeff();
        s.ray = make_ray(g.center - back * d + offset * side, d);
    }
    parallel_for(samples.size(), options.workers,
                 [&](std::size_t i) { check_ray(scene, samples[i], i); });

    GradcheckReport report;
    for (auto &s : samples) {
        if (!s.valid) {
            ++report.rays_skipped;
            continue;
        }
        ++report.rays_valid;
        report.max_identity_residual = std::max(report.max_identity_residual, s.identity_residual);
        for (auto &e : s.entries) {
            report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
            report.entries.push_back(std::move(e));
        }
    }
    return report;
}

std::string to_json(const GradcheckReport &report) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto &e : report.entries) {
        entries.push_back({{"ray", e.ray}, {"gaussian", e.gaussian}, {"group", e.group},
                           {"analytic_norm", e.analytic_norm}, {"fd_norm", e.fd_norm},
                           {"rel_error", e.rel_error}});
    }
    const nlohmann::json doc{{"rays_valid", report.rays_valid},
                             {"rays_skipped", report.rays_skipped},
                             {"max_rel_error", report.max_rel_error},
                             {"max_identity_residual", report.max_identity_residual},
                             {"entries", entries}};
    return doc.dump(2) + "\n";
}

} // namespace solidsplat::tools
