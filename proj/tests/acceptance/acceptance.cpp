// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
//
// Property-based acceptance suite. Each criterion prints one PASS/FAIL line
// with its measured value, threshold and runtime. A criterion that exceeds
// its runtime budget fails.
#include "fixtures.hpp"
#include "gradcheck.hpp"

#include <solidsplat/eval.hpp>
#include <solidsplat/io.hpp>
#include <solidsplat/optimize.hpp>
#include <solidsplat/oracle.hpp>
#include <solidsplat/render.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <limits>
#include <set>
#include <string>
#include <vector>

using namespace solidsplat;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    const char *name;
    double budget_seconds;
    std::function<Outcome()> run;
};

std::string format(const char *fmt, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), fmt, args...);
    return buf;
}

template <class T>
bool bytes_equal(const Image<T> &a, const Image<T> &b) {
    return a.width() == b.width() && a.height() == b.height() &&
           std::memcmp(a.data().data(), b.data().data(), sizeof(T) * a.size()) == 0;
}

bool buffers_equal(const DepthRenderResult &a, const DepthRenderResult &b) {
    return bytes_equal(a.median_depth, b.median_depth) && bytes_equal(a.valid_mask, b.valid_mask) &&
           bytes_equal(a.expected_depth, b.expected_depth) && bytes_equal(a.expected_mask, b.expected_mask) &&
           bytes_equal(a.step_median_depth, b.step_median_depth) && bytes_equal(a.step_mask, b.step_mask) &&
           bytes_equal(a.color, b.color) && bytes_equal(a.normal, b.normal) &&
           bytes_equal(a.normal_mask, b.normal_mask);
}

// Occupancy complement of the whole scene at x, from the dense oracle.
double vacancy_product(const Scene &scene, const Vec3 &x) {
    double p = 1.0;
    for (const auto &g : scene) p *= std::sqrt(1.0 - oracle::dense_gaussian_value(g, x));
    return p;
}

double mean_cycle(const DepthRenderResult &ra, const Camera &a, const DepthRenderResult &rb, const Camera &b,
                  DepthMode mode) {
    return cycle_reprojection_map(select_depth(ra, mode), a, select_depth(rb, mode), b).mean_error;
}

Camera crease_camera(const Vec3 &eye) {
    return look_at_camera(eye, Vec3(0, 0, 3), Vec3(0, -1, 0), 60, 60, 48, 48);
}

Outcome equivalence_theorem() {
    std::mt19937_64 rng(101);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        const auto rr = fixtures::random_ray_scene(rng, 1, 0.02, kMaxOpacity);
        if (rr.profile.empty()) return {false, "a configuration missed its Gaussian"};
        const Vec3 c = rr.scene[0].color;
        const Vec3 q = oracle::quadrature_color(rr.profile, c, oracle::covering_spec(rr.profile));
        worst = std::max(worst, (q - c * rr.profile.restrictions[0].peak_value).cwiseAbs().maxCoeff());
    }
    return {worst < 1e-6, format("max |quadrature - c g_peak| = %.2e over 100 configurations (< 1e-6)", worst)};
}

Outcome endpoint_identity() {
    std::mt19937_64 rng(102);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const auto rr = fixtures::random_ray_scene(rng, 1 + k % 12);
        double residual = 1.0;
        for (const auto &r : rr.profile.restrictions) residual *= 1.0 - r.peak_value;
        worst = std::max(worst, std::abs(total_transmittance(rr.profile, 1e9) - residual));
    }
    return {worst < 1e-12, format("max |T(inf) - prod(1 - alpha)| = %.2e over 1000 profiles (< 1e-12)", worst)};
}

Outcome continuity_monotonicity() {
    std::mt19937_64 rng(103);
    double worst_rise = 0.0, worst_jump = 0.0;
    std::vector<double> ts(10000), values(10000);
    for (int k = 0; k < 100; ++k) {
        const auto rr = fixtures::random_ray_scene(rng, 1 + k % 10);
        for (std::size_t j = 0; j < ts.size(); ++j) ts[j] = 8.0 * static_cast<double>(j) / 9999.0;
        total_transmittance(rr.profile, ts, values);
        for (std::size_t j = 1; j < ts.size(); ++j) worst_rise = std::max(worst_rise, values[j] - values[j - 1]);
        // The piecewise branches meet at every peak.
        for (const auto &r : rr.profile.restrictions) {
            const double lo = total_transmittance(rr.profile, std::nextafter(r.t_star, -1.0));
            const double hi = total_transmittance(rr.profile, std::nextafter(r.t_star, 1e300));
            worst_jump = std::max(worst_jump, std::abs(hi - lo));
        }
    }
    const bool ok = worst_rise <= 1e-12 && worst_jump <= 1e-12;
    return {ok, format("max rise %.2e, max jump at peaks %.2e on 10^4-point grids of 100 profiles (<= 1e-12)",
                       worst_rise, worst_jump)};
}

Outcome search_precision() {
    std::mt19937_64 rng(104);
    double worst = 0.0;
    int valid = 0;
    for (int k = 0; k < 50; ++k) {
        const auto rr = fixtures::random_crossing_ray(rng, 2 + k % 6);
        const auto init = initial_depth(rr.profile);
        const auto truth = oracle::numeric_median(rr.profile);
        if (!init || !truth) return {false, "random crossing profile without a median"};
        const auto m = median_depth(rr.profile, *init, 0.4, 5);
        if (!m.valid) continue;
        ++valid;
        worst = std::max(worst, std::abs(m.depth - *truth));
    }
    return {valid > 0 && worst <= 2.45e-5,
            format("max |median - oracle| = %.3e on %d/50 valid profiles (<= 2.45e-05)", worst, valid)};
}

Outcome gradient_correctness() {
    double worst = 0.0, identity = 0.0;
    int profiles = 0;
    for (std::uint64_t seed = 0; seed < 200 && profiles < 20; ++seed) {
        const Scene scene =
            synthetic::random_scene(4, Vec3::Constant(-0.3), Vec3::Constant(0.3), 0.2, 0.5, 1000 + seed);
        const auto report = tools::run_gradcheck(scene, {seed, 1, 1});
        if (report.rays_valid != 1) continue;
        std::set<std::size_t> ids;
        for (const auto &e : report.entries) ids.insert(e.gaussian);
        if (ids.size() != 4) continue;
        ++profiles;
        worst = std::max(worst, report.max_rel_error);
        identity = std::max(identity, report.max_identity_residual);
    }
    const bool ok = profiles == 20 && worst < 1e-3 && identity < 1e-8;
    return {ok, format("%d four-Gaussian profiles: max group rel error %.2e (< 1e-3), identity residual %.2e (< 1e-8)",
                       profiles, worst, identity)};
}

Outcome gradient_coverage() {
    std::mt19937_64 rng(106);
    std::size_t contributors = 0, missing = 0;
    int valid = 0;
    for (int k = 0; k < 200; ++k) {
        const auto rr = fixtures::random_crossing_ray(rng, 2 + k % 7);
        const auto m = median_depth(rr.profile, *initial_depth(rr.profile));
        if (!m.valid) continue;
        ++valid;
        GradientBuffer buf(rr.scene.size());
        depth_backward(rr.profile, rr.scene, m, 1.0, buf);
        const double t = refine_median(rr.profile, m.depth);
        for (const auto &r : rr.profile.restrictions) {
            if (ti(r, t) >= 1.0 - 1e-6) continue;
            ++contributors;
            const auto g = buf[r.gaussian_id].flatten();
            bool nonzero = false;
            for (std::size_t j = 0; j < 11; ++j) nonzero = nonzero || g[j] != 0.0;
            if (!nonzero) ++missing;
        }
    }
    return {valid > 0 && contributors > 0 && missing == 0,
            format("%zu of %zu contributing Gaussians on %d valid rays lack a gradient (0 allowed)", missing,
                   contributors, valid)};
}

Outcome isosurface_view_independence() {
    const Scene scene = synthetic::crease_scene();
    const Camera a = crease_camera(Vec3(0, 0, 0)), b = crease_camera(Vec3(0.4, 0.15, 0.1));
    const auto ra = render_view(scene, a), rb = render_view(scene, b);
    std::size_t ok = 0, total = 0;
    double worst = 0.0;
    const DepthRenderResult *renders[2] = {&ra, &rb};
    const Camera *cams[2] = {&a, &b};
    for (int s = 0; s < 2; ++s) {
        const auto &r = *renders[s];
        const Camera &c = *cams[s], &o = *cams[1 - s];
        for (int y = 0; y < c.height; ++y) {
            for (int x = 0; x < c.width; ++x) {
                if (!r.valid_mask(x, y)) continue;
                const Vec3 p = c.pixel_ray(x, y).at(r.median_depth(x, y));
                const auto u = o.project(p);
                if (!u || !o.contains(*u)) continue;
                const int px = static_cast<int>(std::lround(u->x())), py = static_cast<int>(std::lround(u->y()));
                if (px < 0 || py < 0 || px >= o.width || py >= o.height || !renders[1 - s]->valid_mask(px, py)) continue;
                ++total;
                const double e = std::abs(vacancy_product(scene, p) - 0.5);
                worst = std::max(worst, e);
                if (e < 1e-3) ++ok;
            }
        }
    }
    const double fraction = total ? static_cast<double>(ok) / static_cast<double>(total) : 0.0;
    return {total > 0 && fraction >= 0.99,
            format("%zu/%zu jointly valid points within 1e-3 of the 0.5 level (%.2f%%, >= 99%%), worst %.2e", ok,
                   total, 100.0 * fraction, worst)};
}

Outcome smoothness_contrast() {
    const Scene ramp = synthetic::translucent_ramp_scene();
    const Camera cam = look_at_camera(Vec3::Zero(), Vec3(0, 0, 1), Vec3(0, -1, 0), 80, 80, 64, 5);
    const auto r = render_view(ramp, cam);
    const int y = 2;
    double jump_stochastic = 0.0, jump_step = 0.0, rise = 0.0;
    int pairs = 0;
    for (int x = 1; x < cam.width; ++x) {
        if (!r.valid_mask(x, y) || !r.valid_mask(x - 1, y) || !r.step_mask(x, y) || !r.step_mask(x - 1, y)) continue;
        ++pairs;
        jump_stochastic = std::max(jump_stochastic, std::abs(r.median_depth(x, y) - r.median_depth(x - 1, y)));
        jump_step = std::max(jump_step, std::abs(r.step_median_depth(x, y) - r.step_median_depth(x - 1, y)));
        // Opacity grows along +x, so the surface moves towards the camera.
        const double z1 = r.median_depth(x, y) * cam.camera_direction(x, y).z();
        const double z0 = r.median_depth(x - 1, y) * cam.camera_direction(x - 1, y).z();
        rise = std::max(rise, z1 - z0);
    }
    const double precision = median_search_precision();
    const bool ok = pairs >= cam.width - 8 && jump_stochastic < jump_step && rise <= precision;
    return {ok, format("%d pixel pairs: max jump stochastic %.4f < step %.4f; max depth rise %.2e (<= %.2e)", pairs,
                       jump_stochastic, jump_step, rise, precision)};
}

Outcome consistency_ordering() {
    const Scene crease = synthetic::crease_scene();
    const Camera a = crease_camera(Vec3(0, 0, 0)), b = crease_camera(Vec3(0.4, 0.15, 0.1));
    const auto ra = render_view(crease, a), rb = render_view(crease, b);
    const double cs = mean_cycle(ra, a, rb, b, DepthMode::stochastic);
    const double cp = mean_cycle(ra, a, rb, b, DepthMode::step);
    const double ce = mean_cycle(ra, a, rb, b, DepthMode::expected);

    const synthetic::Sphere sphere;
    const Scene sph = synthetic::sphere_gaussians(sphere, 400);
    const auto cams = synthetic::camera_ring(8, Vec3::Zero(), 3.0, 0.5, 50, 48, 48);
    std::vector<DepthRenderResult> rs;
    for (const auto &c : cams) rs.push_back(render_view(sph, c));
    double ss = 0.0, sp = 0.0, se = 0.0;
    for (std::size_t i = 0; i < cams.size(); ++i) {
        const std::size_t j = (i + 1) % cams.size();
        ss += mean_cycle(rs[i], cams[i], rs[j], cams[j], DepthMode::stochastic) / 8.0;
        sp += mean_cycle(rs[i], cams[i], rs[j], cams[j], DepthMode::step) / 8.0;
        se += mean_cycle(rs[i], cams[i], rs[j], cams[j], DepthMode::expected) / 8.0;
    }
    const bool ok = cs <= cp && cs <= ce && ss <= sp && ss <= se;
    return {ok, format("mean cycle error (stochastic/step/expected): two-Gaussian %.5f/%.5f/%.5f, sphere %.3f/%.3f/%.3f",
                       cs, cp, ce, ss, sp, se)};
}

Outcome optimization_recovery() {
    const synthetic::Sphere sphere;
    const auto cams = synthetic::camera_ring(8, Vec3::Zero(), 3.0, 0.5, 50, 48, 48);
    std::vector<TrainView> views;
    std::vector<Mask> silhouettes;
    for (const auto &c : cams) {
        const auto v = synthetic::render_sphere(c, sphere);
        views.push_back({c, v.image, std::nullopt});
        silhouettes.push_back(v.depth.mask);
    }
    const auto reference = synthetic::sphere_points(sphere, 4000);
    // Fused points are restricted to the object silhouette of each view.
    auto fused_chamfer = [&](const Scene &scene) {
        std::vector<DepthView> depth_views;
        for (std::size_t i = 0; i < cams.size(); ++i) {
            auto d = select_depth(render_view(scene, cams[i]), DepthMode::stochastic);
            for (std::size_t k = 0; k < d.mask.size(); ++k) d.mask[k] = d.mask[k] && silhouettes[i][k];
            depth_views.push_back({std::move(d), cams[i]});
        }
        const auto points = fuse_depths(depth_views, {0.02});
        return points.empty() ? std::numeric_limits<double>::infinity() : chamfer(points, reference);
    };
    const Scene init = synthetic::random_scene(200, Vec3::Constant(-1.2), Vec3::Constant(1.2), 0.06, 0.18, 1);
    TrainConfig config;
    config.iterations = 2000;
    config.geometric_start_iter = 500;
    const double before = fused_chamfer(init);
    const auto result = train(init, views, config);
    const double after = fused_chamfer(result.scene);
    const double reduction = 1.0 - after / before;
    return {!result.aborted && reduction >= 0.5,
            format("fused Chamfer %.4f -> %.4f after %d iterations: %.1f%% reduction (>= 50%%)", before, after,
                   result.completed_iterations, 100.0 * reduction)};
}

Outcome determinism() {
    const Scene scene = synthetic::sphere_gaussians(synthetic::Sphere{}, 400);
    const Camera cam = synthetic::camera_ring(8, Vec3::Zero(), 3.0, 0.5, 50, 48, 48)[3];
    const Scene gc_scene = synthetic::random_scene(6, Vec3::Constant(-0.3), Vec3::Constant(0.3), 0.2, 0.5, 7);
    RenderOptions base;
    base.workers = 1;
    const auto first = render_view(scene, cam, base);
    const auto gc_first = tools::to_json(tools::run_gradcheck(gc_scene, {7, 24, 1}));
    bool render_ok = true, grad_ok = true;
    for (const int workers : {4, 8}) {
        RenderOptions o;
        o.workers = workers;
        render_ok = render_ok && buffers_equal(first, render_view(scene, cam, o));
        grad_ok = grad_ok && tools::to_json(tools::run_gradcheck(gc_scene, {7, 24, workers})) == gc_first;
    }
    return {render_ok && grad_ok, format("render buffers %s, gradcheck report %s across workers {1, 4, 8}",
                                         render_ok ? "identical" : "DIFFER", grad_ok ? "identical" : "DIFFERS")};
}

Outcome io_golden_files() {
    DepthMap d{Image<double>(2, 1, 0.0), Mask(2, 1, 0)};
    d.depth(0, 0) = 1.5;
    d.mask(0, 0) = 1;
    const std::string expected = std::string("Pf\n2 1\n-1.0\n") + std::string("\x00\x00\xc0\x3f\x00\x00\x80\x7f", 8);
    const bool pfm_ok = encode_pfm(d) == expected;

    const std::filesystem::path data = SOLIDSPLAT_TEST_DATA;
    const auto fixture = load_ply(data / "single_gaussian.ply").gaussians;
    const auto cams = load_cameras(data / "cameras.json");
    bool golden_ok = !cams.empty();
    for (std::size_t i = 0; i < cams.size(); ++i) {
        const auto depth = select_depth(render_view(fixture, cams[i]), DepthMode::stochastic);
        golden_ok = golden_ok && encode_pfm(depth) == read_file(data / format("golden/depth_%03zu.pfm", i));
    }

    const Scene scene = synthetic::random_scene(64, Vec3::Constant(-1), Vec3::Constant(1), 0.05, 0.5, 12);
    const auto encoded = encode_scene(scene);
    const auto bytes = serialize_ply(encoded);
    const auto back = parse_ply(bytes);
    const bool ply_ok = back.records == encoded.records && serialize_ply(back) == bytes;
    return {pfm_ok && golden_ok && ply_ok, format("PFM byte fixture %s, golden depth files %s, PLY round trip %s",
                                                  pfm_ok ? "exact" : "DIFFERS", golden_ok ? "exact" : "DIFFER",
                                                  ply_ok ? "exact" : "DIFFERS")};
}

const std::vector<Criterion> &criteria() {
    static const std::vector<Criterion> all{
        {1, "equivalence theorem", 10, equivalence_theorem},
        {2, "transmittance endpoint identity", 5, endpoint_identity},
        {3, "continuity and monotonicity", 10, continuity_monotonicity},
        {4, "median search precision", 10, search_precision},
        {5, "gradient correctness", 60, gradient_correctness},
        {6, "gradient coverage", 5, gradient_coverage},
        {7, "isosurface view independence", 30, isosurface_view_independence},
        {8, "smoothness contrast", 30, smoothness_contrast},
        {9, "consistency ordering", 60, consistency_ordering},
        {10, "optimization recovery", 900, optimization_recovery},
        {11, "determinism", 60, determinism},
        {12, "I/O golden files", 5, io_golden_files},
    };
    return all;
}

} // namespace

int main(int argc, char **argv) {
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
    int failures = 0;
    for (const auto &c : criteria()) {
        if (!selected.empty() && !selected.count(c.id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception &e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_budget = seconds < c.budget_seconds;
        const bool pass = o.pass && in_budget;
        failures += pass ? 0 : 1;
        std::printf("%s  %2d %-32s %s [%.2f s of %.0f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name,
                    o.detail.c_str(), seconds, c.budget_seconds, in_budget ? "" : ", over budget");
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
