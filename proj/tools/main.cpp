// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#include "gradcheck.hpp"

#include <solidsplat/eval.hpp>
#include <solidsplat/io.hpp>
#include <solidsplat/optimize.hpp>
#include <solidsplat/render.hpp>
#include <solidsplat/synthetic.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace solidsplat;

namespace {

std::string indexed(const char *stem, std::size_t i, const char *ext) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%03zu.%s", stem, i, ext);
    return buf;
}

struct RenderArgs {
    std::string scene, cameras, output;
    std::string depth_mode = "stochastic";
    double bracket_r = kDefaultBracketRadius;
    int traversals = kDefaultTraversals;
    int workers = 1;
    bool png = false;
};

RenderOptions render_options(double r, int traversals, int workers) {
    if (!(r > 0.0)) throw ValidationError("--bracket-r must be positive");
    if (traversals < 1) throw ValidationError("--traversals must be at least 1");
    if (workers < 1) throw ValidationError("--workers must be at least 1");
    RenderOptions o;
    o.bracket_radius = r;
    o.traversals = traversals;
    o.workers = workers;
    return o;
}

int run_render(const RenderArgs &a) {
    const auto mode = parse_depth_mode(a.depth_mode);
    const auto opts = render_options(a.bracket_r, a.traversals, a.workers);
    const Scene scene = load_ply(a.scene).gaussians;
    const auto cams = load_cameras(a.cameras);
    fs::create_directories(a.output);
    for (std::size_t i = 0; i < cams.size(); ++i) {
        const auto result = render_view(scene, cams[i], opts);
        const DepthMap depth = select_depth(result, mode);
        write_depth_pfm(fs::path(a.output) / indexed("depth", i, "pfm"), depth);
        if (a.png) {
            write_depth_png(fs::path(a.output) / indexed("depth", i, "png"), depth);
            write_rgb_png(fs::path(a.output) / indexed("color", i, "png"), result.color);
        }
    }
    save_cameras(fs::path(a.output) / "cameras.json", cams);
    std::cout << "rendered " << cams.size() << " view(s) to " << a.output << "\n";
    return 0;
}

struct OptimizeArgs {
    std::string views, config, output, init;
    std::size_t init_count = 200;
    bool quiet = false;
};

int run_optimize(const OptimizeArgs &a) {
    const fs::path dir(a.views);
    const auto cams = load_cameras(dir / "cameras.json");
    TrainConfig config = a.config.empty() ? TrainConfig{} : config_from_json(read_file(a.config));
    std::vector<TrainView> views;
    for (std::size_t i = 0; i < cams.size(); ++i) {
        TrainView v{cams[i], read_rgb_png(dir / indexed("image", i, "png")), std::nullopt};
        if (const auto d = dir / indexed("depth", i, "pfm"); fs::exists(d)) v.depth = read_depth_pfm(d);
        views.push_back(std::move(v));
    }
    Scene init;
    if (!a.init.empty()) {
        init = load_ply(a.init).gaussians;
    } else {
        // Centers spread over the region seen by the centre pixels of all views.
        Vec3 target = Vec3::Zero();
        double radius = 0.0;
        for (const auto &c : cams) target += c.center();
        target /= static_cast<double>(cams.size());
        for (const auto &c : cams) radius = std::max(radius, (c.center() - target).norm());
        const Vec3 half = Vec3::Constant(0.4 * radius);
        init = synthetic::random_scene(a.init_count, target - half, target + half, 0.02 * radius,
                                       0.06 * radius, config.seed);
    }
    auto log = [&](const IterationMetrics &m, const Scene &) {
        if (a.quiet || m.iteration % 50 != 0) return;
        std::printf("iter %5d view %2zu total %.6f photo %.6f normal %.6f mv %.6f cycle %.4f\n", m.iteration,
                    m.ref_view, m.loss.total, m.loss.photometric, m.loss.normal, m.loss.multiview,
                    m.loss.mean_cycle_error);
    };
    const TrainResult result = train(init, views, config, log);
    save_checkpoint(a.output, result, config);
    if (result.aborted) {
        std::cerr << "training aborted: " << result.abort_reason << "\n";
        return 2;
    }
    std::cout << "wrote " << a.output << " after " << result.completed_iterations << " iterations\n";
    return 0;
}

struct ConsistencyArgs {
    std::string depth_dir, scene, cameras, report, error_png;
    std::size_t ref = 0, nbr = 1;
    std::string depth_mode = "stochastic";
    double error_scale = 1.0;
    double bracket_r = kDefaultBracketRadius;
    int traversals = kDefaultTraversals;
    int workers = 1;
};

int run_consistency(const ConsistencyArgs &a) {
    std::vector<Camera> cams;
    DepthMap dr, dn;
    if (!a.depth_dir.empty()) {
        cams = load_cameras(fs::path(a.depth_dir) / "cameras.json");
    } else {
        if (a.scene.empty() || a.cameras.empty()) {
            throw ValidationError("eval-consistency needs --depth-dir or both --scene and --cameras");
        }
        cams = load_cameras(a.cameras);
    }
    if (a.ref >= cams.size() || a.nbr >= cams.size()) throw ValidationError("--ref/--nbr out of range");
    if (!a.depth_dir.empty()) {
        dr = read_depth_pfm(fs::path(a.depth_dir) / indexed("depth", a.ref, "pfm"));
        dn = read_depth_pfm(fs::path(a.depth_dir) / indexed("depth", a.nbr, "pfm"));
    } else {
        const auto mode = parse_depth_mode(a.depth_mode);
        const auto opts = render_options(a.bracket_r, a.traversals, a.workers);
        const Scene scene = load_ply(a.scene).gaussians;
        dr = select_depth(render_view(scene, cams[a.ref], opts), mode);
        dn = select_depth(render_view(scene, cams[a.nbr], opts), mode);
    }
    const auto rep = cycle_reprojection_map(dr, cams[a.ref], dn, cams[a.nbr]);
    const nlohmann::json doc{{"ref", a.ref},
                             {"nbr", a.nbr},
                             {"valid_pixels", rep.valid_pixels},
                             {"valid_fraction", rep.valid_fraction},
                             {"mean_error", rep.mean_error},
                             {"median_error", rep.median_error}};
    if (!a.report.empty()) write_file(a.report, doc.dump(2) + "\n");
    if (!a.error_png.empty()) write_scalar_png(a.error_png, rep.error, rep.mask, a.error_scale);
    std::cout << doc.dump(2) << "\n";
    return 0;
}

int run_chamfer(const std::string &cloud, const std::string &reference) {
    const auto a = load_cloud(cloud);
    const auto b = load_cloud(reference);
    const nlohmann::json doc{{"chamfer", chamfer(a, b)}, {"points", a.size()}, {"reference_points", b.size()}};
    std::cout << doc.dump(2) << "\n";
    return 0;
}

int run_gradcheck(const std::string &scene_path, const tools::GradcheckOptions &opts, bool json_out) {
    const Scene scene = load_ply(scene_path).gaussians;
    const auto rep = tools::run_gradcheck(scene, opts);
    if (json_out) {
        std::cout << tools::to_json(rep);
    } else {
        std::printf("rays checked: %zu (skipped %zu)\n", rep.rays_valid, rep.rays_skipped);
        std::printf("max implicit-identity residual: %.3e\n", rep.max_identity_residual);
        std::printf("max relative error: %.6e\n", rep.max_rel_error);
    }
    if (rep.rays_valid == 0) {
        std::cerr << "gradcheck: no ray produced a valid median depth\n";
        return 2;
    }
    return rep.max_rel_error < 1e-3 ? 0 : 2;
}

int run_fuse(const std::string &depth_dir, const std::string &output, double voxel, bool ascii) {
    const auto cams = load_cameras(fs::path(depth_dir) / "cameras.json");
    std::vector<DepthView> views;
    for (std::size_t i = 0; i < cams.size(); ++i) {
        views.push_back({read_depth_pfm(fs::path(depth_dir) / indexed("depth", i, "pfm")), cams[i]});
    }
    FuseOptions opts;
    opts.voxel_size = voxel;
    const auto cloud = fuse_depths(views, opts);
    save_cloud(output, cloud, ascii ? PlyFormat::ascii : PlyFormat::binary_little_endian);
    std::cout << "fused " << cloud.size() << " points into " << output << "\n";
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"solidsplat: stochastic-solid Gaussian depth rendering"};
    app.failure_message(CLI::FailureMessage::help);
    app.require_subcommand(1);

    RenderArgs ra;
    auto *render = app.add_subcommand("render", "Render depth maps of a scene");
    render->add_option("scene", ra.scene, "Scene PLY")->required()->check(CLI::ExistingFile);
    render->add_option("cameras", ra.cameras, "Cameras JSON")->required()->check(CLI::ExistingFile);
    render->add_option("output", ra.output, "Output directory")->required();
    render->add_option("--depth-mode", ra.depth_mode, "stochastic, step or expected")
        ->check(CLI::IsMember({"stochastic", "step", "expected"}));
    render->add_option("--bracket-r", ra.bracket_r, "Median search half-width");
    render->add_option("--traversals", ra.traversals, "Median search traversals");
    render->add_option("--workers", ra.workers, "Worker threads");
    render->add_flag("--png", ra.png, "Also write PNG previews");

    OptimizeArgs oa;
    auto *optimize = app.add_subcommand("optimize", "Fit Gaussians to posed images");
    optimize->add_option("views", oa.views, "Directory with cameras.json and image_NNN.png")
        ->required()
        ->check(CLI::ExistingDirectory);
    optimize->add_option("config", oa.config, "Training config JSON")->required()->check(CLI::ExistingFile);
    optimize->add_option("output", oa.output, "Output checkpoint PLY")->required();
    optimize->add_option("--init", oa.init, "Initial scene PLY")->check(CLI::ExistingFile);
    optimize->add_option("--init-count", oa.init_count, "Random initial Gaussians");
    optimize->add_flag("--quiet", oa.quiet, "Suppress progress lines");

    ConsistencyArgs ca;
    auto *consistency = app.add_subcommand("eval-consistency", "Cycle reprojection error between two views");
    consistency->add_option("--depth-dir", ca.depth_dir, "Directory of rendered depth_NNN.pfm")
        ->check(CLI::ExistingDirectory);
    consistency->add_option("--scene", ca.scene, "Scene PLY")->check(CLI::ExistingFile);
    consistency->add_option("--cameras", ca.cameras, "Cameras JSON")->check(CLI::ExistingFile);
    consistency->add_option("--ref", ca.ref, "Reference view index");
    consistency->add_option("--nbr", ca.nbr, "Neighbour view index");
    consistency->add_option("--depth-mode", ca.depth_mode, "stochastic, step or expected")
        ->check(CLI::IsMember({"stochastic", "step", "expected"}));
    consistency->add_option("--bracket-r", ca.bracket_r, "Median search half-width");
    consistency->add_option("--traversals", ca.traversals, "Median search traversals");
    consistency->add_option("--workers", ca.workers, "Worker threads");
    consistency->add_option("--report", ca.report, "Write the JSON report here");
    consistency->add_option("--error-png", ca.error_png, "Write an error map PNG");
    consistency->add_option("--error-scale", ca.error_scale, "Error (pixels) mapped to white");

    std::string cloud, reference;
    auto *cham = app.add_subcommand("eval-chamfer", "Chamfer distance between two point clouds");
    cham->add_option("cloud", cloud, "Cloud PLY")->required()->check(CLI::ExistingFile);
    cham->add_option("reference", reference, "Reference cloud PLY")->required()->check(CLI::ExistingFile);

    std::string gc_scene;
    tools::GradcheckOptions gc;
    bool gc_json = false;
    auto *gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of median-depth gradients");
    gradcheck->add_option("scene", gc_scene, "Scene PLY")->required()->check(CLI::ExistingFile);
    gradcheck->add_option("--seed", gc.seed, "Ray sampling seed");
    gradcheck->add_option("--rays", gc.rays, "Number of random rays");
    gradcheck->add_option("--workers", gc.workers, "Worker threads");
    gradcheck->add_flag("--json", gc_json, "Print the full report as JSON");

    std::string fuse_dir, fuse_out;
    double voxel = 0.0;
    bool ascii = false;
    auto *fuse = app.add_subcommand("fuse", "Fuse rendered depth maps into a point cloud");
    fuse->add_option("depth_dir", fuse_dir, "Directory with cameras.json and depth_NNN.pfm")
        ->required()
        ->check(CLI::ExistingDirectory);
    fuse->add_option("output", fuse_out, "Output cloud PLY")->required();
    fuse->add_option("--voxel", voxel, "Voxel size for down-sampling (0 keeps all points)");
    fuse->add_flag("--ascii", ascii, "Write ASCII PLY");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*render) return run_render(ra);
        if (*optimize) return run_optimize(oa);
        if (*consistency) return run_consistency(ca);
        if (*cham) return run_chamfer(cloud, reference);
        if (*gradcheck) return run_gradcheck(gc_scene, gc, gc_json);
        if (*fuse) return run_fuse(fuse_dir, fuse_out, voxel, ascii);
    } catch (const NumericError &e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 2;
    } catch (const Error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
