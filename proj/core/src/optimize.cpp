// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#include "solidsplat/optimize.hpp"
#include "solidsplat/io.hpp"
#include "solidsplat/parallel.hpp"

#include <json.hpp>

#include <cmath>
#include <random>
#include <array>
#include <cstdio>
#include <limits>

namespace solidsplat {

void TrainConfig::validate() const {
    if (iterations < 0) throw ValidationError("iterations must be non-negative");
    const auto &lr = learning_rates;
    for (double v : {lr.center, lr.scales, lr.rotation, lr.opacity, lr.color}) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("learning rates must be finite and non-negative");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must lie in [0, 1)");
    if (!(beta2 > 0.0 && beta2 < 1.0)) throw ValidationError("beta2 must lie in (0, 1)");
    if (geometric_start_iter < 0 || geometric_start_iter > iterations) {
        throw ValidationError("geometric_start_iter must lie in [0, iterations]");
    }
    if (!(depth_weight >= 0.0)) throw ValidationError("depth_weight must be non-negative");
    if (workers < 1) throw ValidationError("workers must be at least 1");
    if (!(render.bracket_radius > 0.0) || render.traversals < 1) {
        throw ValidationError("bracket radius must be positive and traversals at least 1");
    }
    weights.validate();
}

namespace {

using nlohmann::json;

json to_json(const TrainConfig &c) {
    const auto &lr = c.learning_rates;
    return json{
        {"iterations", c.iterations},
        {"learning_rates",
         {{"center", lr.center}, {"scales", lr.scales}, {"rotation", lr.rotation},
          {"opacity", lr.opacity}, {"color", lr.color}}},
        {"optimizer", c.optimizer == OptimizerKind::adam ? "adam" : "sgd"},
        {"momentum", c.momentum},
        {"beta2", c.beta2},
        {"geometric_start_iter", c.geometric_start_iter},
        {"weights",
         {{"lambda", c.weights.lambda}, {"normal", c.weights.normal},
          {"photometric_consistency", c.weights.photometric_consistency},
          {"geometric_consistency", c.weights.geometric_consistency}}},
        {"depth_weight", c.depth_weight},
        {"seed", c.seed},
        {"workers", c.workers},
        {"bracket_radius", c.render.bracket_radius},
        {"traversals", c.render.traversals},
        {"patch_size", c.multiview.patch_size},
    };
}

template <class T>
void read_key(const json &obj, const std::string &path, const char *key, T &out) {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception &) {
        throw ValidationError(path + key + ": wrong type");
    }
}

void reject_unknown(const json &obj, const std::string &path, std::initializer_list<const char *> keys) {
    for (const auto &[k, v] : obj.items()) {
        bool known = false;
        for (const char *key : keys) known = known || k == key;
        if (!known) throw ValidationError(path + k + ": unknown key");
    }
}

} // namespace

std::string config_to_json(const TrainConfig &config) { return to_json(config).dump(2) + "\n"; }

TrainConfig config_from_json(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error &e) {
        throw ParseError(std::string("config JSON: ") + e.what(), e.byte);
    }
    if (!doc.is_object()) throw ValidationError("config: expected an object");
    reject_unknown(doc, "config.", {"iterations", "learning_rates", "optimizer", "momentum", "beta2",
                                    "geometric_start_iter", "weights", "depth_weight", "seed",
                                    "workers", "bracket_radius", "traversals", "patch_size"});
    TrainConfig c;
    read_key(doc, "config.", "iterations", c.iterations);
    // A shorter run keeps the default schedule proportion unless overridden.
    c.geometric_start_iter = std::min(c.geometric_start_iter, c.iterations);
    if (const auto it = doc.find("learning_rates"); it != doc.end()) {
        if (!it->is_object()) throw ValidationError("config.learning_rates: expected an object");
        reject_unknown(*it, "config.learning_rates.", {"center", "scales", "rotation", "opacity", "color"});
        auto &lr = c.learning_rates;
        read_key(*it, "config.learning_rates.", "center", lr.center);
        read_key(*it, "config.learning_rates.", "scales", lr.scales);
        read_key(*it, "config.learning_rates.", "rotation", lr.rotation);
        read_key(*it, "config.learning_rates.", "opacity", lr.opacity);
        read_key(*it, "config.learning_rates.", "color", lr.color);
    }
    std::string optimizer = "adam";
    read_key(doc, "config.", "optimizer", optimizer);
    if (optimizer == "adam") c.optimizer = OptimizerKind::adam;
    else if (optimizer == "sgd") c.optimizer = OptimizerKind::sgd;
    else throw ValidationError("config.optimizer: expected 'adam' or 'sgd'");
    read_key(doc, "config.", "momentum", c.momentum);
    read_key(doc, "config.", "beta2", c.beta2);
    read_key(doc, "config.", "geometric_start_iter", c.geometric_start_iter);
    if (const auto it = doc.find("weights"); it != doc.end()) {
        if (!it->is_object()) throw ValidationError("config.weights: expected an object");
        reject_unknown(*it, "config.weights.", {"lambda", "normal", "photometric_consistency", "geometric_consistency"});
        read_key(*it, "config.weights.", "lambda", c.weights.lambda);
        read_key(*it, "config.weights.", "normal", c.weights.normal);
        read_key(*it, "config.weights.", "photometric_consistency", c.weights.photometric_consistency);
        read_key(*it, "config.weights.", "geometric_consistency", c.weights.geometric_consistency);
    }
    read_key(doc, "config.", "depth_weight", c.depth_weight);
    read_key(doc, "config.", "seed", c.seed);
    read_key(doc, "config.", "workers", c.workers);
    read_key(doc, "config.", "bracket_radius", c.render.bracket_radius);
    read_key(doc, "config.", "traversals", c.render.traversals);
    read_key(doc, "config.", "patch_size", c.multiview.patch_size);
    c.render.workers = c.workers;
    c.validate();
    return c;
}

std::uint64_t config_hash(const TrainConfig &config) {
    const std::string s = to_json(config).dump();
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

namespace {

void check_finite(double v, const char *what) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + what + " loss");
}

} // namespace

LossTerms training_loss(const Scene &scene, const TrainView &ref, const TrainView *nbr,
                        const TrainConfig &config, bool geometric, GradientBuffer *grads) {
    const Camera &cam = ref.camera;
    const int w = cam.width;
    const int h = cam.height;
    RenderOptions ropt = config.render;
    ropt.workers = config.workers;
    const auto profiles = gather_view(scene, cam, ropt);
    const DepthRenderResult render = render_profiles(profiles, cam, ropt);
    const bool with_grad = grads != nullptr;

    LossTerms terms;
    const PhotometricLoss photo = photometric_loss(render.color, ref.image, config.weights.lambda, with_grad);
    terms.photometric = photo.value;
    check_finite(photo.value, "photometric");

    double residual = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!render.valid_mask(x, y)) continue;
            ++terms.valid_pixels;
            residual += std::abs(total_transmittance(profiles[y * w + x], render.median_depth(x, y)) - 0.5);
        }
    }
    if (terms.valid_pixels) terms.median_residual = residual / static_cast<double>(terms.valid_pixels);

    const DepthMap median{render.median_depth, render.valid_mask};
    std::optional<NormalMap> depth_normals;
    std::size_t normal_pixels = 0;
    const bool use_normal = geometric && config.weights.normal > 0.0;
    if (use_normal) {
        depth_normals = depth_to_normal(median, cam);
        double sum = 0.0;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (!depth_normals->mask(x, y) || profiles[y * w + x].empty()) continue;
                ++normal_pixels;
                const Vec3 n_cam_facing = depth_normals->normal(x, y);
                sum += normal_consistency_loss(profiles[y * w + x], n_cam_facing);
            }
        }
        if (normal_pixels) terms.normal = sum / static_cast<double>(normal_pixels);
        check_finite(terms.normal, "normal");
    }

    std::optional<MultiViewLoss> mv;
    if (geometric && nbr && (config.weights.photometric_consistency > 0.0 ||
                             config.weights.geometric_consistency > 0.0)) {
        const DepthRenderResult render_nbr = render_view(scene, nbr->camera, ropt);
        mv = multiview_loss({cam, ref.image}, {nbr->camera, nbr->image}, render, render_nbr,
                            config.weights, config.multiview, with_grad);
        terms.multiview = mv->value;
        terms.mean_cycle_error = mv->mean_cycle_error;
        check_finite(terms.multiview, "multi-view");
    }

    std::size_t depth_pixels = 0;
    const bool use_depth = config.depth_weight > 0.0 && ref.depth.has_value();
    if (use_depth) {
        double sum = 0.0;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (!render.valid_mask(x, y) || !ref.depth->mask(x, y)) continue;
                ++depth_pixels;
                sum += std::abs(render.median_depth(x, y) - ref.depth->depth(x, y));
            }
        }
        if (depth_pixels) terms.depth = sum / static_cast<double>(depth_pixels);
        check_finite(terms.depth, "depth");
    }

    terms.total = terms.photometric + config.weights.normal * terms.normal + terms.multiview +
                  config.depth_weight * terms.depth;
    if (!with_grad) return terms;

    if (grads->size() != scene.size()) *grads = GradientBuffer(scene.size());
    ChunkedGradients chunks(2 * static_cast<std::size_t>(h));
    const double normal_scale = normal_pixels ? config.weights.normal / static_cast<double>(normal_pixels) : 0.0;
    Image<Vec3> d_depth_normal(w, h, Vec3::Zero());

    // Color, composite-normal and normal-consistency paths.
    parallel_for(static_cast<std::size_t>(h), config.workers, [&](std::size_t yy) {
        const int y = static_cast<int>(yy);
        GradientTerms &out = chunks.chunk(yy);
        for (int x = 0; x < w; ++x) {
            const TransmittanceProfile &p = profiles[yy * w + x];
            if (p.empty()) continue;
            const auto weights = compositing_weights(p);
            composite_color_backward(p, scene, weights, photo.gradient(x, y), out);
            if (mv && render.normal_mask(x, y) && !mv->grad_normal(x, y).isZero(0.0)) {
                composite_normal_backward(p, scene, weights, mv->grad_normal(x, y), out);
            }
            if (use_normal && depth_normals->mask(x, y)) {
                d_depth_normal(x, y) =
                    normal_consistency_backward(p, scene, depth_normals->normal(x, y), normal_scale, out);
            }
        }
    });

    Image<double> d_depth(w, h, 0.0);
    if (use_normal) d_depth = depth_to_normal_backward(median, cam, *depth_normals, d_depth_normal);
    if (mv) {
        for (std::size_t i = 0; i < d_depth.size(); ++i) d_depth[i] += mv->grad_depth[i];
    }
    if (use_depth && depth_pixels) {
        const double s = config.depth_weight / static_cast<double>(depth_pixels);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (!render.valid_mask(x, y) || !ref.depth->mask(x, y)) continue;
                const double diff = render.median_depth(x, y) - ref.depth->depth(x, y);
                d_depth(x, y) += diff > 0 ? s : (diff < 0 ? -s : 0.0);
            }
        }
    }

    // Depth path through the implicit median gradient.
    std::vector<DepthBackwardStats> row_stats(h);
    parallel_for(static_cast<std::size_t>(h), config.workers, [&](std::size_t yy) {
        const int y = static_cast<int>(yy);
        GradientTerms &out = chunks.chunk(h + yy);
        for (int x = 0; x < w; ++x) {
            const double up = d_depth(x, y);
            if (up == 0.0 || !render.valid_mask(x, y)) continue;
            depth_backward(profiles[yy * w + x], scene, MedianDepth{render.median_depth(x, y), true}, up,
                           out, &row_stats[yy]);
        }
    });
    for (const auto &s : row_stats) {
        terms.depth_stats.accumulated += s.accumulated;
        terms.depth_stats.masked += s.masked;
        terms.depth_stats.degenerate += s.degenerate;
    }
    chunks.reduce_into(*grads);
    return terms;
}

std::vector<std::size_t> nearest_neighbours(std::span<const TrainView> views) {
    std::vector<std::size_t> out(views.size(), 0);
    for (std::size_t i = 0; i < views.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < views.size(); ++j) {
            if (j == i) continue;
            const double d = (views[i].camera.center() - views[j].camera.center()).norm();
            if (d < best) {
                best = d;
                out[i] = j;
            }
        }
    }
    return out;
}

namespace {

// Unconstrained coordinates: center(3), log-scale(3), quaternion(4), logit opacity, color(3).
constexpr std::size_t kParams = 14;

struct OptimizerState {
    std::vector<double> m, v;
    int step = 0;
};

double group_rate(const LearningRates &lr, std::size_t k) {
    if (k < 3) return lr.center;
    if (k < 6) return lr.scales;
    if (k < 10) return lr.rotation;
    if (k < 11) return lr.opacity;
    return lr.color;
}

// Gradient with respect to the unconstrained coordinates.
std::array<double, kParams> reparam_gradient(const GaussianPrimitive &g, const GaussianGrad &d) {
    std::array<double, kParams> out{};
    for (int k = 0; k < 3; ++k) out[k] = d.center[k];
    for (int k = 0; k < 3; ++k) out[3 + k] = d.scales[k] * g.scales[k];
    const Vec4 dq = project_to_tangent(g.rotation, d.rotation);
    for (int k = 0; k < 4; ++k) out[6 + k] = dq[k];
    out[10] = d.opacity * g.opacity * (1.0 - g.opacity / kMaxOpacity);
    for (int k = 0; k < 3; ++k) out[11 + k] = d.color[k];
    return out;
}

GaussianPrimitive apply_step(const GaussianPrimitive &g, const std::array<double, kParams> &step) {
    GaussianPrimitive n = g;
    bool any = false;
    for (double s : step) any = any || s != 0.0;
    if (!any) return n;
    for (int k = 0; k < 3; ++k) n.center[k] -= step[k];
    for (int k = 0; k < 3; ++k) {
        if (step[3 + k] != 0.0) n.scales[k] = std::clamp(g.scales[k] * std::exp(-step[3 + k]), 1e-6, 1e3);
    }
    if (step[6] != 0.0 || step[7] != 0.0 || step[8] != 0.0 || step[9] != 0.0) {
        Vec4 q = g.rotation;
        for (int k = 0; k < 4; ++k) q[k] -= step[6 + k];
        n.rotation = q.normalized();
    }
    if (step[10] != 0.0) {
        const double o = g.opacity / kMaxOpacity;
        const double logit = std::log(o / (1.0 - o)) - step[10];
        const double c = std::clamp(logit, -30.0, 30.0);
        n.opacity = kMaxOpacity / (1.0 + std::exp(-c));
    }
    for (int k = 0; k < 3; ++k) {
        if (step[11 + k] != 0.0) n.color[k] = std::clamp(g.color[k] - step[11 + k], 0.0, 1.0);
    }
    validate(n);
    return n;
}

} // namespace

TrainResult train(const Scene &initial, std::span<const TrainView> views, const TrainConfig &config,
                  const TrainCallback &callback) {
    config.validate();
    if (initial.empty()) throw ValidationError("train: empty scene");
    if (views.empty()) throw ValidationError("train: no views");
    for (const auto &v : views) {
        validate(v.camera);
        if (v.image.width() != v.camera.width || v.image.height() != v.camera.height) {
            throw ValidationError("train: image and camera dimensions differ");
        }
    }
    const auto nbrs = nearest_neighbours(views);
    std::mt19937_64 rng(config.seed);

    TrainResult result;
    result.scene = initial;
    OptimizerState state;
    state.m.assign(initial.size() * kParams, 0.0);
    state.v.assign(initial.size() * kParams, 0.0);
    GradientBuffer grads(initial.size());

    for (int it = 0; it < config.iterations; ++it) {
        const std::size_t ref = static_cast<std::size_t>(rng() % views.size());
        const std::size_t nbr = nbrs[ref];
        const bool geometric = it >= config.geometric_start_iter;
        const TrainView *nbr_view = views.size() >= 2 ? &views[nbr] : nullptr;
        IterationMetrics metrics{it, ref, nbr, {}};
        Scene next;
        try {
            grads.clear();
            metrics.loss = training_loss(result.scene, views[ref], nbr_view, config, geometric, &grads);
            ++state.step;
            next = result.scene;
            for (std::size_t i = 0; i < next.size(); ++i) {
                const auto d = reparam_gradient(result.scene[i], grads[i]);
                std::array<double, kParams> step{};
                for (std::size_t k = 0; k < kParams; ++k) {
                    const double lr = group_rate(config.learning_rates, k);
                    double &m = state.m[i * kParams + k];
                    double &v = state.v[i * kParams + k];
                    if (config.optimizer == OptimizerKind::adam) {
                        m = config.momentum * m + (1.0 - config.momentum) * d[k];
                        v = config.beta2 * v + (1.0 - config.beta2) * d[k] * d[k];
                        const double mh = m / (1.0 - std::pow(config.momentum, state.step));
                        const double vh = v / (1.0 - std::pow(config.beta2, state.step));
                        step[k] = lr * mh / (std::sqrt(vh) + 1e-15);
                    } else {
                        m = config.momentum * m + d[k];
                        step[k] = lr * m;
                    }
                    if (!std::isfinite(step[k])) throw NumericError("non-finite parameter update");
                }
                next[i] = apply_step(result.scene[i], step);
            }
        } catch (const NumericError &e) {
            result.aborted = true;
            result.abort_reason = "iteration " + std::to_string(it) + ": " + e.what();
            break;
        }
        result.scene = std::move(next);
        result.log.push_back(metrics);
        result.completed_iterations = it + 1;
        if (callback) callback(metrics, result.scene);
    }
    return result;
}

void save_checkpoint(const std::filesystem::path &path, const TrainResult &result,
                     const TrainConfig &config) {
    save_ply(path, encode_scene(result.scene));
    json history = json::array();
    for (const auto &m : result.log) {
        history.push_back({{"iteration", m.iteration},
                           {"ref_view", m.ref_view},
                           {"total", m.loss.total},
                           {"photometric", m.loss.photometric},
                           {"normal", m.loss.normal},
                           {"multiview", m.loss.multiview},
                           {"depth", m.loss.depth},
                           {"mean_cycle_error", m.loss.mean_cycle_error},
                           {"median_residual", m.loss.median_residual}});
    }
    char hash[17];
    std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(config_hash(config)));
    const json meta{{"iteration", result.completed_iterations},
                    {"aborted", result.aborted},
                    {"abort_reason", result.abort_reason},
                    {"config_hash", hash},
                    {"config", to_json(config)},
                    {"loss_history", history}};
    write_file(path.string() + ".json", meta.dump(2) + "\n");
}

} // namespace solidsplat
