// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "solidsplat/grad.hpp"
#include "solidsplat/losses.hpp"
#include "solidsplat/render.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace solidsplat {

/// Step sizes per parameter group. Scales are stepped in log space and
/// opacities in logit space.
struct LearningRates {
    double center = 4e-3;
    double scales = 1e-2;
    double rotation = 5e-3;
    double opacity = 5e-2;
    double color = 1e-2;
};

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
    int iterations = 2000;
    LearningRates learning_rates;
    OptimizerKind optimizer = OptimizerKind::adam;
    /// SGD momentum, or Adam's first-moment decay.
    double momentum = 0.9;
    double beta2 = 0.999;
    /// Iteration at which normal and multi-view terms switch on.
    int geometric_start_iter = 500;
    LossWeights weights;
    /// Optional L1 supervision of the median depth by view ground truth.
    double depth_weight = 0.0;
    std::uint64_t seed = 0;
    int workers = 1;
    RenderOptions render;
    MultiViewOptions multiview;

    void validate() const;
};

std::string config_to_json(const TrainConfig &config);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig config_from_json(std::string_view json_text);
/// FNV-1a hash of the canonical JSON form.
std::uint64_t config_hash(const TrainConfig &config);

struct TrainView {
    Camera camera;
    RgbImage image;
    std::optional<DepthMap> depth;
};

struct LossTerms {
    double total = 0.0;
    double photometric = 0.0;
    double normal = 0.0;
    double multiview = 0.0;
    double depth = 0.0;
    double mean_cycle_error = 0.0;
    /// Mean |T(t_med) - 0.5| over valid pixels of the reference view.
    double median_residual = 0.0;
    std::size_t valid_pixels = 0;
    DepthBackwardStats depth_stats;
};

/// Loss of one reference view (optionally against a neighbour) and its
/// gradient with respect to the natural Gaussian parameters.
LossTerms training_loss(const Scene &scene, const TrainView &ref, const TrainView *nbr,
                        const TrainConfig &config, bool geometric, GradientBuffer *grads);

struct IterationMetrics {
    int iteration = 0;
    std::size_t ref_view = 0;
    std::size_t nbr_view = 0;
    LossTerms loss;
};

struct TrainResult {
    Scene scene;
    std::vector<IterationMetrics> log;
    int completed_iterations = 0;
    bool aborted = false;
    std::string abort_reason;
};

using TrainCallback = std::function<void(const IterationMetrics &, const Scene &)>;

/// Nearest other view by camera-center distance, for every view.
std::vector<std::size_t> nearest_neighbours(std::span<const TrainView> views);

TrainResult train(const Scene &initial, std::span<const TrainView> views, const TrainConfig &config,
                  const TrainCallback &callback = {});

/// Writes the scene PLY at `path` and a JSON sidecar at `path` + ".json".
void save_checkpoint(const std::filesystem::path &path, const TrainResult &result,
                     const TrainConfig &config);

} // namespace solidsplat
