// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "solidsplat/depth.hpp"
#include "solidsplat/image.hpp"

#include <limits>
#include <string_view>
#include <vector>

namespace solidsplat {

// Depth stored at background pixels; the masks are authoritative.
inline constexpr double kBackgroundDepth = std::numeric_limits<double>::max();

struct RenderOptions {
    GatherOptions gather;
    double bracket_radius = kDefaultBracketRadius;
    int traversals = kDefaultTraversals;
    int workers = 1;
};

/// Per-pixel buffers of one view. Depths are ray parameters along unit
/// directions from the camera center; normals are in world coordinates.
struct DepthRenderResult {
    Image<double> median_depth;
    Mask valid_mask;
    Image<double> expected_depth;
    Mask expected_mask;
    Image<double> step_median_depth;
    Mask step_mask;
    RgbImage color;
    Image<Vec3> normal;
    Mask normal_mask;

    int width() const { return median_depth.width(); }
    int height() const { return median_depth.height(); }
};

enum class DepthMode { stochastic, step, expected };

DepthMode parse_depth_mode(std::string_view name);
std::string_view to_string(DepthMode mode);

/// Gathers the profile of every pixel (row-major). Deterministic for any worker count.
std::vector<TransmittanceProfile> gather_view(const Scene &scene, const Camera &camera,
                                              const RenderOptions &options = {});

/// Fills all channels from pre-gathered profiles.
DepthRenderResult render_profiles(const std::vector<TransmittanceProfile> &profiles,
                                  const Camera &camera, const RenderOptions &options = {});

DepthRenderResult render_view(const Scene &scene, const Camera &camera,
                              const RenderOptions &options = {});

/// The depth channel and mask for `mode`.
DepthMap select_depth(const DepthRenderResult &result, DepthMode mode);

} // namespace solidsplat
