// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#include "solidsplat/render.hpp"
#include "solidsplat/parallel.hpp"

#include <string>

namespace solidsplat {

DepthMode parse_depth_mode(std::string_view name) {
    if (name == "stochastic") return DepthMode::stochastic;
    if (name == "step") return DepthMode::step;
    if (name == "expected") return DepthMode::expected;
    throw ValidationError("unknown depth mode '" + std::string(name) +
                          "' (expected stochastic, step or expected)");
}

std::string_view to_string(DepthMode mode) {
    switch (mode) {
    case DepthMode::stochastic: return "stochastic";
    case DepthMode::step: return "step";
    case DepthMode::expected: return "expected";
    }
    return "unknown";
}

std::vector<TransmittanceProfile> gather_view(const Scene &scene, const Camera &camera,
                                              const RenderOptions &options) {
    validate(camera);
    const int w = camera.width;
    const int h = camera.height;
    std::vector<TransmittanceProfile> profiles(static_cast<std::size_t>(w) * h);
    parallel_for(static_cast<std::size_t>(h), options.workers, [&](std::size_t y) {
        for (int x = 0; x < w; ++x) {
            const Ray ray = camera.pixel_ray(x, static_cast<double>(y));
            profiles[y * w + x] = gather_profile(scene, ray, options.gather);
        }
    });
    return profiles;
}

DepthRenderResult render_profiles(const std::vector<TransmittanceProfile> &profiles,
                                  const Camera &camera, const RenderOptions &options) {
    const int w = camera.width;
    const int h = camera.height;
    if (profiles.size() != static_cast<std::size_t>(w) * h) {
        throw ValidationError("render_profiles: profile count does not match the image size");
    }
    DepthRenderResult out;
    out.median_depth = Image<double>(w, h, kBackgroundDepth);
    out.valid_mask = Mask(w, h, 0);
    out.expected_depth = Image<double>(w, h, kBackgroundDepth);
    out.expected_mask = Mask(w, h, 0);
    out.step_median_depth = Image<double>(w, h, kBackgroundDepth);
    out.step_mask = Mask(w, h, 0);
    out.color = RgbImage(w, h, Vec3::Zero());
    out.normal = Image<Vec3>(w, h, Vec3::Zero());
    out.normal_mask = Mask(w, h, 0);

    parallel_for(static_cast<std::size_t>(h), options.workers, [&](std::size_t y) {
        for (int x = 0; x < w; ++x) {
            const TransmittanceProfile &p = profiles[y * w + x];
            const int xi = x;
            const int yi = static_cast<int>(y);
            if (p.empty()) continue;
            out.color(xi, yi) = composite_color(p);
            if (auto n = composite_normal(p)) {
                out.normal(xi, yi) = *n;
                out.normal_mask(xi, yi) = 1;
            }
            if (auto e = expected_depth(p)) {
                out.expected_depth(xi, yi) = *e;
                out.expected_mask(xi, yi) = 1;
            }
            if (auto t_init = initial_depth(p)) {
                out.step_median_depth(xi, yi) = *t_init;
                out.step_mask(xi, yi) = 1;
                const MedianDepth m =
                    median_depth(p, *t_init, options.bracket_radius, options.traversals);
                out.median_depth(xi, yi) = m.depth;
                out.valid_mask(xi, yi) = m.valid ? 1 : 0;
            }
        }
    });
    return out;
}

DepthRenderResult render_view(const Scene &scene, const Camera &camera,
                              const RenderOptions &options) {
    return render_profiles(gather_view(scene, camera, options), camera, options);
}

DepthMap select_depth(const DepthRenderResult &result, DepthMode mode) {
    switch (mode) {
    case DepthMode::stochastic: return {result.median_depth, result.valid_mask};
    case DepthMode::step: return {result.step_median_depth, result.step_mask};
    case DepthMode::expected: return {result.expected_depth, result.expected_mask};
    }
    throw ValidationError("unknown depth mode");
}

} // namespace solidsplat
