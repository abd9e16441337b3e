// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#include "fixtures.hpp"

#include <solidsplat/depth.hpp>
#include <solidsplat/oracle.hpp>
#include <solidsplat/render.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace solidsplat;
using fixtures::profile_of;

namespace {

// o = 0.8, unit isotropic scales (a = 1), hit through the center at t = 5.
TransmittanceProfile single_ray_profile() {
    return profile_of({{5.0, 0.8, 1.0}});
}

const double kSingleRayMedian = 5.0 - std::sqrt(std::log(16.0 / 15.0));

} // namespace

TEST(InitialDepth, FirstStepCrosses) {
    EXPECT_EQ(initial_depth(profile_of({{5.0, 0.8}})), 5.0);
}

TEST(InitialDepth, SecondStepCrosses) {
    EXPECT_EQ(initial_depth(profile_of({{3.0, 0.4}, {7.0, 0.4}})), 7.0);
}

TEST(InitialDepth, ThreeEqualAlphasMatchExactPrefixProducts) {
    const std::vector<oracle::RationalAlpha> exact{{3, 10}, {3, 10}, {3, 10}};
    const auto index = oracle::step_crossing_index(exact);
    ASSERT_TRUE(index.has_value());
    // 0.7 * 0.7 = 0.49 already reaches 0.5.
    ASSERT_EQ(*index, 1u);
    const auto p = profile_of({{2.0, 0.3}, {4.0, 0.3}, {6.0, 0.3}});
    EXPECT_EQ(initial_depth(p), p.restrictions[*index].t_star);
}

TEST(InitialDepth, NoneWhenResidualStaysAboveHalf) {
    EXPECT_FALSE(initial_depth(profile_of({{5.0, 0.4}})).has_value());
    EXPECT_FALSE(initial_depth(TransmittanceProfile{}).has_value());
}

TEST(MedianDepth, SingleGaussianClosedForm) {
    const auto p = single_ray_profile();
    const auto m = median_depth(p, *initial_depth(p));
    ASSERT_TRUE(m.valid);
    EXPECT_NEAR(m.depth, kSingleRayMedian, 0.5 * median_search_precision());
    const auto ref = oracle::numeric_median(p);
    ASSERT_TRUE(ref.has_value());
    EXPECT_NEAR(*ref, kSingleRayMedian, 1e-10);
    EXPECT_NEAR(m.depth, 4.7460, 1e-4);
}

TEST(MedianDepth, SameSideEndpointsAreInvalid) {
    // Peak 0.2: T stays above 0.8 on [t_init - r, t_init + r].
    const auto p = profile_of({{5.0, 0.2, 4.0}});
    EXPECT_GT(total_transmittance(p, 5.4), 0.5);
    const auto m = median_depth(p, 5.0);
    EXPECT_FALSE(m.valid);
    EXPECT_EQ(m.depth, 5.0);
}

TEST(MedianDepth, BracketWidthAndStraddle) {
    std::mt19937_64 rng(1);
    for (int k = 0; k < 30; ++k) {
        const auto rr = fixtures::random_crossing_ray(rng, 4);
        const auto t_init = initial_depth(rr.profile);
        ASSERT_TRUE(t_init.has_value());
        std::vector<SearchBracket> trace;
        const auto m = median_depth(rr.profile, *t_init, 0.4, 5, &trace);
        if (!m.valid) {
            EXPECT_TRUE(trace.empty());
            continue;
        }
        ASSERT_EQ(trace.size(), 5u);
        double width = 0.8;
        for (const auto &b : trace) {
            width /= 8.0;
            EXPECT_NEAR(b.hi - b.lo, width, 1e-12);
            EXPECT_GE(b.t_lo, 0.5);
            EXPECT_LE(b.t_hi, 0.5);
        }
        EXPECT_NEAR(trace.back().hi - trace.back().lo, median_search_precision(), 1e-15);
        EXPECT_GE(m.depth, *t_init - 0.4);
        EXPECT_LE(m.depth, *t_init + 0.4);
    }
}

TEST(MedianDepth, PrecisionConstant) {
    EXPECT_NEAR(median_search_precision(), 0.8 * std::pow(8.0, -5), 1e-18);
    EXPECT_NEAR(median_search_precision(), 2.441e-5, 1e-8);
}

TEST(MedianDepth, AgreesWithBisectionOracle) {
    std::mt19937_64 rng(2);
    int checked = 0;
    for (int k = 0; k < 100; ++k) {
        const auto rr = fixtures::random_crossing_ray(rng, 1 + k % 6);
        const auto m = median_depth(rr.profile, *initial_depth(rr.profile));
        if (!m.valid) continue;
        const auto ref = oracle::numeric_median(rr.profile);
        ASSERT_TRUE(ref.has_value());
        EXPECT_LE(std::abs(m.depth - *ref), median_search_precision());
        ++checked;
    }
    EXPECT_GT(checked, 50);
}

TEST(MedianDepth, TwoOverlappingGaussiansMatchDenseGrid) {
    std::mt19937_64 rng(3);
    int checked = 0;
    while (checked < 3) {
        const auto rr = fixtures::random_crossing_ray(rng, 2);
        if (rr.profile.size() != 2) continue;
        const auto m = median_depth(rr.profile, *initial_depth(rr.profile));
        if (!m.valid) continue;
        const auto ref = oracle::grid_median(rr.profile, 0.0, 8.0, 10000000);
        ASSERT_TRUE(ref.has_value());
        EXPECT_LT(std::abs(m.depth - *ref), 2.5e-5);
        ++checked;
    }
}

TEST(MedianDepth, RejectsBadArguments) {
    const auto p = single_ray_profile();
    EXPECT_THROW(median_depth(p, 5.0, 0.0), ValidationError);
    EXPECT_THROW(median_depth(p, 5.0, 0.4, -1), ValidationError);
}

TEST(ExpectedDepth, Examples) {
    EXPECT_EQ(expected_depth(profile_of({{5.0, 0.6}})), 5.0);
    const auto d = expected_depth(profile_of({{3.0, 0.5}, {7.0, 0.5}}));
    ASSERT_TRUE(d.has_value());
    EXPECT_NEAR(*d, 13.0 / 3.0, 1e-15);
    EXPECT_FALSE(expected_depth(profile_of({{5.0, 5e-7}})).has_value());
}

TEST(ExpectedDepth, MatchesDirectSummation) {
    std::mt19937_64 rng(4);
    for (int k = 0; k < 50; ++k) {
        const auto rr = fixtures::random_ray_scene(rng, 7);
        const auto a = expected_depth(rr.profile);
        const auto b = oracle::expected_depth_direct(rr.profile);
        ASSERT_EQ(a.has_value(), b.has_value());
        if (a) {
            EXPECT_NEAR(*a, *b, 1e-12 * *b);
        }
    }
}

TEST(RenderView, EmptySceneIsBackground) {
    const auto cam = look_at_camera(Vec3::Zero(), Vec3(0, 0, 1), Vec3(0, -1, 0), 20, 20, 8, 6);
    const auto r = render_view(Scene{}, cam);
    for (std::size_t i = 0; i < r.valid_mask.size(); ++i) {
        EXPECT_EQ(r.valid_mask[i], 0);
        EXPECT_EQ(r.step_mask[i], 0);
        EXPECT_EQ(r.expected_mask[i], 0);
        EXPECT_EQ(r.normal_mask[i], 0);
        EXPECT_EQ(r.median_depth[i], kBackgroundDepth);
        EXPECT_EQ(r.color[i], Vec3::Zero());
    }
}

TEST(RenderView, OpaqueGaussianGivesFilledDisk) {
    const Scene scene{make_gaussian(Vec3(0, 0, 5), Vec3::Ones(), Vec4(1, 0, 0, 0), 0.8)};
    const auto cam = make_camera(30, 30, 16, 16, Mat3::Identity(), Vec3::Zero(), 33, 33);
    const auto r = render_view(scene, cam);
    ASSERT_TRUE(r.valid_mask(16, 16));
    EXPECT_NEAR(r.median_depth(16, 16), kSingleRayMedian, 0.5 * median_search_precision());
    double inside = 0.0, outside = 1e9;
    std::size_t count = 0;
    for (int y = 0; y < 33; ++y) {
        for (int x = 0; x < 33; ++x) {
            const double rad = std::hypot(x - 16.0, y - 16.0);
            // Per-pixel single-ray oracle.
            const auto p = gather_profile(scene, cam.pixel_ray(x, y));
            const auto ref = oracle::numeric_median(p);
            // Crossings farther than r from t_init fall outside the search bracket.
            const bool crosses = ref && std::abs(*ref - p.restrictions[0].t_star) <= 0.4;
            EXPECT_EQ(r.valid_mask(x, y) != 0, crosses) << x << "," << y;
            if (r.valid_mask(x, y)) {
                inside = std::max(inside, rad);
                ++count;
            } else {
                outside = std::min(outside, rad);
            }
        }
    }
    EXPECT_LT(inside, outside);
    EXPECT_GT(count, 20u);
}

TEST(RenderView, DeterministicAcrossWorkers) {
    const auto scene = synthetic::sphere_gaussians({}, 150);
    const auto cam = synthetic::camera_ring(3, Vec3::Zero(), 3.0, 0.5, 30, 24, 20)[1];
    RenderOptions one, many;
    many.workers = 8;
    const auto a = render_view(scene, cam, one);
    const auto b = render_view(scene, cam, many);
    EXPECT_EQ(a.median_depth, b.median_depth);
    EXPECT_EQ(a.valid_mask, b.valid_mask);
    EXPECT_EQ(a.expected_depth, b.expected_depth);
    EXPECT_EQ(a.step_median_depth, b.step_median_depth);
    EXPECT_EQ(a.color, b.color);
    EXPECT_EQ(a.normal, b.normal);
}

TEST(RenderView, ValidPixelsSatisfyBracketInvariants) {
    const auto scene = synthetic::sphere_gaussians({}, 150);
    const auto cam = synthetic::camera_ring(3, Vec3::Zero(), 3.0, 0.5, 30, 24, 20)[0];
    const auto profiles = gather_view(scene, cam);
    const auto r = render_profiles(profiles, cam);
    std::size_t valid = 0;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        if (!r.valid_mask[i]) continue;
        ++valid;
        EXPECT_LE(std::abs(r.median_depth[i] - r.step_median_depth[i]), 0.4);
        const double h = 0.5 * median_search_precision();
        EXPECT_GE(total_transmittance(profiles[i], r.median_depth[i] - h), 0.5);
        EXPECT_LE(total_transmittance(profiles[i], r.median_depth[i] + h), 0.5);
    }
    EXPECT_GT(valid, 50u);
}

TEST(DepthMode, ParseAndSelect) {
    EXPECT_EQ(parse_depth_mode("stochastic"), DepthMode::stochastic);
    EXPECT_EQ(parse_depth_mode("step"), DepthMode::step);
    EXPECT_EQ(parse_depth_mode("expected"), DepthMode::expected);
    EXPECT_THROW(parse_depth_mode("mean"), ValidationError);
    EXPECT_EQ(to_string(DepthMode::step), "step");
    const Scene scene{make_gaussian(Vec3(0, 0, 5), Vec3::Ones(), Vec4(1, 0, 0, 0), 0.8)};
    const auto cam = make_camera(30, 30, 2, 2, Mat3::Identity(), Vec3::Zero(), 5, 5);
    const auto r = render_view(scene, cam);
    EXPECT_EQ(select_depth(r, DepthMode::step).depth, r.step_median_depth);
    EXPECT_EQ(select_depth(r, DepthMode::expected).mask, r.expected_mask);
    EXPECT_EQ(select_depth(r, DepthMode::stochastic).depth, r.median_depth);
}
