// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#include "fixtures.hpp"

#include <solidsplat/camera.hpp>
#include <solidsplat/oracle.hpp>
#include <solidsplat/restriction.hpp>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <cmath>

using namespace solidsplat;

namespace {

GaussianPrimitive unit_gaussian(double opacity) {
    return make_gaussian(Vec3(1.0, -2.0, 3.0), Vec3::Ones(), Vec4(1, 0, 0, 0), opacity);
}

} // namespace

TEST(EvalGaussian, CenterReturnsOpacity) {
    std::mt19937_64 rng(1);
    auto g = fixtures::random_gaussian(rng, Vec3::Zero(), Vec3::Ones(), 0.1, 2.0);
    g.opacity = 0.8;
    EXPECT_DOUBLE_EQ(eval_gaussian(g, g.center), 0.8);
}

TEST(EvalGaussian, UnitQuadraticFormHasNoHalf) {
    const auto g = unit_gaussian(0.8);
    EXPECT_NEAR(eval_gaussian(g, g.center + Vec3(0.0, 1.0, 0.0)), 0.8 * std::exp(-1.0), 1e-15);
}

TEST(EvalGaussian, MatchesDenseSolve) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int k = 0; k < 200; ++k) {
        const auto g = fixtures::random_gaussian(rng, Vec3::Constant(-1), Vec3::Constant(1), 0.05, 1.5);
        const Vec3 x = g.center + 0.5 * Vec3(n(rng), n(rng), n(rng));
        const double ref = oracle::dense_gaussian_value(g, x);
        EXPECT_NEAR(eval_gaussian(g, x), ref, 1e-12 * std::max(1.0, ref));
    }
}

TEST(Gaussian, InvariantsAreEnforced) {
    EXPECT_THROW(make_gaussian(Vec3::Zero(), Vec3(1, 0, 1), Vec4(1, 0, 0, 0), 0.5), ValidationError);
    EXPECT_THROW(make_gaussian(Vec3::Zero(), Vec3::Ones(), Vec4(1, 0, 0, 0), 1.0), ValidationError);
    EXPECT_THROW(make_gaussian(Vec3::Zero(), Vec3::Ones(), Vec4(1, 0, 0, 0), 0.0), ValidationError);
    EXPECT_THROW(make_gaussian(Vec3::Zero(), Vec3::Ones(), Vec4::Zero(), 0.5), ValidationError);
    EXPECT_NO_THROW(make_gaussian(Vec3::Zero(), Vec3::Ones(), Vec4(2, 0, 0, 0), kMaxOpacity));
}

TEST(Gaussian, CovarianceIsSymmetricPositiveDefinite) {
    std::mt19937_64 rng(3);
    for (int k = 0; k < 100; ++k) {
        const auto g = fixtures::random_gaussian(rng, Vec3::Zero(), Vec3::Ones(), 0.01, 3.0);
        const Mat3 s = covariance(g);
        EXPECT_LT((s - s.transpose()).norm(), 1e-14 * s.norm());
        Eigen::SelfAdjointEigenSolver<Mat3> es(s);
        EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
        EXPECT_LT((precision_matrix(g) * s - Mat3::Identity()).norm(), 1e-9);
    }
}

TEST(Gaussian, NormalIsSmallestAxisFacingViewer) {
    const auto g = make_gaussian(Vec3::Zero(), Vec3(1.0, 0.1, 2.0), Vec4(1, 0, 0, 0), 0.5);
    EXPECT_EQ(normal_axis(g), 1);
    EXPECT_TRUE(oriented_normal(g, Vec3(0, 1, 0)).isApprox(Vec3(0, -1, 0)));
    EXPECT_TRUE(oriented_normal(g, Vec3(0, -1, 0)).isApprox(Vec3(0, 1, 0)));
}

TEST(RestrictToRay, ThroughCenter) {
    const auto g = make_gaussian(Vec3(0, 0, 5), Vec3::Ones(), Vec4(1, 0, 0, 0), kMaxOpacity);
    const auto r = restrict_to_ray(g, make_ray(Vec3::Zero(), Vec3::UnitZ()));
    EXPECT_NEAR(r.curvature, 1.0, 1e-15);
    EXPECT_NEAR(r.t_star, 5.0, 1e-14);
    EXPECT_NEAR(r.peak_value, kMaxOpacity, 1e-15);
}

TEST(RestrictToRay, PerpendicularDistanceOne) {
    const auto g = make_gaussian(Vec3(1, 0, 5), Vec3::Ones(), Vec4(1, 0, 0, 0), kMaxOpacity);
    const auto r = restrict_to_ray(g, make_ray(Vec3::Zero(), Vec3::UnitZ()));
    EXPECT_NEAR(r.peak_value, kMaxOpacity * std::exp(-1.0), 1e-15);
    EXPECT_LT(r.peak_value, g.opacity);
}

TEST(RestrictToRay, MatchesGridSearch) {
    std::mt19937_64 rng(4);
    for (int k = 0; k < 5; ++k) {
        const auto g = fixtures::random_gaussian(rng, Vec3(-0.5, -0.5, 3), Vec3(0.5, 0.5, 5), 0.2, 1.0);
        const auto ray = make_ray(Vec3(0.1, -0.2, 0.0), Vec3(0.05, 0.02, 1.0));
        const auto r = restrict_to_ray(g, ray);
        const auto peak = oracle::grid_peak(g, ray, r.t_star - 2.0, r.t_star + 2.0, 1000000);
        EXPECT_LE(std::abs(peak.t - r.t_star), peak.spacing);
        // Quadratic peak: sampling error a*(h/2)^2 relative.
        EXPECT_NEAR(peak.value, r.peak_value, r.peak_value * r.curvature * peak.spacing * peak.spacing);
        EXPECT_GE(r.peak_value, peak.value - 1e-15);
    }
}

TEST(RestrictToRay, RoundTripsDirectEvaluation) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < 1000; ++k) {
        const auto g = fixtures::random_gaussian(rng, Vec3::Constant(-1), Vec3::Constant(1), 0.1, 1.5);
        const auto ray = make_ray(Vec3(u(rng), u(rng), -4.0), Vec3(0.2 * u(rng), 0.2 * u(rng), 1.0));
        const auto r = restrict_to_ray(g, ray);
        const double t = r.t_star + 0.7 * u(rng) / std::sqrt(r.curvature);
        const double direct = eval_gaussian(g, ray.at(t));
        EXPECT_NEAR(r.value(t), direct, 1e-12 * direct);
        EXPECT_LE(r.peak_value, g.opacity);
    }
}

TEST(RestrictToRay, RejectsIllConditionedCovariance) {
    const auto g = make_gaussian(Vec3(0, 0, 5), Vec3(1.0, 1.0, 1e-7), Vec4(1, 0, 0, 0), 0.5);
    EXPECT_THROW(restrict_to_ray(g, make_ray(Vec3::Zero(), Vec3::UnitZ())), NumericError);
}

TEST(Vacancy, KnownValues) {
    RayRestriction r;
    r.peak_value = 0.75;
    r.t_star = 2.0;
    EXPECT_NEAR(vacancy(r, 2.0), 0.5, 1e-15);
    r.peak_value = 0.8;
    EXPECT_NEAR(vacancy(r, 2.0), std::sqrt(0.2), 1e-15);
    EXPECT_NEAR(vacancy(r, 2.0), 0.447213595499958, 1e-15);
    EXPECT_DOUBLE_EQ(vacancy(r, 200.0), 1.0);
}

TEST(Vacancy, TendsToOneFarFromCenter) {
    const auto g = make_gaussian(Vec3::Zero(), Vec3(0.3, 0.5, 0.2), Vec4(1, 0, 0, 0), kMaxOpacity);
    const auto r = restrict_to_ray(g, make_ray(Vec3(0, 0, -10), Vec3::UnitZ()));
    // Ten standard deviations along the ray.
    const double t = r.t_star + 10.0 / std::sqrt(r.curvature);
    EXPECT_LT(std::abs(vacancy(r, t) - 1.0), 1e-10);
}

TEST(Vacancy, OccupancyIsMonotoneInG) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 1000; ++k) {
        RayRestriction r;
        r.peak_value = kMaxOpacity * u(rng);
        r.curvature = 0.1 + 3.0 * u(rng);
        const double t1 = 4.0 * u(rng) - 2.0, t2 = 4.0 * u(rng) - 2.0;
        const double o1 = 1.0 - std::pow(vacancy(r, t1), 2), o2 = 1.0 - std::pow(vacancy(r, t2), 2);
        if (r.value(t1) >= r.value(t2)) {
            EXPECT_GE(o1, o2 - 1e-15);
        } else {
            EXPECT_GE(o2, o1 - 1e-15);
        }
    }
}

TEST(AttenuationSigma, ZeroAtPeakAndSymmetric) {
    RayRestriction r;
    r.peak_value = 0.9;
    r.curvature = 2.0;
    r.t_star = 1.0;
    EXPECT_EQ(attenuation_sigma(r, 1.0), 0.0);
    EXPECT_NEAR(attenuation_sigma(r, 0.7), attenuation_sigma(r, 1.3), 1e-15);
}

TEST(AttenuationSigma, MatchesFiniteDifferenceOfLogVacancy) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 200; ++k) {
        RayRestriction r;
        r.peak_value = 0.05 + 0.9 * u(rng);
        r.curvature = 0.2 + 3.0 * u(rng);
        r.t_star = 2.0;
        const double t = 2.0 + (u(rng) - 0.5) * 3.0 / std::sqrt(r.curvature);
        const double h = 1e-6;
        const double fd = std::abs((std::log(vacancy(r, t + h)) - std::log(vacancy(r, t - h))) / (2 * h));
        const double s = attenuation_sigma(r, t);
        if (s < 1e-6) continue;
        EXPECT_NEAR(s, fd, 1e-5 * s);
    }
}

TEST(Camera, LookAtIsValid) {
    const auto cam = look_at_camera(Vec3(1, 2, -3), Vec3::Zero(), Vec3(0, 1, 0), 50, 60, 32, 24);
    EXPECT_NO_THROW(validate(cam));
    EXPECT_EQ(cam.intrinsics(2, 2), 1.0);
    EXPECT_LT((cam.rotation * cam.rotation.transpose() - Mat3::Identity()).norm(), 1e-12);
    EXPECT_TRUE(cam.center().isApprox(Vec3(1, 2, -3), 1e-12));
    const auto uv = cam.project(Vec3::Zero());
    ASSERT_TRUE(uv.has_value());
    EXPECT_NEAR(uv->x(), cam.cx(), 1e-9);
    EXPECT_NEAR(uv->y(), cam.cy(), 1e-9);
}

TEST(Camera, PixelRaysAreUnitAndReproject) {
    const auto cam = look_at_camera(Vec3(0, 0, -4), Vec3::Zero(), Vec3(0, 1, 0), 40, 40, 16, 16);
    const Ray ray = cam.pixel_ray(3.0, 11.0);
    EXPECT_NEAR(ray.direction.norm(), 1.0, 1e-12);
    const auto uv = cam.project(ray.at(2.5));
    ASSERT_TRUE(uv.has_value());
    EXPECT_NEAR(uv->x(), 3.0, 1e-9);
    EXPECT_NEAR(uv->y(), 11.0, 1e-9);
}

TEST(Camera, ValidationRejectsBadInput) {
    auto cam = make_camera(10, 10, 5, 5, Mat3::Identity(), Vec3::Zero(), 10, 10);
    EXPECT_NO_THROW(validate(cam));
    auto bad = cam;
    bad.intrinsics(0, 0) = -1.0;
    EXPECT_THROW(validate(bad), ValidationError);
    bad = cam;
    bad.rotation(0, 0) = 2.0;
    EXPECT_THROW(validate(bad), ValidationError);
    bad = cam;
    bad.width = 0;
    EXPECT_THROW(validate(bad), ValidationError);
    EXPECT_THROW(make_ray(Vec3::Zero(), Vec3::Zero()), ValidationError);
}
