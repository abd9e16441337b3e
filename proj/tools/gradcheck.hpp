// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <solidsplat/gaussian.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace solidsplat::tools {

struct GradcheckOptions {
    std::uint64_t seed = 7;
    int rays = 24;
    int workers = 1;
};

struct GradcheckEntry {
    std::size_t ray = 0;
    std::size_t gaussian = 0;
    std::string group;
    double analytic_norm = 0.0;
    double fd_norm = 0.0;
    double rel_error = 0.0;
};

struct GradcheckReport {
    std::vector<GradcheckEntry> entries;
    std::size_t rays_valid = 0;
    std::size_t rays_skipped = 0;
    double max_rel_error = 0.0;
    double max_identity_residual = 0.0;
};

/// Compares the implicit median-depth gradient on random rays through the
/// scene against central differences of a tightened forward search.
GradcheckReport run_gradcheck(const Scene &scene, const GradcheckOptions &options);

std::string to_json(const GradcheckReport &report);

} // namespace solidsplat::tools
