// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "solidsplat/transmittance.hpp"

#include <optional>
#include <vector>

namespace solidsplat {

inline constexpr double kDefaultBracketRadius = 0.4;
inline constexpr int kDefaultTraversals = 5;

/// Step-wise median: t_star of the first Gaussian at which the compositing
/// residual prod_{i<=j} (1 - alpha_i) drops to 0.5 or below.
std::optional<double> initial_depth(const TransmittanceProfile &profile);

struct MedianDepth {
    double depth = 0.0;
    bool valid = false;
};

/// Bracket kept after one traversal, with the transmittance at both ends.
struct SearchBracket {
    double lo, hi;
    double t_lo, t_hi;
};

/// Locates T(t) = 0.5 inside [t_init - r, t_init + r]. Every traversal
/// evaluates T at seven interior points and keeps the one of eight segments
/// that straddles 0.5. Returns the midpoint of the final bracket, whose width
/// is 2r * 8^-traversals. When both initial endpoints lie on the same side of
/// 0.5 the pixel is invalid and `depth` is t_init.
MedianDepth median_depth(const TransmittanceProfile &profile, double t_init,
                         double r = kDefaultBracketRadius, int traversals = kDefaultTraversals,
                         std::vector<SearchBracket> *trace = nullptr);

/// Final bracket width of the search.
double median_search_precision(double r = kDefaultBracketRadius,
                               int traversals = kDefaultTraversals);

/// Compositing-weighted mean of the peak locations; nullopt when the
/// weights sum below 1e-6.
std::optional<double> expected_depth(const TransmittanceProfile &profile);

} // namespace solidsplat
