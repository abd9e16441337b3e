// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#include "solidsplat/depth.hpp"

#include <array>
#include <cmath>

namespace solidsplat {

std::optional<double> initial_depth(const TransmittanceProfile &profile) {
    double residual = 1.0;
    for (const auto &r : profile.restrictions) {
        residual *= 1.0 - r.peak_value;
        if (residual <= 0.5) return r.t_star;
    }
    return std::nullopt;
}

MedianDepth median_depth(const TransmittanceProfile &profile, double t_init, double r,
                         int traversals, std::vector<SearchBracket> *trace) {
    if (!(r > 0.0)) throw ValidationError("median_depth: bracket radius must be positive");
    if (traversals < 0) throw ValidationError("median_depth: traversals must be non-negative");

    double lo = t_init - r;
    double hi = t_init + r;
    // Seven interior probes plus both endpoints; the endpoints are only
    // evaluated in the first traversal and carried forward afterwards.
    std::array<double, 9> ts{};
    std::array<double, 9> trans{};
    ts[0] = lo;
    ts[8] = hi;
    total_transmittance(profile, std::span<const double>(&ts[0], 1), std::span<double>(&trans[0], 1));
    total_transmittance(profile, std::span<const double>(&ts[8], 1), std::span<double>(&trans[8], 1));
    if (!(trans[0] >= 0.5 && trans[8] <= 0.5)) return {t_init, false};

    for (int pass = 0; pass < traversals; ++pass) {
        const double step = (hi - lo) / 8.0;
        for (int k = 1; k < 8; ++k) ts[k] = lo + k * step;
        total_transmittance(profile, std::span<const double>(&ts[1], 7),
                            std::span<double>(&trans[1], 7));
        // T is non-increasing: take the first segment whose right end reaches 0.5.
        int seg = 7;
        for (int k = 1; k <= 8; ++k) {
            if (trans[k] <= 0.5) {
                seg = k - 1;
                break;
            }
        }
        lo = ts[seg];
        hi = ts[seg + 1];
        if (trace) trace->push_back({lo, hi, trans[seg], trans[seg + 1]});
        trans[0] = trans[seg];
        trans[8] = trans[seg + 1];
        ts[0] = lo;
        ts[8] = hi;
    }
    return {0.5 * (lo + hi), true};
}

double median_search_precision(double r, int traversals) {
    return 2.0 * r * std::pow(8.0, -traversals);
}

std::optional<double> expected_depth(const TransmittanceProfile &profile) {
    double weighted = 0.0;
    double total = 0.0;
    double transmitted = 1.0;
    for (const auto &r : profile.restrictions) {
        const double w = r.peak_value * transmitted;
        weighted += w * r.t_star;
        total += w;
        transmitted *= 1.0 - r.peak_value;
    }
    if (total < 1e-6) return std::nullopt;
    return weighted / total;
}

} // namespace solidsplat
