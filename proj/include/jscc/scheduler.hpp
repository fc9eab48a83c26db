#pragma once

/**
 * @file scheduler.hpp
 * @brief Progressive-coding bandwidth adaptation: latency-feasible feature
 *        budgets and channel drop/restore.
 */

#include <cmath>
#include <cstdint>

#include "jscc/errors.hpp"
#include "jscc/features.hpp"
#include "jscc/signal.hpp"

namespace jscc {

/// End-to-end latency constraint together with the preamble overhead.
struct LatencyBudget {
    double t_max_s = 3e-3;  ///< transmission latency constraint
    double t_p_s = 0.0;     ///< preamble duration

    void validate() const {
        if (t_p_s < 0.0) throw std::invalid_argument("LatencyBudget: negative T_p");
        if (t_max_s <= t_p_s)
            throw InfeasibleBudgetError("LatencyBudget: T_max must exceed T_p");
    }

    /// Budget whose preamble time matches the config's actual frame preamble.
    static LatencyBudget for_config(const OfdmConfig& config, double t_max_s) {
        return LatencyBudget{t_max_s, config.preamble_duration()};
    }
};

namespace detail {

/// floor() with a 1e-9 relative snap so exact-intent budgets (e.g. 3 ms at
/// 10 MHz) land on the intended integer despite binary rounding of seconds.
inline long long floor_snapped(double x) {
    const double r = std::round(x);
    if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x)))
        return static_cast<long long>(r);
    return static_cast<long long>(std::floor(x));
}

} // namespace detail

/// N = floor(2 K_d B (T_max - T_p) / (K + L)): how many real feature
/// elements fit in the latency budget.
inline long long max_feature_length(const OfdmConfig& config, const LatencyBudget& budget) {
    budget.validate();
    const double numer = 2.0 * static_cast<double>(config.n_data()) * config.bandwidth_hz *
                         (budget.t_max_s - budget.t_p_s);
    return detail::floor_snapped(numer / static_cast<double>(config.symbol_samples()));
}

/// C_T = min(C, floor(2 K_d B (T_max - T_p) / ((K + L) H W))). A result of 0
/// means even one channel does not fit (empty transmission).
inline std::size_t retained_channels(const OfdmConfig& config, const LatencyBudget& budget,
                                     std::size_t height, std::size_t width,
                                     std::size_t channels) {
    budget.validate();
    if (height == 0 || width == 0 || channels == 0)
        throw std::invalid_argument("retained_channels: dimensions must be >= 1");
    const double numer = 2.0 * static_cast<double>(config.n_data()) * config.bandwidth_hz *
                         (budget.t_max_s - budget.t_p_s);
    const double denom = static_cast<double>(config.symbol_samples()) *
                         static_cast<double>(height) * static_cast<double>(width);
    const long long fit = detail::floor_snapped(numer / denom);
    if (fit <= 0) return 0;
    return std::min<std::size_t>(channels, static_cast<std::size_t>(fit));
}

/// Keep the first `retain` channels, bit-identical.
inline FeatureBlock drop_channels(const FeatureBlock& block, std::size_t retain) {
    if (retain > block.channels)
        throw std::invalid_argument("drop_channels: cannot retain more channels than present");
    FeatureBlock out;
    out.height = block.height;
    out.width = block.width;
    out.channels = retain;
    out.data.assign(block.data.begin(),
                    block.data.begin() + static_cast<std::ptrdiff_t>(retain * block.plane_size()));
    return out;
}

/// Pad back to `channels` channels with exact zeros.
inline FeatureBlock zero_fill(const FeatureBlock& block, std::size_t channels) {
    if (block.channels > channels)
        throw std::invalid_argument("zero_fill: block already wider than target");
    FeatureBlock out = block;
    out.channels = channels;
    out.data.resize(channels * block.plane_size(), 0.0);
    return out;
}

} // namespace jscc
