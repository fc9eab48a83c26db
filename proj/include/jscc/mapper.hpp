#pragma once

/**
 * @file mapper.hpp
 * @brief Feature-to-symbol conversion: segmentation into 2 K_d real chunks,
 *        per-segment power normalization, and the half-split alternating-sign
 *        complex mapping (with exact inverses for all three).
 */

#include <cmath>
#include <utility>
#include <vector>

#include "jscc/errors.hpp"
#include "jscc/features.hpp"
#include "jscc/signal.hpp"

namespace jscc {

/// One OFDM payload symbol worth of complex data plus the bookkeeping the
/// receiver needs to undo normalization and padding.
struct SymbolSegment {
    cvec symbols;           ///< length K_d
    double scale = 1.0;     ///< multiplier that was applied to the real segment
    std::size_t pad_count = 0;  ///< zero-padded tail elements of the real segment
};

struct SegmentedFeatures {
    std::vector<rvec> segments;  ///< each of length 2 K_d, last one zero-padded
    std::size_t pad_count = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
};

/// Split the channel-major flattened tensor into ceil(len / 2K_d) real
/// segments; the final segment is zero-padded and pad_count records by how
/// much.
inline SegmentedFeatures segment_features(const FeatureBlock& block, const OfdmConfig& config) {
    if (block.size() == 0) throw std::invalid_argument("segment_features: empty block");
    const std::size_t seg_len = 2 * config.n_data();
    SegmentedFeatures out;
    out.height = block.height;
    out.width = block.width;
    out.channels = block.channels;
    const std::size_t n = block.size();
    const std::size_t n_seg = (n + seg_len - 1) / seg_len;
    out.pad_count = n_seg * seg_len - n;
    out.segments.reserve(n_seg);
    for (std::size_t s = 0; s < n_seg; ++s) {
        rvec seg(seg_len, 0.0);
        const std::size_t begin = s * seg_len;
        const std::size_t count = std::min(seg_len, n - begin);
        std::copy(block.data.begin() + static_cast<std::ptrdiff_t>(begin),
                  block.data.begin() + static_cast<std::ptrdiff_t>(begin + count), seg.begin());
        out.segments.push_back(std::move(seg));
    }
    return out;
}

/// Exact inverse of segment_features.
inline FeatureBlock unsegment_features(const SegmentedFeatures& seg) {
    FeatureBlock block = FeatureBlock::zeros(seg.height, seg.width, seg.channels);
    const std::size_t n = block.size();
    std::size_t written = 0;
    for (const rvec& s : seg.segments) {
        for (double v : s) {
            if (written == n) return block;  // padding reached
            block.data[written++] = v;
        }
    }
    if (written != n)
        throw std::invalid_argument("unsegment_features: segments shorter than tensor");
    return block;
}

/// Scale a real segment so the mapped complex symbols average p_t power
/// (two reals per complex symbol). Returns {scaled segment, scale}.
inline std::pair<rvec, double> power_normalize(const rvec& segment, double p_t) {
    if (p_t <= 0.0) throw std::invalid_argument("power_normalize: p_t must be positive");
    const double mean_sq = segment.empty() ? 0.0 : norm_sq(segment) / segment.size();
    if (mean_sq == 0.0) return {segment, 1.0};  // degenerate all-zero segment
    const double scale = std::sqrt(p_t / (2.0 * mean_sq));
    rvec scaled(segment.size());
    for (std::size_t i = 0; i < segment.size(); ++i) scaled[i] = segment[i] * scale;
    return {scaled, scale};
}

/**
 * Half-split alternating-sign mapping. With 1-based symbol index k the first
 * half of s feeds the real parts and the second half the imaginary parts,
 * the sign of the imaginary part alternating starting with + at k = 1:
 *
 *   x[k] = s[k] + j s[k + K_d]   (k odd)
 *   x[k] = s[k] - j s[k + K_d]   (k even)
 */
inline cvec map_to_symbols(const rvec& s) {
    if (s.empty() || s.size() % 2 != 0)
        throw std::invalid_argument("map_to_symbols: segment length must be 2 K_d");
    const std::size_t n = s.size() / 2;
    cvec x(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double im = (i % 2 == 0) ? s[i + n] : -s[i + n];
        x[i] = cplx{s[i], im};
    }
    return x;
}

/// Exact (bit-level) left inverse of map_to_symbols.
inline rvec inverse_map(const cvec& x) {
    if (x.empty()) throw std::invalid_argument("inverse_map: empty input");
    const std::size_t n = x.size();
    rvec s(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        s[i] = x[i].real();
        s[i + n] = (i % 2 == 0) ? x[i].imag() : -x[i].imag();
    }
    return s;
}

/// segment + normalize + map in one pass; the building block of the
/// transmitter chain.
inline std::vector<SymbolSegment> map_block(const FeatureBlock& block, const OfdmConfig& config,
                                            double p_t) {
    SegmentedFeatures seg = segment_features(block, config);
    std::vector<SymbolSegment> out;
    out.reserve(seg.segments.size());
    for (std::size_t i = 0; i < seg.segments.size(); ++i) {
        auto [scaled, scale] = power_normalize(seg.segments[i], p_t);
        SymbolSegment sym;
        sym.symbols = map_to_symbols(scaled);
        sym.scale = scale;
        sym.pad_count = (i + 1 == seg.segments.size()) ? seg.pad_count : 0;
        out.push_back(std::move(sym));
    }
    return out;
}

/// Inverse of map_block given the received complex symbols per segment.
inline FeatureBlock unmap_block(const std::vector<cvec>& received,
                                const std::vector<double>& scales, std::size_t pad_count,
                                std::size_t height, std::size_t width, std::size_t channels) {
    if (received.size() != scales.size())
        throw std::invalid_argument("unmap_block: one scale per segment required");
    SegmentedFeatures seg;
    seg.height = height;
    seg.width = width;
    seg.channels = channels;
    seg.pad_count = pad_count;
    seg.segments.reserve(received.size());
    for (std::size_t i = 0; i < received.size(); ++i) {
        rvec s = inverse_map(received[i]);
        const double inv = scales[i] == 0.0 ? 1.0 : 1.0 / scales[i];
        for (double& v : s) v *= inv;
        seg.segments.push_back(std::move(s));
    }
    return unsegment_features(seg);
}

} // namespace jscc
