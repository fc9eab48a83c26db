#pragma once

/**
 * @file features.hpp
 * @brief Encoder-like feature tensors: a synthetic correlated source, the
 *        clip activation, 16-bit float quantization emulation, and a binary
 *        tensor file format for externally computed features.
 */

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "jscc/errors.hpp"
#include "jscc/signal.hpp"

namespace jscc {

/// H x W x C real tensor, stored as C planes of row-major H x W.
struct FeatureBlock {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    rvec data;

    std::size_t plane_size() const { return height * width; }
    std::size_t size() const { return plane_size() * channels; }

    double& at(std::size_t c, std::size_t i) { return data[c * plane_size() + i]; }
    double at(std::size_t c, std::size_t i) const { return data[c * plane_size() + i]; }

    static FeatureBlock zeros(std::size_t h, std::size_t w, std::size_t c) {
        if (h == 0 || w == 0)
            throw std::invalid_argument("FeatureBlock: H and W must be positive");
        FeatureBlock b;
        b.height = h;
        b.width = w;
        b.channels = c;
        b.data.assign(h * w * c, 0.0);
        return b;
    }
};

/// Parameters of the synthetic AR(1) feature source.
struct FeatureSpec {
    std::size_t height = 64;
    std::size_t width = 64;
    std::size_t channels = 12;
    double rho = 0.9;    ///< lag-1 correlation of the pre-clip sequence
    double sigma = 0.5;  ///< pre-clip marginal standard deviation

    void validate() const {
        if (height == 0 || width == 0 || channels == 0)
            throw std::invalid_argument("FeatureSpec: dimensions must be >= 1");
        if (rho < 0.0 || rho >= 1.0)
            throw std::invalid_argument("FeatureSpec: need 0 <= rho < 1");
        if (sigma <= 0.0)
            throw std::invalid_argument("FeatureSpec: sigma must be positive");
    }
};

/// Clamp to [-1, 1] (the encoder output activation).
inline double clip_activation(double x) {
    if (std::isnan(x)) throw std::invalid_argument("clip_activation: NaN input");
    return std::min(std::max(x, -1.0), 1.0);
}

/**
 * Pre-clip stationary AR(1) Gaussian tensor: per channel, over the flattened
 * H*W index, x[t] = rho x[t-1] + sigma sqrt(1-rho^2) w[t] with x[0] drawn at
 * the marginal std. Deterministic in (spec, seed).
 */
inline FeatureBlock generate_ar1(const FeatureSpec& spec, std::uint64_t seed) {
    spec.validate();
    FeatureBlock b = FeatureBlock::zeros(spec.height, spec.width, spec.channels);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    const double innovation = spec.sigma * std::sqrt(1.0 - spec.rho * spec.rho);
    const std::size_t n = b.plane_size();
    for (std::size_t c = 0; c < spec.channels; ++c) {
        double prev = spec.sigma * g(rng);
        b.at(c, 0) = prev;
        for (std::size_t i = 1; i < n; ++i) {
            prev = spec.rho * prev + innovation * g(rng);
            b.at(c, i) = prev;
        }
    }
    return b;
}

/// AR(1) source followed by the clip activation.
inline FeatureBlock generate_features(const FeatureSpec& spec, std::uint64_t seed) {
    FeatureBlock b = generate_ar1(spec, seed);
    for (double& v : b.data) v = clip_activation(v);
    return b;
}

namespace detail {

/// Round a double to the nearest binary16 value (round-to-nearest-even),
/// returned as the raw 16-bit pattern.
inline std::uint16_t double_to_half_bits(double value) {
    std::uint64_t bits;
    std::memcpy(&bits, &value, sizeof(bits));
    const std::uint16_t sign = static_cast<std::uint16_t>((bits >> 48) & 0x8000u);
    const std::uint64_t mant = bits & 0xfffffffffffffull;
    const int exp_d = static_cast<int>((bits >> 52) & 0x7ffu);

    if (exp_d == 0x7ff)  // inf / nan
        return static_cast<std::uint16_t>(sign | 0x7c00u | (mant ? 0x200u : 0u));

    const int exp_h = exp_d - 1023 + 15;
    if (exp_h >= 0x1f) return static_cast<std::uint16_t>(sign | 0x7c00u);
    if (exp_h <= 0) {
        if (exp_h < -10) return sign;  // rounds to zero
        const std::uint64_t mant53 = mant | (1ull << 52);
        const unsigned shift = static_cast<unsigned>(43 - exp_h);
        std::uint16_t half = static_cast<std::uint16_t>(mant53 >> shift);
        const std::uint64_t rem = mant53 & ((1ull << shift) - 1);
        const std::uint64_t halfway = 1ull << (shift - 1);
        if (rem > halfway || (rem == halfway && (half & 1u))) ++half;
        return static_cast<std::uint16_t>(sign | half);
    }
    std::uint16_t out = static_cast<std::uint16_t>(
        sign | (static_cast<unsigned>(exp_h) << 10) | static_cast<unsigned>(mant >> 42));
    const std::uint64_t rem = mant & ((1ull << 42) - 1);
    const std::uint64_t halfway = 1ull << 41;
    if (rem > halfway || (rem == halfway && (out & 1u))) ++out;  // carry may bump exponent
    return out;
}

inline double half_bits_to_double(std::uint16_t h) {
    const int sign = (h & 0x8000u) ? -1 : 1;
    const int exp = (h >> 10) & 0x1f;
    const int mant = h & 0x3ffu;
    if (exp == 0) return sign * std::ldexp(static_cast<double>(mant), -24);
    if (exp == 0x1f)
        return mant ? std::numeric_limits<double>::quiet_NaN()
                    : sign * std::numeric_limits<double>::infinity();
    return sign * std::ldexp(static_cast<double>(mant | 0x400), exp - 25);
}

} // namespace detail

/// Round every entry to the nearest half-precision value, widened back to
/// double. Idempotent.
inline FeatureBlock quantize_half(const FeatureBlock& block) {
    FeatureBlock out = block;
    for (double& v : out.data)
        v = detail::half_bits_to_double(detail::double_to_half_bits(v));
    return out;
}

inline double quantize_half(double x) {
    return detail::half_bits_to_double(detail::double_to_half_bits(x));
}

// Feature tensor file: 16-byte header ("FTB1" magic+version, then H, W, C as
// 32-bit little-endian unsigned), followed by the tensor as little-endian
// 32-bit floats, channel plane by channel plane, each row-major.
inline constexpr char kFeatureMagic[4] = {'F', 'T', 'B', '1'};

inline void save_features(const FeatureBlock& block, const std::string& path) {
    if (block.height == 0 || block.width == 0 || block.channels == 0)
        throw std::invalid_argument("save_features: empty tensor");
    std::string buf;
    buf.reserve(16 + 4 * block.size());
    buf.append(kFeatureMagic, 4);
    detail::put_u32_le(buf, static_cast<std::uint32_t>(block.height));
    detail::put_u32_le(buf, static_cast<std::uint32_t>(block.width));
    detail::put_u32_le(buf, static_cast<std::uint32_t>(block.channels));
    for (double v : block.data) {
        const float f = static_cast<float>(v);
        std::uint32_t u;
        std::memcpy(&u, &f, sizeof(u));
        detail::put_u32_le(buf, u);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("save_features: cannot open " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw FormatError("save_features: short write to " + path);
}

inline FeatureBlock load_features(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("load_features: cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 16) throw FormatError("load_features: truncated header");
    if (std::memcmp(buf.data(), kFeatureMagic, 4) != 0)
        throw FormatError("load_features: bad magic");
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
    const std::uint32_t h = detail::get_u32_le(p + 4);
    const std::uint32_t w = detail::get_u32_le(p + 8);
    const std::uint32_t c = detail::get_u32_le(p + 12);
    if (h == 0 || w == 0 || c == 0)
        throw FormatError("load_features: zero dimension in header");
    const std::size_t count = static_cast<std::size_t>(h) * w * c;
    if (buf.size() != 16 + 4 * count)
        throw FormatError("load_features: payload size mismatch");
    FeatureBlock block = FeatureBlock::zeros(h, w, c);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint32_t u = detail::get_u32_le(p + 16 + 4 * i);
        float f;
        std::memcpy(&f, &u, sizeof(f));
        if (!std::isfinite(f) || f < -1.0f || f > 1.0f)
            throw ValidationError("load_features: value outside [-1, 1]");
        block.data[i] = static_cast<double>(f);
    }
    return block;
}

/**
 * Pearson correlation between the flattened per-channel sequence and its
 * d-shifted copy, averaged over channels, for d = 0..max_distance.
 */
inline rvec empirical_feature_correlation(const FeatureBlock& block,
                                          std::size_t max_distance) {
    const std::size_t n = block.plane_size();
    if (block.channels == 0 || n == 0)
        throw std::invalid_argument("empirical_feature_correlation: empty block");
    if (n <= max_distance)
        throw std::invalid_argument("empirical_feature_correlation: H*W must exceed max_distance");
    rvec corr(max_distance + 1, 0.0);
    for (std::size_t d = 0; d <= max_distance; ++d) {
        double acc = 0.0;
        for (std::size_t c = 0; c < block.channels; ++c) {
            const std::size_t m = n - d;
            double mean_a = 0.0, mean_b = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                mean_a += block.at(c, i);
                mean_b += block.at(c, i + d);
            }
            mean_a /= static_cast<double>(m);
            mean_b /= static_cast<double>(m);
            double saa = 0.0, sbb = 0.0, sab = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const double a = block.at(c, i) - mean_a;
                const double b = block.at(c, i + d) - mean_b;
                saa += a * a;
                sbb += b * b;
                sab += a * b;
            }
            if (saa <= 0.0 || sbb <= 0.0)
                throw UndefinedCorrelationError(
                    "empirical_feature_correlation: zero-variance sequence");
            acc += (d == 0) ? 1.0 : sab / std::sqrt(saa * sbb);
        }
        corr[d] = acc / static_cast<double>(block.channels);
    }
    return corr;
}

} // namespace jscc
