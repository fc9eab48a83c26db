#pragma once

/**
 * @file signal.hpp
 * @brief Shared numeric types, the OFDM subcarrier plan, and unitary DFT
 *        utilities used by every other module.
 */

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "jscc/errors.hpp"

namespace jscc {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;
using rvec = std::vector<double>;

inline constexpr double kPi = 3.14159265358979323846;

/// FNV-1a, used for config hashes and per-task seed derivation.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
    return fnv1a(&v, sizeof(v), h);
}

/// Derives an independent seed for a parallel task from a base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t task_index) {
    std::uint64_t z = hash_combine(base, task_index) + 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/**
 * OFDM subcarrier plan: which of the K subcarriers carry data, which carry
 * in-symbol pilots, and what the frame preamble looks like. Indices are
 * physical FFT bins in [0, K); the default plan mirrors the legacy 64-point
 * WLAN layout (48 data, 4 pilots, DC and band edges unused).
 */
struct OfdmConfig {
    std::size_t subcarriers = 64;  ///< K
    std::size_t cp_length = 16;    ///< L, samples
    double bandwidth_hz = 10e6;    ///< B

    std::vector<std::size_t> data_indices;   ///< K_d bins, ascending logical frequency
    std::vector<std::size_t> pilot_indices;  ///< K_p bins
    cvec pilot_values;                       ///< one per pilot bin
    std::size_t preamble_repeats = 2;        ///< training symbols per frame

    std::size_t n_data() const { return data_indices.size(); }
    std::size_t n_pilots() const { return pilot_indices.size(); }
    std::size_t symbol_samples() const { return subcarriers + cp_length; }

    /// Duration of one CP-extended OFDM symbol, seconds.
    double symbol_duration() const {
        return static_cast<double>(symbol_samples()) / bandwidth_hz;
    }

    /// T_p: preamble duration = preamble_repeats * (K + L) / B.
    double preamble_duration() const {
        return static_cast<double>(preamble_repeats) * symbol_duration();
    }

    void validate() const {
        if (subcarriers == 0)
            throw std::invalid_argument("OfdmConfig: K must be positive");
        if (cp_length == 0 || cp_length >= subcarriers)
            throw std::invalid_argument("OfdmConfig: need 0 < L < K");
        if (bandwidth_hz <= 0.0)
            throw std::invalid_argument("OfdmConfig: bandwidth must be positive");
        if (pilot_values.size() != pilot_indices.size())
            throw std::invalid_argument("OfdmConfig: pilot value per pilot index required");
        if (data_indices.empty())
            throw std::invalid_argument("OfdmConfig: no data subcarriers");
        // data, pilot and unused bins must partition [0, K)
        std::vector<int> seen(subcarriers, 0);
        for (std::size_t i : data_indices) {
            if (i >= subcarriers || seen[i]++)
                throw std::invalid_argument("OfdmConfig: data index out of range or repeated");
        }
        for (std::size_t i : pilot_indices) {
            if (i >= subcarriers || seen[i]++)
                throw std::invalid_argument("OfdmConfig: pilot index collides or out of range");
        }
    }

    std::uint64_t hash() const {
        std::uint64_t h = 0xcbf29ce484222325ull;
        h = hash_combine(h, subcarriers);
        h = hash_combine(h, cp_length);
        std::uint64_t b;
        static_assert(sizeof(b) == sizeof(bandwidth_hz));
        std::memcpy(&b, &bandwidth_hz, sizeof(b));
        h = hash_combine(h, b);
        for (std::size_t i : data_indices) h = hash_combine(h, i);
        for (std::size_t i : pilot_indices) h = hash_combine(h, i);
        for (const cplx& v : pilot_values) {
            std::uint64_t re, im;
            double r = v.real(), q = v.imag();
            std::memcpy(&re, &r, sizeof(re));
            std::memcpy(&im, &q, sizeof(im));
            h = hash_combine(hash_combine(h, re), im);
        }
        h = hash_combine(h, preamble_repeats);
        return h;
    }

    /**
     * Default plan: K=64, L=16, B=10 MHz. Logical bins -26..-1, 1..26 are
     * used; pilots sit at logical {-21, -7, 7, 21} with alternating +/-1
     * values; DC and the outer band edges stay empty. Logical bin l maps to
     * physical bin l (l >= 0) or l + K (l < 0).
     */
    static OfdmConfig wlan64() {
        OfdmConfig c;
        c.subcarriers = 64;
        c.cp_length = 16;
        c.bandwidth_hz = 10e6;
        c.preamble_repeats = 2;
        const std::vector<int> pilots_logical = {-21, -7, 7, 21};
        auto physical = [&](int l) {
            return static_cast<std::size_t>(l >= 0 ? l : l + static_cast<int>(c.subcarriers));
        };
        for (std::size_t i = 0; i < pilots_logical.size(); ++i) {
            c.pilot_indices.push_back(physical(pilots_logical[i]));
            c.pilot_values.emplace_back(i % 2 == 0 ? 1.0 : -1.0, 0.0);
        }
        for (int l = -26; l <= 26; ++l) {
            if (l == 0) continue;
            if (std::find(pilots_logical.begin(), pilots_logical.end(), l) !=
                pilots_logical.end())
                continue;
            c.data_indices.push_back(physical(l));
        }
        c.validate();
        return c;
    }

    /// Small test plan: data on bins 0..K_d-1, no pilots.
    static OfdmConfig contiguous(std::size_t k, std::size_t k_d, std::size_t l,
                                 double bandwidth = 10e6) {
        OfdmConfig c;
        c.subcarriers = k;
        c.cp_length = l;
        c.bandwidth_hz = bandwidth;
        c.data_indices.resize(k_d);
        std::iota(c.data_indices.begin(), c.data_indices.end(), std::size_t{0});
        c.validate();
        return c;
    }
};

namespace detail {

inline void put_u32_le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// In-place iterative radix-2 transform, sign = -1 forward / +1 inverse.
/// No normalization.
inline void fft_radix2(cvec& a, int sign) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * kPi / static_cast<double>(len);
        const cplx wlen = std::polar(1.0, ang);
        for (std::size_t i = 0; i < n; i += len) {
            cplx w{1.0, 0.0};
            for (std::size_t j = 0; j < len / 2; ++j) {
                cplx u = a[i + j];
                cplx v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

/// O(n^2) fallback for non power-of-two lengths.
inline cvec dft_direct(const cvec& x, int sign) {
    const std::size_t n = x.size();
    cvec out(n);
    for (std::size_t k = 0; k < n; ++k) {
        cplx acc{0.0, 0.0};
        for (std::size_t m = 0; m < n; ++m) {
            const double ang =
                sign * 2.0 * kPi * static_cast<double>(k * m % n) / static_cast<double>(n);
            acc += x[m] * std::polar(1.0, ang);
        }
        out[k] = acc;
    }
    return out;
}

inline cvec transform(const cvec& x, int sign) {
    if (x.empty()) throw std::invalid_argument("dft: empty input");
    cvec out;
    if (is_pow2(x.size())) {
        out = x;
        fft_radix2(out, sign);
    } else {
        out = dft_direct(x, sign);
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(x.size()));
    for (cplx& v : out) v *= scale;
    return out;
}

} // namespace detail

/// Unitary DFT: X[k] = (1/sqrt(n)) sum_m x[m] e^{-j 2 pi k m / n}.
inline cvec unitary_dft(const cvec& x) { return detail::transform(x, -1); }

/// Unitary IDFT: x[m] = (1/sqrt(n)) sum_k X[k] e^{+j 2 pi k m / n}.
inline cvec unitary_idft(const cvec& x) { return detail::transform(x, +1); }

/**
 * Rows of the K-point unitary DFT matrix restricted to the data subcarriers:
 * F[r][m] = (1/sqrt(K)) e^{-j 2 pi data_indices[r] m / K}. Row-orthonormal,
 * so F F^H = I_{K_d}.
 */
struct DftMatrixTruncated {
    std::size_t rows = 0;  ///< K_d
    std::size_t cols = 0;  ///< K
    cvec entries;          ///< row-major

    const cplx& at(std::size_t r, std::size_t c) const { return entries[r * cols + c]; }

    /// Column k as a K_d vector (f_k in the power expression).
    cvec column(std::size_t k) const {
        cvec f(rows);
        for (std::size_t r = 0; r < rows; ++r) f[r] = at(r, k);
        return f;
    }
};

inline DftMatrixTruncated truncated_dft_matrix(const OfdmConfig& config) {
    config.validate();
    const std::size_t k_total = config.subcarriers;
    DftMatrixTruncated f;
    f.rows = config.n_data();
    f.cols = k_total;
    f.entries.resize(f.rows * f.cols);
    const double scale = 1.0 / std::sqrt(static_cast<double>(k_total));
    for (std::size_t r = 0; r < f.rows; ++r) {
        const std::size_t bin = config.data_indices[r];
        for (std::size_t m = 0; m < f.cols; ++m) {
            const double ang =
                -2.0 * kPi * static_cast<double>(bin * m % k_total) / static_cast<double>(k_total);
            f.entries[r * f.cols + m] = scale * std::polar(1.0, ang);
        }
    }
    return f;
}

inline double norm_sq(const cvec& x) {
    double s = 0.0;
    for (const cplx& v : x) s += std::norm(v);
    return s;
}

inline double norm_sq(const rvec& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
}

} // namespace jscc
