#pragma once

/**
 * @file channel.hpp
 * @brief Multipath Rayleigh channel generation, channel application with
 *        AWGN at a target per-subcarrier SNR, the coherence-subcarrier count,
 *        and deterministic deep-fade responses for equalization studies.
 */

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "jscc/errors.hpp"
#include "jscc/signal.hpp"

namespace jscc {

/// Tapped-delay-line profile with exponential power-delay decay. Tap spacing
/// is one sample (1/B seconds).
struct ChannelProfile {
    std::size_t n_taps = 8;
    double decay = 0.5;    ///< PDP rate: tap i power proportional to exp(-decay i)
    double snr_db = 10.0;  ///< per-data-subcarrier SNR; +inf disables noise

    void validate() const {
        if (n_taps == 0) throw std::invalid_argument("ChannelProfile: need n_taps >= 1");
        if (decay < 0.0) throw std::invalid_argument("ChannelProfile: negative decay");
    }

    /// Expected tap powers, normalized to sum 1.
    rvec tap_powers() const {
        validate();
        rvec p(n_taps);
        double total = 0.0;
        for (std::size_t i = 0; i < n_taps; ++i) {
            p[i] = std::exp(-decay * static_cast<double>(i));
            total += p[i];
        }
        for (double& v : p) v /= total;
        return p;
    }

    /// Receiver noise variance per complex sample for unit symbol power.
    double noise_variance() const {
        if (std::isinf(snr_db)) return 0.0;
        return std::pow(10.0, -snr_db / 10.0);
    }
};

/// One channel draw: complex taps plus the length-K frequency response
/// h[k] = sum_i taps[i] e^{-j 2 pi i k / K} (so E|h[k]|^2 = 1 for
/// unit-total-power taps).
struct ChannelRealization {
    cvec taps;
    cvec freq_response;

    static ChannelRealization from_taps(cvec taps, std::size_t subcarriers) {
        if (taps.empty()) throw std::invalid_argument("ChannelRealization: no taps");
        ChannelRealization r;
        r.freq_response.resize(subcarriers);
        for (std::size_t k = 0; k < subcarriers; ++k) {
            cplx acc{0.0, 0.0};
            for (std::size_t i = 0; i < taps.size(); ++i) {
                const double ang = -2.0 * kPi * static_cast<double>((i * k) % subcarriers) /
                                   static_cast<double>(subcarriers);
                acc += taps[i] * std::polar(1.0, ang);
            }
            r.freq_response[k] = acc;
        }
        r.taps = std::move(taps);
        return r;
    }
};

/// Draw circular complex Gaussian taps with the profile's PDP, normalized so
/// the expected total tap power is 1.
inline ChannelRealization sample_taps(const ChannelProfile& profile, const OfdmConfig& config,
                                      std::uint64_t seed) {
    const rvec powers = profile.tap_powers();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    cvec taps(profile.n_taps);
    for (std::size_t i = 0; i < profile.n_taps; ++i) {
        const double s = std::sqrt(powers[i] / 2.0);
        taps[i] = cplx{s * g(rng), s * g(rng)};
    }
    return ChannelRealization::from_taps(std::move(taps), config.subcarriers);
}

namespace detail {

inline void add_awgn(cvec& samples, double variance, std::mt19937_64& rng) {
    if (variance <= 0.0) return;
    std::normal_distribution<double> g(0.0, std::sqrt(variance / 2.0));
    for (cplx& v : samples) v += cplx{g(rng), g(rng)};
}

} // namespace detail

/**
 * Linear tap convolution (output truncated to the input length) plus AWGN
 * sized for the profile's per-subcarrier SNR at unit symbol power. The
 * cyclic prefix must cover the delay spread.
 */
inline cvec apply_channel(const cvec& frame_samples, const ChannelRealization& realization,
                          const ChannelProfile& profile, const OfdmConfig& config,
                          std::uint64_t seed) {
    if (realization.taps.size() > config.cp_length)
        throw DelaySpreadError("apply_channel: delay spread exceeds the cyclic prefix");
    cvec out(frame_samples.size(), cplx{0.0, 0.0});
    for (std::size_t n = 0; n < frame_samples.size(); ++n) {
        cplx acc{0.0, 0.0};
        const std::size_t imax = std::min(realization.taps.size() - 1, n);
        for (std::size_t i = 0; i <= imax; ++i) {
            acc += realization.taps[i] * frame_samples[n - i];
        }
        out[n] = acc;
    }
    std::mt19937_64 rng(seed);
    detail::add_awgn(out, profile.noise_variance(), rng);
    return out;
}

/**
 * Idealized per-symbol channel: each OFDM symbol body is circularly convolved
 * with the realization (a per-subcarrier multiplication by freq_response) and
 * its CP rebuilt from the convolved body. Equivalent to apply_channel for
 * delay spreads within the CP, and exact for synthetic responses whose
 * impulse response exceeds it (e.g. deep_fade_channel).
 */
inline cvec apply_channel_circular(const cvec& frame_samples,
                                   const ChannelRealization& realization,
                                   const ChannelProfile& profile, const OfdmConfig& config,
                                   std::uint64_t seed) {
    const std::size_t sym = config.symbol_samples();
    if (frame_samples.size() % sym != 0)
        throw FrameError("apply_channel_circular: length is not a whole number of symbols");
    const std::size_t k_total = config.subcarriers;
    if (realization.freq_response.size() != k_total)
        throw std::invalid_argument("apply_channel_circular: response/config size mismatch");
    cvec out(frame_samples.size());
    for (std::size_t s = 0; s < frame_samples.size() / sym; ++s) {
        cvec body(frame_samples.begin() + static_cast<std::ptrdiff_t>(s * sym + config.cp_length),
                  frame_samples.begin() + static_cast<std::ptrdiff_t>((s + 1) * sym));
        cvec spec = unitary_dft(body);
        for (std::size_t k = 0; k < k_total; ++k) spec[k] *= realization.freq_response[k];
        cvec faded = unitary_idft(spec);
        for (std::size_t l = 0; l < config.cp_length; ++l)
            out[s * sym + l] = faded[k_total - config.cp_length + l];
        for (std::size_t n = 0; n < k_total; ++n) out[s * sym + config.cp_length + n] = faded[n];
    }
    std::mt19937_64 rng(seed);
    detail::add_awgn(out, profile.noise_variance(), rng);
    return out;
}

/**
 * K_c = max(1, round(B_c / delta_f)) with B_c = 1 / (5 sigma_tau) and
 * sigma_tau the RMS delay spread of the expected tap power profile.
 * A zero delay spread (single tap) is fully coherent: K_c = K.
 */
inline std::size_t coherence_subcarriers(const ChannelProfile& profile,
                                         const OfdmConfig& config) {
    const rvec powers = profile.tap_powers();
    const double spacing = 1.0 / config.bandwidth_hz;
    double mean = 0.0;
    for (std::size_t i = 0; i < powers.size(); ++i)
        mean += powers[i] * static_cast<double>(i) * spacing;
    double var = 0.0;
    for (std::size_t i = 0; i < powers.size(); ++i) {
        const double d = static_cast<double>(i) * spacing - mean;
        var += powers[i] * d * d;
    }
    const double rms = std::sqrt(var);
    if (rms <= 0.0) return config.subcarriers;
    const double coherence_bw = 1.0 / (5.0 * rms);
    const double delta_f = config.bandwidth_hz / static_cast<double>(config.subcarriers);
    const double k_c = std::round(coherence_bw / delta_f);
    if (k_c < 1.0) return 1;
    if (k_c >= static_cast<double>(config.subcarriers)) return config.subcarriers;
    return static_cast<std::size_t>(k_c);
}

/**
 * Deterministic frequency response: unit gain everywhere except a band of
 * `width` bins starting at `center - width/2`, attenuated by `depth_db`
 * (power dB, so amplitude 10^{-depth/20}).
 */
inline ChannelRealization deep_fade_channel(const OfdmConfig& config, std::size_t notch_center,
                                            std::size_t notch_width, double notch_depth_db) {
    if (notch_center >= config.subcarriers)
        throw std::invalid_argument("deep_fade_channel: notch center out of band");
    const std::size_t k_total = config.subcarriers;
    ChannelRealization r;
    r.freq_response.assign(k_total, cplx{1.0, 0.0});
    const double gain = std::pow(10.0, -notch_depth_db / 20.0);
    const std::size_t start =
        notch_center >= notch_width / 2 ? notch_center - notch_width / 2 : 0;
    for (std::size_t k = start; k < std::min(start + notch_width, k_total); ++k) {
        r.freq_response[k] = cplx{gain, 0.0};
    }
    // time-domain image of the response, for completeness (length K, so the
    // linear-convolution path will reject it; use the circular path instead)
    cvec taps = unitary_idft(r.freq_response);
    const double inv_sqrt_k = 1.0 / std::sqrt(static_cast<double>(k_total));
    for (cplx& t : taps) t *= inv_sqrt_k;
    r.taps = std::move(taps);
    return r;
}

} // namespace jscc
