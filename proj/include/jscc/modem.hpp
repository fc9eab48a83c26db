#pragma once

/**
 * @file modem.hpp
 * @brief OFDM frame construction and demodulation, LS channel estimation
 *        from the preamble, common-phase-error correction, equalization with
 *        a magnitude floor, a soft-limiter PA model, and the I/Q frame file
 *        format.
 */

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "jscc/errors.hpp"
#include "jscc/mapper.hpp"
#include "jscc/signal.hpp"

namespace jscc {

/// Receiver-side bookkeeping carried with a frame (out of band in
/// simulation, sidecar metadata on disk).
struct FrameMeta {
    std::vector<double> scales;  ///< per-segment normalization factors
    std::size_t pad_count = 0;   ///< padding of the final segment
    std::size_t c_t = 0;         ///< transmitted feature channels
};

/// Time-domain OFDM frame: preamble training symbols then payload symbols,
/// each CP-extended.
struct OfdmFrame {
    cvec time_samples;
    std::size_t n_payload_symbols = 0;
    std::size_t preamble_repeats = 0;
    FrameMeta meta;
};

/// Frequency response estimate over all K bins.
struct ChannelEstimate {
    cvec h_hat;
};

/// Full-band unit-magnitude training symbol (QPSK-like phases from a fixed
/// seed); the same symbol repeats preamble_repeats times per frame.
inline cvec preamble_training_symbol(const OfdmConfig& config) {
    std::mt19937_64 rng(0x705f7265616d62ull ^ config.subcarriers);
    std::uniform_int_distribution<int> quad(0, 3);
    cvec t(config.subcarriers);
    for (cplx& v : t) v = std::polar(1.0, (2.0 * quad(rng) + 1.0) * kPi / 4.0);
    return t;
}

/// Time-domain waveform of the in-symbol pilots alone (zero data).
inline cvec pilot_waveform(const OfdmConfig& config) {
    cvec freq(config.subcarriers, cplx{0.0, 0.0});
    for (std::size_t p = 0; p < config.n_pilots(); ++p)
        freq[config.pilot_indices[p]] = config.pilot_values[p];
    return unitary_idft(freq);
}

/// |y^p[m]|^2 of the pilot waveform; the pilot term of the expected-power
/// expression.
inline rvec pilot_time_power(const OfdmConfig& config) {
    cvec wave = pilot_waveform(config);
    rvec p(wave.size());
    for (std::size_t i = 0; i < wave.size(); ++i) p[i] = std::norm(wave[i]);
    return p;
}

namespace detail {

inline void append_with_cp(cvec& out, const cvec& body, std::size_t cp) {
    out.insert(out.end(), body.end() - static_cast<std::ptrdiff_t>(cp), body.end());
    out.insert(out.end(), body.begin(), body.end());
}

} // namespace detail

/**
 * Build a frame from already-precoded symbol segments: per payload symbol the
 * data symbols go on data_indices, pilots on pilot_indices, zeros elsewhere,
 * then unitary IDFT and CP insertion. The preamble repeats the training
 * symbol with the same construction.
 */
inline OfdmFrame modulate_frame(const std::vector<SymbolSegment>& segments,
                                const OfdmConfig& config) {
    config.validate();
    OfdmFrame frame;
    frame.n_payload_symbols = segments.size();
    frame.preamble_repeats = config.preamble_repeats;
    frame.time_samples.reserve((config.preamble_repeats + segments.size()) *
                               config.symbol_samples());

    const cvec training = preamble_training_symbol(config);
    const cvec preamble_body = unitary_idft(training);
    for (std::size_t r = 0; r < config.preamble_repeats; ++r)
        detail::append_with_cp(frame.time_samples, preamble_body, config.cp_length);

    for (const SymbolSegment& seg : segments) {
        if (seg.symbols.size() != config.n_data())
            throw std::invalid_argument("modulate_frame: segment length != K_d");
        cvec freq(config.subcarriers, cplx{0.0, 0.0});
        for (std::size_t r = 0; r < config.n_data(); ++r)
            freq[config.data_indices[r]] = seg.symbols[r];
        for (std::size_t p = 0; p < config.n_pilots(); ++p)
            freq[config.pilot_indices[p]] = config.pilot_values[p];
        detail::append_with_cp(frame.time_samples, unitary_idft(freq), config.cp_length);
        frame.meta.scales.push_back(seg.scale);
    }
    if (!segments.empty()) frame.meta.pad_count = segments.back().pad_count;
    return frame;
}

/// Memoryless soft limiter: samples above the clip amplitude keep their
/// phase and lose the excess magnitude.
inline cvec pa_soft_clip(const cvec& samples, double clip_amplitude) {
    if (clip_amplitude <= 0.0)
        throw std::invalid_argument("pa_soft_clip: clip amplitude must be positive");
    cvec out = samples;
    for (cplx& v : out) {
        const double mag = std::abs(v);
        if (mag > clip_amplitude) v *= clip_amplitude / mag;
    }
    return out;
}

inline double rms_amplitude(const cvec& samples) {
    if (samples.empty()) return 0.0;
    return std::sqrt(norm_sq(samples) / static_cast<double>(samples.size()));
}

/// The preamble slice of a received frame.
inline cvec preamble_samples(const cvec& rx, const OfdmConfig& config) {
    const std::size_t want = config.preamble_repeats * config.symbol_samples();
    if (rx.size() < want) throw FrameError("preamble_samples: frame shorter than preamble");
    return cvec(rx.begin(), rx.begin() + static_cast<std::ptrdiff_t>(want));
}

/// LS estimate: per preamble repeat strip the CP, DFT, divide by the known
/// training symbol, then average across repeats.
inline ChannelEstimate estimate_channel_ls(const cvec& preamble_rx, const OfdmConfig& config) {
    const std::size_t sym = config.symbol_samples();
    if (config.preamble_repeats == 0 || preamble_rx.size() != config.preamble_repeats * sym)
        throw FrameError("estimate_channel_ls: preamble length mismatch");
    const cvec training = preamble_training_symbol(config);
    for (const cplx& t : training)
        if (std::abs(t) == 0.0)
            throw Error("estimate_channel_ls: training symbol zero on a subcarrier");
    ChannelEstimate est;
    est.h_hat.assign(config.subcarriers, cplx{0.0, 0.0});
    for (std::size_t r = 0; r < config.preamble_repeats; ++r) {
        cvec body(preamble_rx.begin() + static_cast<std::ptrdiff_t>(r * sym + config.cp_length),
                  preamble_rx.begin() + static_cast<std::ptrdiff_t>((r + 1) * sym));
        cvec spec = unitary_dft(body);
        for (std::size_t k = 0; k < config.subcarriers; ++k)
            est.h_hat[k] += spec[k] / training[k];
    }
    const double inv = 1.0 / static_cast<double>(config.preamble_repeats);
    for (cplx& v : est.h_hat) v *= inv;
    return est;
}

struct DemodulatedFrame {
    std::vector<cvec> data_symbols;  ///< per payload symbol, length K_d
    std::vector<cvec> pilot_obs;     ///< per payload symbol, length K_p
};

/// Strip CP and DFT every payload symbol, extracting data and pilot bins in
/// config order. The frame must be a whole number of symbols.
inline DemodulatedFrame demodulate_frame(const cvec& rx, const OfdmConfig& config) {
    const std::size_t sym = config.symbol_samples();
    if (rx.size() % sym != 0 || rx.size() / sym < config.preamble_repeats)
        throw FrameError("demodulate_frame: length does not match the frame structure");
    const std::size_t n_payload = rx.size() / sym - config.preamble_repeats;
    DemodulatedFrame out;
    out.data_symbols.reserve(n_payload);
    out.pilot_obs.reserve(n_payload);
    for (std::size_t s = 0; s < n_payload; ++s) {
        const std::size_t base = (config.preamble_repeats + s) * sym + config.cp_length;
        cvec body(rx.begin() + static_cast<std::ptrdiff_t>(base),
                  rx.begin() + static_cast<std::ptrdiff_t>(base + config.subcarriers));
        cvec spec = unitary_dft(body);
        cvec data(config.n_data());
        for (std::size_t r = 0; r < config.n_data(); ++r)
            data[r] = spec[config.data_indices[r]];
        cvec pilots(config.n_pilots());
        for (std::size_t p = 0; p < config.n_pilots(); ++p)
            pilots[p] = spec[config.pilot_indices[p]];
        out.data_symbols.push_back(std::move(data));
        out.pilot_obs.push_back(std::move(pilots));
    }
    return out;
}

struct CpeResult {
    std::vector<cvec> symbols;  ///< phase-corrected data symbols
    rvec phases;                ///< estimated common phase per payload symbol
    std::size_t uncorrected = 0;  ///< symbols where all pilot products vanished
};

/// Estimate the residual common phase per payload symbol from the in-symbol
/// pilots, phi = arg(sum_p z_p conj(h_hat_p pilot_p)), and remove it.
inline CpeResult cpe_correct(const std::vector<cvec>& data_symbols,
                             const std::vector<cvec>& pilot_obs, const ChannelEstimate& est,
                             const OfdmConfig& config) {
    if (config.n_pilots() == 0)
        throw std::invalid_argument("cpe_correct: config has no pilots");
    if (data_symbols.size() != pilot_obs.size())
        throw std::invalid_argument("cpe_correct: symbol/pilot count mismatch");
    CpeResult out;
    out.symbols.reserve(data_symbols.size());
    out.phases.reserve(data_symbols.size());
    for (std::size_t s = 0; s < data_symbols.size(); ++s) {
        cplx acc{0.0, 0.0};
        for (std::size_t p = 0; p < config.n_pilots(); ++p) {
            const cplx expected = est.h_hat[config.pilot_indices[p]] * config.pilot_values[p];
            acc += pilot_obs[s][p] * std::conj(expected);
        }
        double phi = 0.0;
        if (std::abs(acc) > 0.0) {
            phi = std::arg(acc);
        } else {
            ++out.uncorrected;  // no usable pilot energy; pass through
        }
        const cplx rot = std::polar(1.0, -phi);
        cvec corrected = data_symbols[s];
        for (cplx& v : corrected) v *= rot;
        out.symbols.push_back(std::move(corrected));
        out.phases.push_back(phi);
    }
    return out;
}

struct EqualizeResult {
    cvec symbols;                      ///< length K_d
    std::vector<std::size_t> floored;  ///< data positions where the floor kicked in
};

/// Divide by the channel estimate at each data bin, flooring |h_hat| at
/// 1e-3 of its median over the data bins so deep fades stay bounded.
inline EqualizeResult equalize(const cvec& z, const ChannelEstimate& est,
                               const OfdmConfig& config) {
    if (z.size() != config.n_data())
        throw std::invalid_argument("equalize: symbol length != K_d");
    if (est.h_hat.size() != config.subcarriers)
        throw std::invalid_argument("equalize: estimate length != K");
    rvec mags(config.n_data());
    for (std::size_t r = 0; r < config.n_data(); ++r)
        mags[r] = std::abs(est.h_hat[config.data_indices[r]]);
    rvec sorted = mags;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double floor_mag = 1e-3 * sorted[sorted.size() / 2];

    EqualizeResult out;
    out.symbols.resize(config.n_data());
    for (std::size_t r = 0; r < config.n_data(); ++r) {
        cplx h = est.h_hat[config.data_indices[r]];
        if (mags[r] < floor_mag) {
            out.floored.push_back(r);
            h = (mags[r] == 0.0) ? cplx{floor_mag, 0.0} : h * (floor_mag / mags[r]);
        }
        out.symbols[r] = z[r] / h;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Frame I/Q file format: <path> holds interleaved little-endian float32 I/Q
// samples; <path>.meta is a key=value sidecar with the config hash and the
// receiver bookkeeping.
// ---------------------------------------------------------------------------

inline void write_frame_iq(const OfdmFrame& frame, std::uint64_t config_hash,
                           const std::string& path) {
    std::string buf;
    buf.reserve(frame.time_samples.size() * 8);
    auto put_f32 = [&buf](float f) {
        std::uint32_t u;
        std::memcpy(&u, &f, sizeof(u));
        detail::put_u32_le(buf, u);
    };
    for (const cplx& v : frame.time_samples) {
        put_f32(static_cast<float>(v.real()));
        put_f32(static_cast<float>(v.imag()));
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("write_frame_iq: cannot open " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw FormatError("write_frame_iq: short write");

    std::ostringstream meta;
    meta << "config_hash=" << std::hex << config_hash << std::dec << "\n";
    meta << "preamble_repeats=" << frame.preamble_repeats << "\n";
    meta << "n_payload_symbols=" << frame.n_payload_symbols << "\n";
    meta << "pad_count=" << frame.meta.pad_count << "\n";
    meta << "c_t=" << frame.meta.c_t << "\n";
    meta << "scales=";
    for (std::size_t i = 0; i < frame.meta.scales.size(); ++i) {
        char tmp[32];
        std::snprintf(tmp, sizeof(tmp), "%.17g", frame.meta.scales[i]);
        meta << (i ? "," : "") << tmp;
    }
    meta << "\n";
    std::ofstream mout(path + ".meta", std::ios::trunc);
    if (!mout) throw FormatError("write_frame_iq: cannot open sidecar for " + path);
    mout << meta.str();
}

struct LoadedFrame {
    OfdmFrame frame;
    std::uint64_t config_hash = 0;
};

inline LoadedFrame read_frame_iq(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("read_frame_iq: cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() % 8 != 0) throw FormatError("read_frame_iq: truncated I/Q payload");
    LoadedFrame out;
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
    out.frame.time_samples.resize(buf.size() / 8);
    for (std::size_t i = 0; i < out.frame.time_samples.size(); ++i) {
        float re, im;
        std::uint32_t u = detail::get_u32_le(p + 8 * i);
        std::memcpy(&re, &u, sizeof(re));
        u = detail::get_u32_le(p + 8 * i + 4);
        std::memcpy(&im, &u, sizeof(im));
        out.frame.time_samples[i] = cplx{re, im};
    }

    std::ifstream min(path + ".meta");
    if (!min) throw FormatError("read_frame_iq: missing sidecar for " + path);
    std::string line;
    while (std::getline(min, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "config_hash") {
            out.config_hash = std::stoull(val, nullptr, 16);
        } else if (key == "preamble_repeats") {
            out.frame.preamble_repeats = std::stoull(val);
        } else if (key == "n_payload_symbols") {
            out.frame.n_payload_symbols = std::stoull(val);
        } else if (key == "pad_count") {
            out.frame.meta.pad_count = std::stoull(val);
        } else if (key == "c_t") {
            out.frame.meta.c_t = std::stoull(val);
        } else if (key == "scales" && !val.empty()) {
            std::istringstream ss(val);
            std::string tok;
            while (std::getline(ss, tok, ',')) out.frame.meta.scales.push_back(std::stod(tok));
        }
    }
    return out;
}

} // namespace jscc
