#pragma once

/**
 * @file experiment.hpp
 * @brief Declarative experiment runner behind the CLI: parses a JSON config
 *        with standard 64-subcarrier defaults (48 data bins, 10 MHz, 3 ms),
 *        runs one of the six experiment kinds, and writes hash-stamped CSV
 *        and text artifacts. Outputs are pure functions of (config, seed);
 *        partially written artifacts are removed on failure.
 */

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "jscc/channel.hpp"
#include "jscc/errors.hpp"
#include "jscc/features.hpp"
#include "jscc/mapper.hpp"
#include "jscc/metrics.hpp"
#include "jscc/modem.hpp"
#include "jscc/pipeline.hpp"
#include "jscc/precoder.hpp"
#include "jscc/scheduler.hpp"
#include "jscc/signal.hpp"

namespace jscc {

enum class ChannelKind { ideal, rayleigh, deep_fade };
enum class CsiMode { estimated, perfect };

/// Fully resolved experiment settings (config JSON plus defaults).
struct ExperimentConfig {
    std::uint64_t seed = 1;

    OfdmConfig ofdm = OfdmConfig::wlan64();

    bool feature_from_file = false;
    std::string feature_file;
    FeatureSpec feature_spec;

    ChannelKind channel = ChannelKind::rayleigh;
    ChannelProfile profile{8, 0.5, 10.0};
    std::size_t notch_center = 10;
    std::size_t notch_width = 4;
    double notch_depth_db = 20.0;

    double precoder_weight = 0.1;          ///< balanced-omega weight
    std::optional<double> precoder_omega;  ///< raw omega override
    std::size_t precoder_inits = 8;
    std::size_t precoder_k_c = 0;  ///< 0 = derive from the channel profile
    std::size_t precoder_sweeps = 20;
    double precoder_tol = 1e-6;
    std::string precoder_matrix_file;  ///< reuse a persisted matrix
    std::size_t training_segments = 3000;

    double t_max_s = 3e-3;

    bool pa_enabled = false;
    double pa_backoff = 2.0;

    rvec e2e_snr_sweep_db = {0.0, 10.0, 20.0, 30.0};
    std::size_t e2e_frames = 20;
    CsiMode e2e_csi = CsiMode::estimated;
    std::optional<std::size_t> e2e_retained_channels;
    bool e2e_dump_frame = false;

    std::size_t papr_symbols = 10000;

    std::size_t correlation_blocks = 10000;
    std::size_t correlation_max_distance = 40;

    rvec schedule_t_max_sweep_ms = {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0};
    rvec schedule_bandwidth_sweep_hz;  ///< empty = config bandwidth only

    double stream_fps = 30.0;
    std::size_t stream_buffer = 4;
    std::size_t stream_frames = 300;
    double stream_encode_ms = 10.0;
    double stream_transmit_ms = 15.0;
    double stream_encode_jitter_ms = 0.0;
    double stream_transmit_jitter_ms = 0.0;
    PipelineMode stream_mode = PipelineMode::discrete_event;
    bool stream_phy = false;  ///< run the full modem chain per frame

    std::uint64_t hash = 0;  ///< FNV over the canonical config dump + seed
};

namespace detail {

inline void require_keys(const nlohmann::json& obj, const char* section,
                         std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) ok = true;
        if (!ok)
            throw std::invalid_argument(std::string("config: unknown key '") + it.key() +
                                        "' in section " + section);
    }
}

} // namespace detail

/// Parse and validate an experiment config, applying all defaults.
inline ExperimentConfig parse_experiment(const nlohmann::json& j,
                                         std::optional<std::uint64_t> seed_override = {}) {
    if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
    detail::require_keys(j, "top level",
                         {"seed", "ofdm", "feature", "channel", "precoder", "budget", "pa",
                          "e2e", "papr", "correlation", "schedule", "stream"});
    ExperimentConfig c;
    c.seed = j.value("seed", std::uint64_t{1});
    if (seed_override) c.seed = *seed_override;

    if (j.contains("ofdm")) {
        const auto& o = j.at("ofdm");
        detail::require_keys(o, "ofdm",
                             {"plan", "subcarriers", "data", "cp", "bandwidth_hz",
                              "preamble_repeats"});
        const std::string plan = o.value("plan", std::string("wlan64"));
        if (plan == "wlan64") {
            c.ofdm = OfdmConfig::wlan64();
        } else if (plan == "contiguous") {
            c.ofdm = OfdmConfig::contiguous(o.value("subcarriers", std::size_t{16}),
                                            o.value("data", std::size_t{8}),
                                            o.value("cp", std::size_t{4}));
        } else {
            throw std::invalid_argument("config: ofdm.plan must be wlan64 or contiguous");
        }
        if (o.contains("bandwidth_hz")) c.ofdm.bandwidth_hz = o.at("bandwidth_hz").get<double>();
        if (o.contains("preamble_repeats"))
            c.ofdm.preamble_repeats = o.at("preamble_repeats").get<std::size_t>();
        c.ofdm.validate();
    }

    if (j.contains("feature")) {
        const auto& f = j.at("feature");
        detail::require_keys(f, "feature",
                             {"file", "height", "width", "channels", "rho", "sigma"});
        if (f.contains("file")) {
            c.feature_from_file = true;
            c.feature_file = f.at("file").get<std::string>();
            if (!std::filesystem::exists(c.feature_file))
                throw std::invalid_argument("config: feature.file does not exist: " +
                                            c.feature_file);
        } else {
            c.feature_spec.height = f.value("height", std::size_t{64});
            c.feature_spec.width = f.value("width", std::size_t{64});
            c.feature_spec.channels = f.value("channels", std::size_t{12});
            c.feature_spec.rho = f.value("rho", 0.9);
            c.feature_spec.sigma = f.value("sigma", 0.5);
            c.feature_spec.validate();
        }
    }

    if (j.contains("channel")) {
        const auto& ch = j.at("channel");
        detail::require_keys(ch, "channel",
                             {"type", "taps", "decay", "snr_db", "center", "width", "depth_db"});
        const std::string type = ch.value("type", std::string("rayleigh"));
        if (type == "ideal") {
            c.channel = ChannelKind::ideal;
        } else if (type == "rayleigh") {
            c.channel = ChannelKind::rayleigh;
        } else if (type == "deep_fade") {
            c.channel = ChannelKind::deep_fade;
        } else {
            throw std::invalid_argument("config: channel.type must be ideal, rayleigh or deep_fade");
        }
        c.profile.n_taps = ch.value("taps", std::size_t{8});
        c.profile.decay = ch.value("decay", 0.5);
        if (ch.contains("snr_db")) {
            if (ch.at("snr_db").is_string() && ch.at("snr_db").get<std::string>() == "inf")
                c.profile.snr_db = std::numeric_limits<double>::infinity();
            else
                c.profile.snr_db = ch.at("snr_db").get<double>();
        }
        c.profile.validate();
        c.notch_center = ch.value("center", std::size_t{10});
        c.notch_width = ch.value("width", std::size_t{4});
        c.notch_depth_db = ch.value("depth_db", 20.0);
    }

    if (j.contains("precoder")) {
        const auto& p = j.at("precoder");
        detail::require_keys(p, "precoder",
                             {"weight", "omega", "n_init", "k_c", "max_sweeps", "tol",
                              "matrix_file", "training_segments"});
        c.precoder_weight = p.value("weight", 0.1);
        if (p.contains("omega")) c.precoder_omega = p.at("omega").get<double>();
        c.precoder_inits = p.value("n_init", std::size_t{8});
        c.precoder_k_c = p.value("k_c", std::size_t{0});
        c.precoder_sweeps = p.value("max_sweeps", std::size_t{20});
        c.precoder_tol = p.value("tol", 1e-6);
        c.precoder_matrix_file = p.value("matrix_file", std::string());
        if (!c.precoder_matrix_file.empty() && !std::filesystem::exists(c.precoder_matrix_file))
            throw std::invalid_argument("config: precoder.matrix_file does not exist");
        c.training_segments = p.value("training_segments", std::size_t{3000});
    }

    if (j.contains("budget")) {
        const auto& b = j.at("budget");
        detail::require_keys(b, "budget", {"t_max_ms"});
        c.t_max_s = b.value("t_max_ms", 3.0) * 1e-3;
    }

    if (j.contains("pa")) {
        const auto& p = j.at("pa");
        detail::require_keys(p, "pa", {"enabled", "backoff"});
        c.pa_enabled = p.value("enabled", false);
        c.pa_backoff = p.value("backoff", 2.0);
        if (c.pa_backoff <= 0.0)
            throw std::invalid_argument("config: pa.backoff must be positive");
    }

    if (j.contains("e2e")) {
        const auto& e = j.at("e2e");
        detail::require_keys(e, "e2e",
                             {"snr_sweep_db", "frames", "csi", "retained_channels",
                              "dump_frame"});
        if (e.contains("snr_sweep_db")) c.e2e_snr_sweep_db = e.at("snr_sweep_db").get<rvec>();
        c.e2e_frames = e.value("frames", std::size_t{20});
        const std::string csi = e.value("csi", std::string("estimated"));
        if (csi == "perfect")
            c.e2e_csi = CsiMode::perfect;
        else if (csi == "estimated")
            c.e2e_csi = CsiMode::estimated;
        else
            throw std::invalid_argument("config: e2e.csi must be estimated or perfect");
        if (e.contains("retained_channels"))
            c.e2e_retained_channels = e.at("retained_channels").get<std::size_t>();
        c.e2e_dump_frame = e.value("dump_frame", false);
    }

    if (j.contains("papr")) {
        const auto& p = j.at("papr");
        detail::require_keys(p, "papr", {"symbols"});
        c.papr_symbols = p.value("symbols", std::size_t{10000});
    }

    if (j.contains("correlation")) {
        const auto& p = j.at("correlation");
        detail::require_keys(p, "correlation", {"blocks", "max_distance"});
        c.correlation_blocks = p.value("blocks", std::size_t{10000});
        c.correlation_max_distance = p.value("max_distance", std::size_t{40});
    }

    if (j.contains("schedule")) {
        const auto& s = j.at("schedule");
        detail::require_keys(s, "schedule", {"t_max_sweep_ms", "bandwidth_sweep_hz"});
        if (s.contains("t_max_sweep_ms"))
            c.schedule_t_max_sweep_ms = s.at("t_max_sweep_ms").get<rvec>();
        if (s.contains("bandwidth_sweep_hz"))
            c.schedule_bandwidth_sweep_hz = s.at("bandwidth_sweep_hz").get<rvec>();
    }

    if (j.contains("stream")) {
        const auto& s = j.at("stream");
        detail::require_keys(s, "stream",
                             {"fps", "buffer", "frames", "encode_ms", "transmit_ms",
                              "encode_jitter_ms", "transmit_jitter_ms", "mode", "phy"});
        c.stream_fps = s.value("fps", 30.0);
        c.stream_buffer = s.value("buffer", std::size_t{4});
        c.stream_frames = s.value("frames", std::size_t{300});
        c.stream_encode_ms = s.value("encode_ms", 10.0);
        c.stream_transmit_ms = s.value("transmit_ms", 15.0);
        c.stream_encode_jitter_ms = s.value("encode_jitter_ms", 0.0);
        c.stream_transmit_jitter_ms = s.value("transmit_jitter_ms", 0.0);
        const std::string mode = s.value("mode", std::string("discrete_event"));
        if (mode == "wall_clock")
            c.stream_mode = PipelineMode::wall_clock;
        else if (mode == "discrete_event")
            c.stream_mode = PipelineMode::discrete_event;
        else
            throw std::invalid_argument("config: stream.mode must be discrete_event or wall_clock");
        c.stream_phy = s.value("phy", false);
    }

    const std::string canon = j.dump();
    c.hash = fnv1a(canon.data(), canon.size());
    c.hash = hash_combine(c.hash, c.seed);
    return c;
}

/// Raises FormatError when a stored artifact was produced under a different
/// config than the one analyzing it.
inline void require_matching_hash(std::uint64_t expected, std::uint64_t actual) {
    if (expected != actual)
        throw FormatError("artifact config hash does not match the current config");
}

namespace detail {

/// Collects the files an experiment writes so a failed run leaves nothing.
class ArtifactWriter {
public:
    explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }

    std::filesystem::path path_for(const std::string& name) const { return dir_ / name; }

    void write(const std::string& name, const std::string& content) {
        const std::filesystem::path p = path_for(name);
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open artifact " + p.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error("short write to " + p.string());
        written_.push_back(p);
    }

    void note(const std::filesystem::path& p) { written_.push_back(p); }

    void discard_all() {
        for (const auto& p : written_) {
            std::error_code ec;
            std::filesystem::remove(p, ec);
        }
        written_.clear();
    }

    const std::vector<std::filesystem::path>& written() const { return written_; }

private:
    std::filesystem::path dir_;
    std::vector<std::filesystem::path> written_;
};

inline std::string csv_stamp(const ExperimentConfig& c) {
    char buf[80];
    std::snprintf(buf, sizeof(buf), "# config_hash %016llx seed %llu\n",
                  static_cast<unsigned long long>(c.hash),
                  static_cast<unsigned long long>(c.seed));
    return buf;
}

inline std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

inline FeatureBlock experiment_features(const ExperimentConfig& c, std::uint64_t purpose) {
    if (c.feature_from_file) return load_features(c.feature_file);
    return generate_features(c.feature_spec, derive_seed(c.seed, purpose));
}

inline std::size_t resolve_k_c(const ExperimentConfig& c) {
    if (c.precoder_k_c >= 1) return std::min(c.precoder_k_c, c.ofdm.subcarriers);
    if (c.channel == ChannelKind::rayleigh) return coherence_subcarriers(c.profile, c.ofdm);
    return std::min<std::size_t>(8, c.ofdm.subcarriers);
}

/// Long mapped stream for covariance training; run once per experiment.
inline std::vector<cvec> training_symbol_segments(const ExperimentConfig& c,
                                                  std::uint64_t purpose) {
    const std::size_t seg_len = 2 * c.ofdm.n_data();
    const std::size_t need = (c.training_segments + 2) * seg_len;
    FeatureBlock block;
    if (c.feature_from_file) {
        block = load_features(c.feature_file);
    } else {
        FeatureSpec spec = c.feature_spec;
        spec.height = need / spec.width + 1;
        spec.channels = 1;
        block = generate_features(spec, derive_seed(c.seed, purpose));
    }
    std::vector<SymbolSegment> mapped = map_block(block, c.ofdm, 1.0);
    std::vector<cvec> segments;
    segments.reserve(mapped.size());
    for (std::size_t i = 0; i + 1 < mapped.size() && segments.size() < c.training_segments; ++i)
        segments.push_back(mapped[i].symbols);
    if (segments.size() < 2)
        throw InsufficientDataError("training stream too short for covariance estimation");
    return segments;
}

struct TrainedPrecoder {
    PrecodingMatrix matrix;
    SymbolCovariance covariance;
    ChannelCovariance band;
    double omega = 0.0;
    std::size_t k_c = 0;
};

inline TrainedPrecoder train_precoder(const ExperimentConfig& c, double omega_weight,
                                      bool force_omega_zero = false) {
    TrainedPrecoder t;
    t.k_c = resolve_k_c(c);
    t.band = banded_channel_covariance(c.ofdm, t.k_c);
    t.covariance = estimate_symbol_covariance(training_symbol_segments(c, 101));
    const rvec pilot_p = pilot_time_power(c.ofdm);
    if (force_omega_zero)
        t.omega = 0.0;
    else if (c.precoder_omega)
        t.omega = *c.precoder_omega;
    else
        t.omega = balanced_omega(t.covariance, t.band, c.ofdm, 1.0, pilot_p, omega_weight);
    if (!c.precoder_matrix_file.empty()) {
        t.matrix = load_precoder(c.precoder_matrix_file);
        if (static_cast<std::size_t>(t.matrix.v.rows()) != c.ofdm.n_data())
            throw InvalidPrecoderError("persisted precoder does not match K_d");
        return t;
    }
    t.matrix = optimize_precoder(t.covariance, t.band, c.ofdm, 1.0, pilot_p, t.omega,
                                 c.precoder_inits, c.precoder_sweeps, c.precoder_tol,
                                 derive_seed(c.seed, 202));
    return t;
}

/// Time-domain waveform bodies of the payload symbols of a frame.
inline std::vector<cvec> payload_bodies(const OfdmFrame& frame, const OfdmConfig& config) {
    std::vector<cvec> bodies;
    const std::size_t sym = config.symbol_samples();
    for (std::size_t s = config.preamble_repeats; s < config.preamble_repeats +
         frame.n_payload_symbols; ++s) {
        bodies.emplace_back(
            frame.time_samples.begin() + static_cast<std::ptrdiff_t>(s * sym + config.cp_length),
            frame.time_samples.begin() + static_cast<std::ptrdiff_t>((s + 1) * sym));
    }
    return bodies;
}

} // namespace detail

/// One frame through the whole transmit/receive chain.
struct ChainResult {
    FeatureBlock recovered;
    rvec per_position_sq_error;     ///< summed |tx-rx|^2 per data position
    std::size_t symbol_count = 0;   ///< payload symbols accumulated
    double symbol_sq_error = 0.0;   ///< summed over symbols and positions
    std::size_t floored_bins = 0;
    OfdmFrame tx_frame;             ///< post-PA transmit frame
};

/**
 * features -> map -> (precode) -> modulate -> (PA) -> channel -> demodulate
 * -> CPE -> equalize -> (inverse precode) -> inverse map. The per-position
 * squared error is measured on the normalized data symbols so the noise
 * level is directly comparable to the channel sigma^2.
 */
inline ChainResult run_chain(const FeatureBlock& features, const ExperimentConfig& c,
                             const PrecodingMatrix* precoder, double snr_db,
                             std::uint64_t frame_seed) {
    ChainResult result;
    std::vector<SymbolSegment> mapped = map_block(features, c.ofdm, 1.0);
    std::vector<SymbolSegment> tx = mapped;
    if (precoder) {
        for (SymbolSegment& seg : tx) seg.symbols = apply_precoding(*precoder, seg.symbols);
    }
    OfdmFrame frame = modulate_frame(tx, c.ofdm);
    if (c.pa_enabled) {
        const double clip = c.pa_backoff * rms_amplitude(frame.time_samples);
        frame.time_samples = pa_soft_clip(frame.time_samples, clip);
    }
    result.tx_frame = frame;

    ChannelProfile profile = c.profile;
    profile.snr_db = snr_db;
    cvec rx;
    cvec true_response(c.ofdm.subcarriers, cplx{1.0, 0.0});
    switch (c.channel) {
        case ChannelKind::ideal: {
            ChannelRealization unit =
                ChannelRealization::from_taps({cplx{1.0, 0.0}}, c.ofdm.subcarriers);
            rx = apply_channel(frame.time_samples, unit, profile, c.ofdm,
                               derive_seed(frame_seed, 1));
            break;
        }
        case ChannelKind::rayleigh: {
            ChannelRealization r = sample_taps(profile, c.ofdm, derive_seed(frame_seed, 2));
            true_response = r.freq_response;
            rx = apply_channel(frame.time_samples, r, profile, c.ofdm,
                               derive_seed(frame_seed, 1));
            break;
        }
        case ChannelKind::deep_fade: {
            ChannelRealization r =
                deep_fade_channel(c.ofdm, c.notch_center, c.notch_width, c.notch_depth_db);
            true_response = r.freq_response;
            rx = apply_channel_circular(frame.time_samples, r, profile, c.ofdm,
                                        derive_seed(frame_seed, 1));
            break;
        }
    }

    ChannelEstimate est;
    if (c.e2e_csi == CsiMode::perfect) {
        est.h_hat = true_response;
    } else {
        est = estimate_channel_ls(preamble_samples(rx, c.ofdm), c.ofdm);
    }
    DemodulatedFrame demod = demodulate_frame(rx, c.ofdm);
    CpeResult cpe;
    if (c.ofdm.n_pilots() > 0) {
        cpe = cpe_correct(demod.data_symbols, demod.pilot_obs, est, c.ofdm);
    } else {
        cpe.symbols = demod.data_symbols;  // no pilots, no phase tracking
        cpe.phases.assign(demod.data_symbols.size(), 0.0);
    }

    result.per_position_sq_error.assign(c.ofdm.n_data(), 0.0);
    std::vector<cvec> received;
    std::vector<double> scales;
    received.reserve(mapped.size());
    for (std::size_t s = 0; s < cpe.symbols.size(); ++s) {
        EqualizeResult eq = equalize(cpe.symbols[s], est, c.ofdm);
        result.floored_bins += eq.floored.size();
        cvec data = precoder ? invert_precoding(*precoder, eq.symbols) : eq.symbols;
        for (std::size_t r = 0; r < c.ofdm.n_data(); ++r) {
            const double e = std::norm(data[r] - mapped[s].symbols[r]);
            result.per_position_sq_error[r] += e;
            result.symbol_sq_error += e;
        }
        ++result.symbol_count;
        received.push_back(std::move(data));
        scales.push_back(mapped[s].scale);
    }
    result.recovered = unmap_block(received, scales, mapped.back().pad_count, features.height,
                                   features.width, features.channels);
    return result;
}

inline double feature_mse(const FeatureBlock& a, const FeatureBlock& b) {
    if (a.size() != b.size()) throw std::invalid_argument("feature_mse: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

// ---------------------------------------------------------------------------
// Experiment kinds
// ---------------------------------------------------------------------------

namespace detail {

inline MetricsReport run_papr_experiment(const ExperimentConfig& c, ArtifactWriter& out) {
    TrainedPrecoder trained = train_precoder(c, c.precoder_weight);

    FeatureSpec spec = c.feature_from_file ? FeatureSpec{} : c.feature_spec;
    const std::size_t seg_len = 2 * c.ofdm.n_data();
    rvec papr_plain, papr_precoded, papr_unclipped;
    papr_plain.reserve(c.papr_symbols);

    // paired streams: the unclipped variant reuses the same pre-clip draw
    FeatureBlock clipped, unclipped;
    if (c.feature_from_file) {
        clipped = load_features(c.feature_file);
        unclipped = clipped;
    } else {
        FeatureSpec m = spec;
        m.channels = (c.papr_symbols * seg_len) / (m.height * m.width) + 1;
        unclipped = generate_ar1(m, derive_seed(c.seed, 303));
        clipped = unclipped;
        for (double& v : clipped.data) v = clip_activation(v);
    }
    auto mapped_plain = map_block(clipped, c.ofdm, 1.0);
    auto mapped_raw = map_block(unclipped, c.ofdm, 1.0);
    const std::size_t n = std::min({mapped_plain.size(), mapped_raw.size(), c.papr_symbols});
    for (std::size_t i = 0; i < n; ++i) {
        SymbolSegment prec = mapped_plain[i];
        prec.symbols = apply_precoding(trained.matrix, prec.symbols);
        OfdmFrame f_plain = modulate_frame({mapped_plain[i]}, c.ofdm);
        OfdmFrame f_prec = modulate_frame({prec}, c.ofdm);
        OfdmFrame f_raw = modulate_frame({mapped_raw[i]}, c.ofdm);
        papr_plain.push_back(papr_db(payload_bodies(f_plain, c.ofdm)[0]));
        papr_precoded.push_back(papr_db(payload_bodies(f_prec, c.ofdm)[0]));
        papr_unclipped.push_back(papr_db(payload_bodies(f_raw, c.ofdm)[0]));
    }

    std::string csv = csv_stamp(c) + "variant,papr_db,probability\n";
    auto emit = [&csv](const char* variant, const rvec& values) {
        for (const auto& [v, p] : empirical_cdf(values))
            csv += std::string(variant) + "," + fmt(v) + "," + fmt(p) + "\n";
    };
    emit("unprecoded_clipped", papr_plain);
    emit("precoded_clipped", papr_precoded);
    emit("unprecoded_unclipped", papr_unclipped);
    out.write("papr_cdf.csv", csv);

    MetricsReport report;
    report.config_hash = c.hash;
    report.seed = c.seed;
    report.add("symbols", static_cast<double>(n), "count");
    report.add("k_c", static_cast<double>(trained.k_c), "subcarriers");
    report.add("omega", trained.omega, "");
    report.add("papr_p99_unprecoded_clipped", percentile(papr_plain, 0.99), "dB");
    report.add("papr_p99_precoded_clipped", percentile(papr_precoded, 0.99), "dB");
    report.add("papr_p99_unprecoded_unclipped", percentile(papr_unclipped, 0.99), "dB");
    report.add("papr_p99_reduction",
               percentile(papr_plain, 0.99) - percentile(papr_precoded, 0.99), "dB");
    out.write("summary.txt", report.to_text());
    return report;
}

inline MetricsReport run_correlation_experiment(const ExperimentConfig& c, ArtifactWriter& out) {
    // decorrelation study: omega = 0 puts all weight on the correlation term
    TrainedPrecoder trained = train_precoder(c, c.precoder_weight, true);

    FeatureBlock features = experiment_features(c, 404);
    const rvec feat_corr = empirical_feature_correlation(features, c.correlation_max_distance);
    std::string fcsv = csv_stamp(c) + "distance,correlation\n";
    for (std::size_t d = 0; d < feat_corr.size(); ++d)
        fcsv += fmt(static_cast<double>(d)) + "," + fmt(feat_corr[d]) + "\n";
    out.write("feature_correlation.csv", fcsv);

    // symbol correlation before/after precoding, and at the receiver
    const std::size_t seg_len = 2 * c.ofdm.n_data();
    FeatureSpec m = c.feature_spec;
    if (!c.feature_from_file)
        m.channels = (c.correlation_blocks * seg_len) / (m.height * m.width) + 1;
    FeatureBlock stream = c.feature_from_file ? load_features(c.feature_file)
                                              : generate_features(m, derive_seed(c.seed, 405));
    auto mapped = map_block(stream, c.ofdm, 1.0);
    std::vector<cvec> plain, precoded, received;
    std::mt19937_64 noise_rng(derive_seed(c.seed, 406));
    const double sigma2 = c.profile.noise_variance();
    std::normal_distribution<double> g(0.0, std::sqrt(std::max(sigma2, 0.0) / 2.0));
    const std::size_t blocks = std::min(mapped.size(), c.correlation_blocks);
    for (std::size_t i = 0; i < blocks; ++i) {
        plain.push_back(mapped[i].symbols);
        cvec xt = apply_precoding(trained.matrix, mapped[i].symbols);
        // received symbols: per-block channel draw times the precoded symbol
        ChannelRealization r = sample_taps(c.profile, c.ofdm, derive_seed(c.seed, 10000 + i));
        cvec z(xt.size());
        for (std::size_t k = 0; k < xt.size(); ++k) {
            z[k] = r.freq_response[c.ofdm.data_indices[k]] * xt[k];
            if (sigma2 > 0.0) z[k] += cplx{g(noise_rng), g(noise_rng)};
        }
        received.push_back(std::move(z));
        precoded.push_back(std::move(xt));
    }

    auto matrix_csv = [&](const CorrelationMatrix& m2) {
        std::string csv = csv_stamp(c);
        for (std::size_t i = 0; i < m2.magnitude.size(); ++i) {
            for (std::size_t j = 0; j < m2.magnitude[i].size(); ++j) {
                csv += (j ? "," : "") + fmt(m2.magnitude[i][j]);
            }
            csv += "\n";
        }
        return csv;
    };
    CorrelationMatrix cm_plain = cross_subcarrier_correlation(plain);
    CorrelationMatrix cm_prec = cross_subcarrier_correlation(precoded);
    CorrelationMatrix cm_rx = cross_subcarrier_correlation(received);
    out.write("symbol_correlation_unprecoded.csv", matrix_csv(cm_plain));
    out.write("symbol_correlation_precoded.csv", matrix_csv(cm_prec));
    out.write("symbol_correlation_received.csv", matrix_csv(cm_rx));

    auto band_mean = [&](const CorrelationMatrix& m2) {
        double acc = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < m2.magnitude.size(); ++i) {
            for (std::size_t j = 0; j < m2.magnitude.size(); ++j) {
                if (i != j && trained.band.matrix(static_cast<Eigen::Index>(i),
                                                  static_cast<Eigen::Index>(j)) != 0.0) {
                    acc += m2.magnitude[i][j];
                    ++count;
                }
            }
        }
        return count ? acc / static_cast<double>(count) : 0.0;
    };

    MetricsReport report;
    report.config_hash = c.hash;
    report.seed = c.seed;
    report.add("blocks", static_cast<double>(blocks), "count");
    report.add("k_c", static_cast<double>(trained.k_c), "subcarriers");
    report.add("feature_corr_d1", feat_corr.size() > 1 ? feat_corr[1] : 0.0, "");
    report.add("band_mean_corr_unprecoded", band_mean(cm_plain), "");
    report.add("band_mean_corr_precoded", band_mean(cm_prec), "");
    report.add("band_mean_corr_received", band_mean(cm_rx), "");
    out.write("summary.txt", report.to_text());
    return report;
}

inline MetricsReport run_precode_experiment(const ExperimentConfig& c, ArtifactWriter& out) {
    TrainedPrecoder trained = train_precoder(c, c.precoder_weight);
    const rvec pilot_p = pilot_time_power(c.ofdm);
    const auto n = static_cast<Eigen::Index>(c.ofdm.n_data());
    const double identity_obj = precoding_objective(MatrixXcd::Identity(n, n),
                                                    trained.covariance, trained.band, c.ofdm,
                                                    1.0, pilot_p, trained.omega);

    save_precoder(trained.matrix, out.path_for("precoder.jpc").string());
    out.note(out.path_for("precoder.jpc"));

    std::string sweeps = csv_stamp(c) + "init,sweep,objective\n";
    for (std::size_t i = 0; i < trained.matrix.sweep_objectives.size(); ++i) {
        for (std::size_t s = 0; s < trained.matrix.sweep_objectives[i].size(); ++s) {
            sweeps += fmt(static_cast<double>(i)) + "," + fmt(static_cast<double>(s)) + "," +
                      fmt(trained.matrix.sweep_objectives[i][s]) + "\n";
        }
    }
    out.write("precode_sweeps.csv", sweeps);

    MetricsReport report;
    report.config_hash = c.hash;
    report.seed = c.seed;
    report.add("k_d", static_cast<double>(c.ofdm.n_data()), "subcarriers");
    report.add("k_c", static_cast<double>(trained.k_c), "subcarriers");
    report.add("omega", trained.omega, "");
    report.add("n_init", static_cast<double>(c.precoder_inits), "count");
    report.add("objective", trained.matrix.objective_value, "");
    report.add("objective_identity", identity_obj, "");
    report.add("objective_ratio", trained.matrix.objective_value / identity_obj, "");
    report.add("unitarity_error", unitarity_error(trained.matrix.v), "frobenius");
    out.write("summary.txt", report.to_text());
    return report;
}

inline MetricsReport run_e2e_experiment(const ExperimentConfig& c, ArtifactWriter& out) {
    TrainedPrecoder trained = train_precoder(c, c.precoder_weight);

    std::string mse_csv = csv_stamp(c) +
                          "snr_db,variant,symbol_mse,feature_mse,feature_psnr_db,floored\n";
    std::string pos_csv = csv_stamp(c) + "snr_db,variant,position,physical_bin,mse\n";

    MetricsReport report;
    report.config_hash = c.hash;
    report.seed = c.seed;
    bool dumped = false;

    for (double snr : c.e2e_snr_sweep_db) {
        for (int variant = 0; variant < 2; ++variant) {
            const bool precoded = variant == 1;
            double sym_sq = 0.0, feat_acc = 0.0;
            std::size_t symbols = 0, floored = 0;
            rvec pos_sq(c.ofdm.n_data(), 0.0);
            for (std::size_t frame = 0; frame < c.e2e_frames; ++frame) {
                FeatureBlock features = experiment_features(c, 500 + frame);
                FeatureBlock tx_features = features;
                if (c.e2e_retained_channels) {
                    tx_features = drop_channels(
                        features, std::min(*c.e2e_retained_channels, features.channels));
                }
                // paired comparison: both variants see the same channel draw
                std::uint64_t snr_bits = 0;
                std::memcpy(&snr_bits, &snr, sizeof(snr_bits));
                const std::uint64_t frame_seed =
                    derive_seed(derive_seed(c.seed, 600000 + frame), snr_bits);
                ChainResult r = run_chain(tx_features, c, precoded ? &trained.matrix : nullptr,
                                          snr, frame_seed);
                FeatureBlock recovered = c.e2e_retained_channels
                                             ? zero_fill(r.recovered, features.channels)
                                             : r.recovered;
                feat_acc += feature_mse(features, recovered);
                sym_sq += r.symbol_sq_error;
                symbols += r.symbol_count;
                floored += r.floored_bins;
                for (std::size_t k = 0; k < pos_sq.size(); ++k)
                    pos_sq[k] += r.per_position_sq_error[k];
                if (c.e2e_dump_frame && !dumped) {
                    write_frame_iq(r.tx_frame, c.hash, out.path_for("frame0.iq").string());
                    out.note(out.path_for("frame0.iq"));
                    out.note(out.path_for("frame0.iq.meta"));
                    dumped = true;
                }
            }
            const double denom = static_cast<double>(symbols) *
                                 static_cast<double>(c.ofdm.n_data());
            const double symbol_mse = sym_sq / denom;
            const double fm = feat_acc / static_cast<double>(c.e2e_frames);
            const double psnr = fm > 0.0 ? 10.0 * std::log10(4.0 / fm) : 100.0;
            const char* name = precoded ? "precoded" : "unprecoded";
            mse_csv += fmt(snr) + "," + name + "," + fmt(symbol_mse) + "," + fmt(fm) + "," +
                       fmt(psnr) + "," + fmt(static_cast<double>(floored)) + "\n";
            for (std::size_t k = 0; k < pos_sq.size(); ++k) {
                pos_csv += fmt(snr) + "," + name + "," + fmt(static_cast<double>(k)) + "," +
                           fmt(static_cast<double>(c.ofdm.data_indices[k])) + "," +
                           fmt(pos_sq[k] / static_cast<double>(symbols)) + "\n";
            }
            char key[96];
            std::snprintf(key, sizeof(key), "feature_mse_%s_snr_%g", name, snr);
            report.add(key, fm, "");
            std::snprintf(key, sizeof(key), "symbol_mse_%s_snr_%g", name, snr);
            report.add(key, symbol_mse, "");
        }
    }
    out.write("e2e_mse.csv", mse_csv);
    out.write("per_subcarrier_mse.csv", pos_csv);
    report.add("k_c", static_cast<double>(trained.k_c), "subcarriers");
    report.add("omega", trained.omega, "");
    out.write("summary.txt", report.to_text());
    return report;
}

inline MetricsReport run_schedule_experiment(const ExperimentConfig& c, ArtifactWriter& out) {
    rvec bandwidths = c.schedule_bandwidth_sweep_hz;
    if (bandwidths.empty()) bandwidths.push_back(c.ofdm.bandwidth_hz);
    const FeatureSpec& f = c.feature_spec;

    std::string csv = csv_stamp(c) + "bandwidth_hz,t_max_ms,t_p_ms,n_max,c_t\n";
    for (double bw : bandwidths) {
        OfdmConfig ofdm = c.ofdm;
        ofdm.bandwidth_hz = bw;
        for (double t_ms : c.schedule_t_max_sweep_ms) {
            LatencyBudget budget = LatencyBudget::for_config(ofdm, t_ms * 1e-3);
            long long n_max = 0;
            std::size_t c_t = 0;
            if (budget.t_max_s > budget.t_p_s) {
                n_max = max_feature_length(ofdm, budget);
                c_t = retained_channels(ofdm, budget, f.height, f.width, f.channels);
            }
            csv += fmt(bw) + "," + fmt(t_ms) + "," + fmt(budget.t_p_s * 1e3) + "," +
                   fmt(static_cast<double>(n_max)) + "," + fmt(static_cast<double>(c_t)) + "\n";
        }
    }
    out.write("schedule.csv", csv);

    MetricsReport report;
    report.config_hash = c.hash;
    report.seed = c.seed;
    LatencyBudget nominal{c.t_max_s, 0.0};
    report.add("n_max_nominal", static_cast<double>(max_feature_length(c.ofdm, nominal)),
               "elements");
    report.add("c_t_nominal",
               static_cast<double>(retained_channels(c.ofdm, nominal, f.height, f.width,
                                                     f.channels)),
               "channels");
    out.write("summary.txt", report.to_text());
    return report;
}

inline MetricsReport run_stream_experiment(const ExperimentConfig& c, ArtifactWriter& out) {
    PipelineConfig pc;
    pc.frame_rate = c.stream_fps;
    pc.buffer_capacity = c.stream_buffer;
    pc.n_frames = c.stream_frames;
    pc.mode = c.stream_mode;
    pc.encode_time = c.stream_encode_jitter_ms > 0.0
                         ? uniform_time(c.stream_encode_ms * 1e-3,
                                        c.stream_encode_jitter_ms * 1e-3)
                         : fixed_time(c.stream_encode_ms * 1e-3);
    pc.transmit_time = c.stream_transmit_jitter_ms > 0.0
                           ? uniform_time(c.stream_transmit_ms * 1e-3,
                                          c.stream_transmit_jitter_ms * 1e-3)
                           : fixed_time(c.stream_transmit_ms * 1e-3);

    PipelineStages stages;
    if (c.stream_phy) {
        stages.encode = [&c](std::size_t frame) {
            return experiment_features(c, 700 + frame);
        };
        auto frame_counter = std::make_shared<std::size_t>(0);
        stages.channel = [&c, frame_counter](const FeatureBlock& tx) {
            const std::size_t frame = (*frame_counter)++;
            ChainResult r = run_chain(tx, c, nullptr, c.profile.snr_db,
                                      derive_seed(c.seed, 800000 + frame));
            return r.recovered;
        };
        stages.quality = [](const FeatureBlock& tx, const FeatureBlock& rx) {
            // feature-domain PSNR over the [-1, 1] range
            rvec a = tx.data, b = rx.data;
            return psnr_db(a, b, 2.0).db;
        };
    }

    PipelineReport report = run_pipeline(pc, stages, derive_seed(c.seed, 900));
    out.write("stream_frames.csv", csv_stamp(c) + report.to_csv());

    MetricsReport metrics;
    metrics.config_hash = c.hash;
    metrics.seed = c.seed;
    if (!report.frames.empty()) {
        PipelineSummary s = summarize_report(report, 1.0 / c.stream_fps);
        metrics.add("frames", static_cast<double>(report.frames.size()), "count");
        metrics.add("max_gap", s.max_gap_s * 1e3, "ms");
        metrics.add("mean_gap", s.mean_gap_s * 1e3, "ms");
        metrics.add("p95_gap", s.p95_gap_s * 1e3, "ms");
        metrics.add("fraction_within_interval", s.fraction_within, "");
        metrics.add("peak_buffer_occupancy", static_cast<double>(s.peak_occupancy), "frames");
    }
    out.write("summary.txt", metrics.to_text());
    return metrics;
}

} // namespace detail

/**
 * Run one experiment kind with the given config into out_dir. Artifacts are
 * removed again if the run throws.
 */
inline MetricsReport run_experiment(const std::string& kind, const nlohmann::json& config,
                                    const std::string& out_dir,
                                    std::optional<std::uint64_t> seed_override = {}) {
    const ExperimentConfig c = parse_experiment(config, seed_override);
    detail::ArtifactWriter out(out_dir);
    try {
        if (kind == "papr") return detail::run_papr_experiment(c, out);
        if (kind == "correlation") return detail::run_correlation_experiment(c, out);
        if (kind == "precode") return detail::run_precode_experiment(c, out);
        if (kind == "e2e") return detail::run_e2e_experiment(c, out);
        if (kind == "schedule") return detail::run_schedule_experiment(c, out);
        if (kind == "stream") return detail::run_stream_experiment(c, out);
        throw std::invalid_argument("unknown experiment kind: " + kind);
    } catch (...) {
        out.discard_all();
        throw;
    }
}

} // namespace jscc
