#include <catch2/catch.hpp>

#include <cstdio>
#include <random>

#include "jscc/channel.hpp"
#include "jscc/modem.hpp"

using namespace jscc;

namespace {

std::vector<SymbolSegment> random_segments(const OfdmConfig& c, std::size_t count,
                                           std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, std::sqrt(0.5));
    std::vector<SymbolSegment> out(count);
    for (auto& seg : out) {
        seg.symbols.resize(c.n_data());
        for (auto& v : seg.symbols) v = cplx{g(rng), g(rng)};
    }
    return out;
}

struct TempFile {
    std::string path;
    explicit TempFile(std::string p) : path(std::move(p)) {}
    ~TempFile() {
        std::remove(path.c_str());
        std::remove((path + ".meta").c_str());
    }
};

} // namespace

TEST_CASE("frame length is (preamble + payload) symbols exactly") {
    OfdmConfig c = OfdmConfig::wlan64();
    OfdmFrame f = modulate_frame(random_segments(c, 5, 1), c);
    REQUIRE(f.time_samples.size() == (2 + 5) * 80);
    REQUIRE(f.n_payload_symbols == 5);
    REQUIRE(f.preamble_repeats == 2);
}

TEST_CASE("all-zero segment modulates to the pilot-only waveform") {
    OfdmConfig c = OfdmConfig::wlan64();
    SymbolSegment zero;
    zero.symbols.assign(c.n_data(), cplx{0.0, 0.0});
    OfdmFrame f = modulate_frame({zero}, c);
    const cvec pilots = pilot_waveform(c);
    const std::size_t base = 2 * c.symbol_samples() + c.cp_length;
    for (std::size_t n = 0; n < c.subcarriers; ++n) {
        REQUIRE(std::abs(f.time_samples[base + n] - pilots[n]) < 1e-12);
    }
}

TEST_CASE("CP insertion adds exactly the energy of the copied samples") {
    OfdmConfig c = OfdmConfig::wlan64();
    OfdmFrame f = modulate_frame(random_segments(c, 1, 9), c);
    const std::size_t base = 2 * c.symbol_samples();
    cvec with_cp(f.time_samples.begin() + base, f.time_samples.end());
    cvec body(with_cp.begin() + static_cast<std::ptrdiff_t>(c.cp_length), with_cp.end());
    cvec tail(body.end() - static_cast<std::ptrdiff_t>(c.cp_length), body.end());
    REQUIRE(norm_sq(with_cp) == Approx(norm_sq(body) + norm_sq(tail)).epsilon(1e-12));
}

TEST_CASE("demodulate inverts modulate on the ideal channel") {
    OfdmConfig c = OfdmConfig::wlan64();
    auto segments = random_segments(c, 4, 2);
    OfdmFrame f = modulate_frame(segments, c);
    DemodulatedFrame d = demodulate_frame(f.time_samples, c);
    REQUIRE(d.data_symbols.size() == 4);
    for (std::size_t s = 0; s < 4; ++s) {
        for (std::size_t r = 0; r < c.n_data(); ++r) {
            REQUIRE(std::abs(d.data_symbols[s][r] - segments[s].symbols[r]) < 1e-10);
        }
        for (std::size_t p = 0; p < c.n_pilots(); ++p) {
            REQUIRE(std::abs(d.pilot_obs[s][p] - c.pilot_values[p]) < 1e-10);
        }
    }
}

TEST_CASE("demodulate rejects misaligned input") {
    OfdmConfig c = OfdmConfig::wlan64();
    OfdmFrame f = modulate_frame(random_segments(c, 2, 3), c);
    cvec truncated(f.time_samples.begin(), f.time_samples.end() - 1);
    REQUIRE_THROWS_AS(demodulate_frame(truncated, c), FrameError);
    cvec preamble_only(f.time_samples.begin(), f.time_samples.begin() + 80);
    REQUIRE_THROWS_AS(demodulate_frame(preamble_only, c), FrameError);
}

TEST_CASE("pa_soft_clip limits magnitude and preserves phase") {
    cvec x = {cplx{0.5, 0.0}, cplx{0.0, 2.0}, std::polar(3.0, 0.7)};

    SECTION("below the clip level it is the identity") {
        cvec y = pa_soft_clip(x, 10.0);
        REQUIRE(y == x);
    }
    SECTION("peaks are scaled onto the clip circle") {
        cvec y = pa_soft_clip(x, 1.0);
        REQUIRE(y[0] == x[0]);
        REQUIRE(std::abs(y[1] - cplx{0.0, 1.0}) < 1e-12);
        REQUIRE(std::abs(y[2] - std::polar(1.0, 0.7)) < 1e-12);
        for (std::size_t i = 0; i < x.size(); ++i) {
            REQUIRE(std::abs(y[i]) <= std::abs(x[i]) + 1e-15);
        }
    }
    SECTION("peak power is min(peak, A^2)") {
        cvec y = pa_soft_clip(x, 1.5);
        double peak = 0.0;
        for (const cplx& v : y) peak = std::max(peak, std::norm(v));
        REQUIRE(peak == Approx(1.5 * 1.5).margin(1e-12));
    }
    SECTION("nonpositive clip level is rejected") {
        REQUIRE_THROWS_AS(pa_soft_clip(x, 0.0), std::invalid_argument);
    }
}

TEST_CASE("LS estimate is exact on flat and two-tap noiseless channels") {
    OfdmConfig c = OfdmConfig::wlan64();
    OfdmFrame f = modulate_frame(random_segments(c, 1, 4), c);

    SECTION("flat unit channel") {
        ChannelEstimate est = estimate_channel_ls(preamble_samples(f.time_samples, c), c);
        for (std::size_t k = 0; k < c.subcarriers; ++k) {
            REQUIRE(std::abs(est.h_hat[k] - cplx{1.0, 0.0}) < 1e-12);
        }
    }

    SECTION("two-tap channel matches the analytic response") {
        ChannelProfile profile{2, 0.0, std::numeric_limits<double>::infinity()};
        ChannelRealization r =
            ChannelRealization::from_taps({cplx{0.8, 0.1}, cplx{0.0, -0.4}}, c.subcarriers);
        cvec rx = apply_channel(f.time_samples, r, profile, c, 0);
        ChannelEstimate est = estimate_channel_ls(preamble_samples(rx, c), c);
        for (std::size_t k = 0; k < c.subcarriers; ++k) {
            REQUIRE(std::abs(est.h_hat[k] - r.freq_response[k]) < 1e-10);
        }
    }
}

TEST_CASE("preamble averaging reduces estimate variance by the repeat count") {
    OfdmConfig one = OfdmConfig::wlan64();
    one.preamble_repeats = 1;
    OfdmConfig four = OfdmConfig::wlan64();
    four.preamble_repeats = 4;
    const double noise_var = 0.01;

    auto estimate_error = [&](const OfdmConfig& c, std::uint64_t seed) {
        OfdmFrame f = modulate_frame({}, c);
        cvec rx = f.time_samples;
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> g(0.0, std::sqrt(noise_var / 2.0));
        for (cplx& v : rx) v += cplx{g(rng), g(rng)};
        ChannelEstimate est = estimate_channel_ls(rx, c);
        double err = 0.0;
        for (std::size_t k = 0; k < c.subcarriers; ++k)
            err += std::norm(est.h_hat[k] - cplx{1.0, 0.0});
        return err / static_cast<double>(c.subcarriers);
    };

    double err1 = 0.0, err4 = 0.0;
    const int trials = 400;
    for (int t = 0; t < trials; ++t) {
        err1 += estimate_error(one, 1000 + t);
        err4 += estimate_error(four, 5000 + t);
    }
    // variance of the averaged estimate drops as 1/repeats
    REQUIRE(err1 / err4 == Approx(4.0).epsilon(0.2));
}

TEST_CASE("common phase error is estimated and removed") {
    OfdmConfig c = OfdmConfig::wlan64();
    auto segments = random_segments(c, 3, 7);
    OfdmFrame f = modulate_frame(segments, c);

    cvec rotated = f.time_samples;
    const cplx rot = std::polar(1.0, 0.3);
    // rotate payload only; the preamble stays clean for estimation
    for (std::size_t i = 2 * c.symbol_samples(); i < rotated.size(); ++i) rotated[i] *= rot;

    ChannelEstimate est = estimate_channel_ls(preamble_samples(rotated, c), c);
    DemodulatedFrame d = demodulate_frame(rotated, c);
    CpeResult corrected = cpe_correct(d.data_symbols, d.pilot_obs, est, c);
    REQUIRE(corrected.uncorrected == 0);
    for (std::size_t s = 0; s < segments.size(); ++s) {
        REQUIRE(corrected.phases[s] == Approx(0.3).margin(1e-9));
        for (std::size_t r = 0; r < c.n_data(); ++r) {
            REQUIRE(std::abs(corrected.symbols[s][r] - segments[s].symbols[r]) < 1e-9);
        }
    }

    SECTION("ideal frames need no correction") {
        DemodulatedFrame clean = demodulate_frame(f.time_samples, c);
        ChannelEstimate est1 = estimate_channel_ls(preamble_samples(f.time_samples, c), c);
        CpeResult r = cpe_correct(clean.data_symbols, clean.pilot_obs, est1, c);
        for (double phi : r.phases) REQUIRE(phi == Approx(0.0).margin(1e-10));
    }

    SECTION("correction is invariant to pilot amplitude scaling") {
        ChannelEstimate scaled = est;
        for (cplx& h : scaled.h_hat) h *= 5.0;
        CpeResult r = cpe_correct(d.data_symbols, d.pilot_obs, scaled, c);
        for (std::size_t s = 0; s < segments.size(); ++s) {
            REQUIRE(r.phases[s] == Approx(corrected.phases[s]).margin(1e-12));
        }
    }
}

TEST_CASE("equalize divides by the estimate with a magnitude floor") {
    OfdmConfig c = OfdmConfig::wlan64();

    SECTION("perfect CSI and zero noise recover the symbols exactly") {
        auto segments = random_segments(c, 1, 13);
        OfdmFrame f = modulate_frame(segments, c);
        DemodulatedFrame d = demodulate_frame(f.time_samples, c);
        ChannelEstimate flat;
        flat.h_hat.assign(c.subcarriers, cplx{1.0, 0.0});
        EqualizeResult eq = equalize(d.data_symbols[0], flat, c);
        REQUIRE(eq.floored.empty());
        for (std::size_t r = 0; r < c.n_data(); ++r) {
            REQUIRE(std::abs(eq.symbols[r] - segments[0].symbols[r]) < 1e-12);
        }
    }

    SECTION("sub-floor estimates are flagged and floored") {
        ChannelEstimate est;
        est.h_hat.assign(c.subcarriers, cplx{1.0, 0.0});
        est.h_hat[c.data_indices[5]] = cplx{1e-9, 0.0};
        cvec z(c.n_data(), cplx{1.0, 0.0});
        EqualizeResult eq = equalize(z, est, c);
        REQUIRE(eq.floored == std::vector<std::size_t>{5});
        // floored division: 1 / (1e-3 * median 1.0)
        REQUIRE(std::abs(eq.symbols[5]) == Approx(1e3).epsilon(1e-6));
        REQUIRE(std::abs(eq.symbols[0] - cplx{1.0, 0.0}) < 1e-12);
    }
}

TEST_CASE("equalized noise variance follows sigma^2 / |h|^2") {
    OfdmConfig c = OfdmConfig::wlan64();
    ChannelRealization notch = deep_fade_channel(c, 10, 4, 14.0);
    ChannelProfile profile{1, 0.0, 17.0};  // sigma^2 = 0.02
    const double sigma2 = profile.noise_variance();

    ChannelEstimate truth;
    truth.h_hat = notch.freq_response;

    rvec err(c.n_data(), 0.0);
    const std::size_t frames = 400;
    for (std::size_t t = 0; t < frames; ++t) {
        auto segments = random_segments(c, 2, 100 + t);
        OfdmFrame f = modulate_frame(segments, c);
        cvec rx = apply_channel_circular(f.time_samples, notch, profile, c, 999 + t);
        DemodulatedFrame d = demodulate_frame(rx, c);
        for (std::size_t s = 0; s < d.data_symbols.size(); ++s) {
            EqualizeResult eq = equalize(d.data_symbols[s], truth, c);
            for (std::size_t r = 0; r < c.n_data(); ++r) {
                err[r] += std::norm(eq.symbols[r] - segments[s].symbols[r]);
            }
        }
    }
    for (std::size_t r = 0; r < c.n_data(); ++r) {
        err[r] /= static_cast<double>(2 * frames);
        const double h2 = std::norm(notch.freq_response[c.data_indices[r]]);
        REQUIRE(err[r] == Approx(sigma2 / h2).epsilon(0.15));
    }
}

TEST_CASE("frame I/Q file roundtrip with sidecar metadata") {
    OfdmConfig c = OfdmConfig::wlan64();
    auto segments = random_segments(c, 3, 21);
    OfdmFrame f = modulate_frame(segments, c);
    f.meta.pad_count = 17;
    f.meta.c_t = 8;
    f.meta.scales = {1.25, 0.75, 1.0};

    TempFile file("frame_roundtrip.iq");
    write_frame_iq(f, 0xdeadbeefULL, file.path);
    LoadedFrame loaded = read_frame_iq(file.path);
    REQUIRE(loaded.config_hash == 0xdeadbeefULL);
    REQUIRE(loaded.frame.n_payload_symbols == 3);
    REQUIRE(loaded.frame.preamble_repeats == 2);
    REQUIRE(loaded.frame.meta.pad_count == 17);
    REQUIRE(loaded.frame.meta.c_t == 8);
    REQUIRE(loaded.frame.meta.scales == std::vector<double>{1.25, 0.75, 1.0});
    REQUIRE(loaded.frame.time_samples.size() == f.time_samples.size());
    for (std::size_t i = 0; i < f.time_samples.size(); ++i) {
        REQUIRE(std::abs(loaded.frame.time_samples[i] - f.time_samples[i]) < 1e-6);
    }
}

TEST_CASE("loopback chain reproduces the features with ideal channel") {
    OfdmConfig c = OfdmConfig::wlan64();
    FeatureSpec spec{16, 12, 3, 0.9, 0.5};
    FeatureBlock b = generate_features(spec, 4);
    std::vector<SymbolSegment> mapped = map_block(b, c, 1.0);
    OfdmFrame f = modulate_frame(mapped, c);
    ChannelEstimate est = estimate_channel_ls(preamble_samples(f.time_samples, c), c);
    DemodulatedFrame d = demodulate_frame(f.time_samples, c);
    CpeResult corr = cpe_correct(d.data_symbols, d.pilot_obs, est, c);

    std::vector<cvec> rx;
    std::vector<double> scales;
    for (std::size_t s = 0; s < corr.symbols.size(); ++s) {
        rx.push_back(equalize(corr.symbols[s], est, c).symbols);
        scales.push_back(mapped[s].scale);
    }
    FeatureBlock back = unmap_block(rx, scales, mapped.back().pad_count, b.height, b.width,
                                    b.channels);
    double mse = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        const double d2 = back.data[i] - b.data[i];
        mse += d2 * d2;
    }
    mse /= static_cast<double>(b.size());
    REQUIRE(mse < 1e-18);
}
