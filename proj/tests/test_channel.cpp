#include <catch2/catch.hpp>

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

} // namespace

TEST_CASE("single-tap realizations are flat in frequency") {
    OfdmConfig c = OfdmConfig::wlan64();
    ChannelProfile profile{1, 0.0, 10.0};
    ChannelRealization r = sample_taps(profile, c, 5);
    for (std::size_t k = 1; k < c.subcarriers; ++k) {
        REQUIRE(std::abs(r.freq_response[k]) == Approx(std::abs(r.freq_response[0])).epsilon(1e-12));
    }
}

TEST_CASE("sample_taps is deterministic per seed") {
    OfdmConfig c = OfdmConfig::wlan64();
    ChannelProfile profile{4, 0.7, 10.0};
    ChannelRealization a = sample_taps(profile, c, 42);
    ChannelRealization b = sample_taps(profile, c, 42);
    REQUIRE(a.taps == b.taps);
    ChannelRealization d = sample_taps(profile, c, 43);
    REQUIRE(a.taps != d.taps);
}

TEST_CASE("average channel power is normalized to one") {
    OfdmConfig c = OfdmConfig::wlan64();
    ChannelProfile profile{6, 0.5, 10.0};
    double acc = 0.0;
    const std::size_t trials = 10000;
    for (std::size_t t = 0; t < trials; ++t) {
        ChannelRealization r = sample_taps(profile, c, t);
        acc += std::norm(r.freq_response[7]);
    }
    REQUIRE(acc / static_cast<double>(trials) == Approx(1.0).margin(0.03));
}

TEST_CASE("a single unit tap with infinite SNR is the identity channel") {
    OfdmConfig c = OfdmConfig::wlan64();
    ChannelProfile profile{1, 0.0, std::numeric_limits<double>::infinity()};
    ChannelRealization r = ChannelRealization::from_taps({cplx{1.0, 0.0}}, c.subcarriers);
    OfdmFrame f = modulate_frame(random_segments(c, 2, 3), c);
    cvec rx = apply_channel(f.time_samples, r, profile, c, 0);
    REQUIRE(rx == f.time_samples);
}

TEST_CASE("delay spread beyond the CP is rejected") {
    OfdmConfig c = OfdmConfig::wlan64();
    ChannelProfile profile{17, 0.1, 10.0};
    ChannelRealization r = sample_taps(profile, c, 1);
    OfdmFrame f = modulate_frame(random_segments(c, 1, 3), c);
    REQUIRE_THROWS_AS(apply_channel(f.time_samples, r, profile, c, 0), DelaySpreadError);
}

TEST_CASE("per-subcarrier noise variance matches the SNR definition") {
    OfdmConfig c = OfdmConfig::wlan64();
    ChannelProfile profile{1, 0.0, 10.0};
    REQUIRE(profile.noise_variance() == Approx(0.1));
    ChannelRealization identity = ChannelRealization::from_taps({cplx{1.0, 0.0}}, c.subcarriers);

    // noise-only frames: demodulated variance per data subcarrier = sigma^2
    SymbolSegment zero;
    zero.symbols.assign(c.n_data(), cplx{0.0, 0.0});
    OfdmConfig no_pilot = c;
    no_pilot.pilot_indices.clear();
    no_pilot.pilot_values.clear();
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < 200; ++t) {
        OfdmFrame f = modulate_frame({zero, zero, zero, zero}, no_pilot);
        cvec rx = apply_channel(f.time_samples, identity, profile, no_pilot, 7000 + t);
        DemodulatedFrame d = demodulate_frame(rx, no_pilot);
        for (const cvec& sym : d.data_symbols) {
            for (const cplx& v : sym) {
                acc += std::norm(v);
                ++count;
            }
        }
    }
    REQUIRE(acc / static_cast<double>(count) == Approx(0.1).epsilon(0.05));
}

TEST_CASE("time-domain convolution equals per-subcarrier multiplication") {
    OfdmConfig c = OfdmConfig::wlan64();
    ChannelProfile profile{8, 0.4, std::numeric_limits<double>::infinity()};
    ChannelRealization r = sample_taps(profile, c, 11);
    auto segments = random_segments(c, 3, 17);
    OfdmFrame f = modulate_frame(segments, c);
    cvec rx = apply_channel(f.time_samples, r, profile, c, 0);
    DemodulatedFrame d = demodulate_frame(rx, c);
    for (std::size_t s = 0; s < segments.size(); ++s) {
        for (std::size_t k = 0; k < c.n_data(); ++k) {
            const cplx want = r.freq_response[c.data_indices[k]] * segments[s].symbols[k];
            REQUIRE(std::abs(d.data_symbols[s][k] - want) < 1e-9);
        }
    }

    // the circular path agrees with the linear path after demodulation
    cvec rx_circ = apply_channel_circular(f.time_samples, r, profile, c, 0);
    DemodulatedFrame dc = demodulate_frame(rx_circ, c);
    for (std::size_t s = 0; s < segments.size(); ++s) {
        for (std::size_t k = 0; k < c.n_data(); ++k) {
            REQUIRE(std::abs(dc.data_symbols[s][k] - d.data_symbols[s][k]) < 1e-9);
        }
    }
}

TEST_CASE("injected noise is white across subcarriers") {
    OfdmConfig c = OfdmConfig::wlan64();
    ChannelProfile profile{1, 0.0, 10.0};
    ChannelRealization identity = ChannelRealization::from_taps({cplx{1.0, 0.0}}, c.subcarriers);
    SymbolSegment zero;
    zero.symbols.assign(c.n_data(), cplx{0.0, 0.0});

    // gather 50k noise-only payload symbols
    const std::size_t frames = 500, per_frame = 100;
    std::vector<cvec> rows;
    rows.reserve(frames * per_frame);
    std::vector<SymbolSegment> zeros(per_frame, zero);
    for (std::size_t t = 0; t < frames; ++t) {
        OfdmFrame f = modulate_frame(zeros, c);
        cvec rx = apply_channel(f.time_samples, identity, profile, c, 40000 + t);
        DemodulatedFrame d = demodulate_frame(rx, c);
        for (auto& sym : d.data_symbols) rows.push_back(std::move(sym));
    }
    auto corr = [&](std::size_t k1, std::size_t k2) {
        cplx num{0.0, 0.0};
        double p1 = 0.0, p2 = 0.0;
        for (const cvec& row : rows) {
            num += row[k1] * std::conj(row[k2]);
            p1 += std::norm(row[k1]);
            p2 += std::norm(row[k2]);
        }
        return std::abs(num) / std::sqrt(p1 * p2);
    };
    for (auto [a, b] : {std::pair<std::size_t, std::size_t>{0, 1}, {5, 6}, {10, 40}, {20, 47}}) {
        REQUIRE(corr(a, b) < 0.02);
    }
}

TEST_CASE("coherence subcarrier count") {
    OfdmConfig c = OfdmConfig::wlan64();

    SECTION("single tap is fully coherent") {
        REQUIRE(coherence_subcarriers(ChannelProfile{1, 0.0, 10.0}, c) == 64);
    }
    SECTION("two equal taps at 10 MHz give K_c = 26") {
        REQUIRE(coherence_subcarriers(ChannelProfile{2, 0.0, 10.0}, c) == 26);
    }
    SECTION("K_c shrinks as the delay spread grows") {
        std::size_t prev = 65;
        for (std::size_t taps : {1u, 2u, 4u, 8u, 16u}) {
            const std::size_t k_c = coherence_subcarriers(ChannelProfile{taps, 0.0, 10.0}, c);
            REQUIRE(k_c <= prev);
            prev = k_c;
        }
    }
}

TEST_CASE("deep fade response") {
    OfdmConfig c = OfdmConfig::wlan64();

    SECTION("zero depth is flat") {
        ChannelRealization r = deep_fade_channel(c, 30, 4, 0.0);
        for (const cplx& h : r.freq_response) REQUIRE(std::abs(h - cplx{1.0, 0.0}) < 1e-12);
    }
    SECTION("20 dB notch of width 4") {
        ChannelRealization r = deep_fade_channel(c, 30, 4, 20.0);
        std::size_t attenuated = 0;
        for (std::size_t k = 0; k < c.subcarriers; ++k) {
            const double mag = std::abs(r.freq_response[k]);
            if (k >= 28 && k < 32) {
                REQUIRE(mag == Approx(0.1).margin(1e-12));
                ++attenuated;
            } else {
                REQUIRE(mag == Approx(1.0).margin(1e-12));
            }
        }
        REQUIRE(attenuated == 4);
    }
    SECTION("taps reproduce the response") {
        ChannelRealization r = deep_fade_channel(c, 30, 4, 20.0);
        ChannelRealization again = ChannelRealization::from_taps(r.taps, c.subcarriers);
        for (std::size_t k = 0; k < c.subcarriers; ++k) {
            REQUIRE(std::abs(again.freq_response[k] - r.freq_response[k]) < 1e-9);
        }
    }
    SECTION("notch center must be in band") {
        REQUIRE_THROWS_AS(deep_fade_channel(c, 64, 4, 10.0), std::invalid_argument);
    }
}

TEST_CASE("post-equalization error concentrates on the notch without precoding") {
    OfdmConfig c = OfdmConfig::wlan64();
    ChannelRealization notch = deep_fade_channel(c, 10, 4, 20.0);
    ChannelProfile profile{1, 0.0, 15.0};
    ChannelEstimate truth;
    truth.h_hat = notch.freq_response;

    rvec err(c.n_data(), 0.0);
    const std::size_t frames = 100;
    for (std::size_t t = 0; t < frames; ++t) {
        auto segments = random_segments(c, 4, 300 + t);
        OfdmFrame f = modulate_frame(segments, c);
        cvec rx = apply_channel_circular(f.time_samples, notch, profile, c, 900 + t);
        DemodulatedFrame d = demodulate_frame(rx, c);
        for (std::size_t s = 0; s < d.data_symbols.size(); ++s) {
            EqualizeResult eq = equalize(d.data_symbols[s], truth, c);
            for (std::size_t r = 0; r < c.n_data(); ++r)
                err[r] += std::norm(eq.symbols[r] - segments[s].symbols[r]);
        }
    }
    // the notch occupies physical bins 8..11, all of which carry data
    double notch_min = 1e300, clean_max = 0.0;
    for (std::size_t r = 0; r < c.n_data(); ++r) {
        const std::size_t bin = c.data_indices[r];
        if (bin >= 8 && bin < 12) {
            notch_min = std::min(notch_min, err[r]);
        } else {
            clean_max = std::max(clean_max, err[r]);
        }
    }
    REQUIRE(notch_min > 10.0 * clean_max);
}
