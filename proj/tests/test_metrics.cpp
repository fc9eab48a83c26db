#include <catch2/catch.hpp>

#include <random>

#include "jscc/metrics.hpp"

using namespace jscc;

TEST_CASE("papr of a constant envelope is 0 dB") {
    cvec x(100);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::polar(2.0, 0.1 * i);
    REQUIRE(papr_db(x) == Approx(0.0).margin(1e-12));
}

TEST_CASE("papr of a single impulse among zeros is 10 log10(N)") {
    for (std::size_t n : {16u, 64u, 1000u}) {
        cvec x(n, cplx{0.0, 0.0});
        x[n / 2] = cplx{3.0, -1.0};
        REQUIRE(papr_db(x) == Approx(10.0 * std::log10(static_cast<double>(n))).margin(1e-12));
    }
}

TEST_CASE("papr is scale invariant and rejects zero signals") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    cvec x(256);
    for (auto& v : x) v = cplx{g(rng), g(rng)};
    const double base = papr_db(x);
    cvec scaled = x;
    for (auto& v : scaled) v *= cplx{0.0, -7.5};
    REQUIRE(papr_db(scaled) == Approx(base).margin(1e-12));
    REQUIRE_THROWS_AS(papr_db(cvec(8, cplx{0, 0})), UndefinedMetricError);
    REQUIRE_THROWS_AS(papr_db(cvec{}), UndefinedMetricError);
}

TEST_CASE("empirical cdf") {
    auto single = empirical_cdf({1.0});
    REQUIRE(single.size() == 1);
    REQUIRE(single[0].first == 1.0);
    REQUIRE(single[0].second == 1.0);

    auto cdf = empirical_cdf({4.0, 2.0, 3.0, 1.0});
    REQUIRE(cdf[1].first == 2.0);
    REQUIRE(cdf[1].second == 0.5);
    for (std::size_t i = 1; i < cdf.size(); ++i) {
        REQUIRE(cdf[i].first >= cdf[i - 1].first);
        REQUIRE(cdf[i].second > cdf[i - 1].second);
    }
}

TEST_CASE("percentile picks order statistics") {
    rvec v = {5.0, 1.0, 3.0, 2.0, 4.0};
    REQUIRE(percentile(v, 0.99) == 5.0);
    REQUIRE(percentile(v, 0.5) == 3.0);
    REQUIRE(percentile(v, 1.0) == 5.0);
    REQUIRE_THROWS_AS(percentile(rvec{}, 0.5), std::invalid_argument);
}

TEST_CASE("cross-subcarrier correlation of independent symbols is small") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g(0.0, std::sqrt(0.5));
    std::vector<cvec> blocks(10000, cvec(6));
    for (auto& b : blocks)
        for (auto& v : b) v = cplx{g(rng), g(rng)};
    CorrelationMatrix m = cross_subcarrier_correlation(blocks);
    REQUIRE(m.flagged.empty());
    for (std::size_t i = 0; i < 6; ++i) {
        REQUIRE(m.magnitude[i][i] == 1.0);
        for (std::size_t j = 0; j < 6; ++j) {
            REQUIRE(m.magnitude[i][j] == m.magnitude[j][i]);
            if (i != j) REQUIRE(m.magnitude[i][j] < 0.05);
        }
    }
}

TEST_CASE("duplicated subcarrier data correlates at 1") {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> g;
    std::vector<cvec> blocks(500, cvec(3));
    for (auto& b : blocks) {
        const cplx v{g(rng), g(rng)};
        b[0] = v;
        b[1] = v * cplx{0.0, 2.0};  // scaled/rotated copy still correlates fully
        b[2] = cplx{g(rng), g(rng)};
    }
    CorrelationMatrix m = cross_subcarrier_correlation(blocks);
    REQUIRE(m.magnitude[0][1] == Approx(1.0).margin(1e-12));
}

TEST_CASE("zero-variance subcarriers are flagged") {
    std::vector<cvec> blocks(100, cvec(3, cplx{0.0, 0.0}));
    std::mt19937_64 rng(29);
    std::normal_distribution<double> g;
    for (auto& b : blocks) b[0] = cplx{g(rng), g(rng)};
    CorrelationMatrix m = cross_subcarrier_correlation(blocks);
    REQUIRE(m.flagged == std::vector<std::size_t>{1, 2});
    REQUIRE(m.magnitude[0][1] == 0.0);
    REQUIRE(m.magnitude[1][1] == 1.0);
}

TEST_CASE("per-subcarrier MSE") {
    std::vector<cvec> tx(1000, cvec(4));
    std::mt19937_64 rng(31);
    std::normal_distribution<double> g(0.0, std::sqrt(0.5));
    for (auto& b : tx)
        for (auto& v : b) v = cplx{g(rng), g(rng)};

    SECTION("identical blocks give zero") {
        rvec mse = per_subcarrier_mse(tx, tx);
        for (double v : mse) REQUIRE(v == 0.0);
    }

    SECTION("unit-variance noise gives MSE near one everywhere") {
        std::vector<cvec> rx = tx;
        std::normal_distribution<double> n(0.0, std::sqrt(0.5));
        double total = 0.0;
        for (auto& b : rx)
            for (auto& v : b) v += cplx{n(rng), n(rng)};
        rvec mse = per_subcarrier_mse(tx, rx);
        for (double v : mse) {
            REQUIRE(v == Approx(1.0).epsilon(0.15));
            total += v;
        }
        // positions sum to K_d times the total symbol MSE
        double sym_mse = 0.0;
        for (std::size_t b = 0; b < tx.size(); ++b)
            for (std::size_t k = 0; k < 4; ++k) sym_mse += std::norm(tx[b][k] - rx[b][k]);
        sym_mse /= static_cast<double>(tx.size() * 4);
        REQUIRE(total == Approx(4.0 * sym_mse).margin(1e-10));
    }

    SECTION("shape mismatch is rejected") {
        std::vector<cvec> rx(tx.begin(), tx.begin() + 10);
        REQUIRE_THROWS_AS(per_subcarrier_mse(tx, rx), std::invalid_argument);
    }
}

TEST_CASE("psnr basics") {
    rvec a = {0.1, 0.5, -0.3, 0.9};

    SECTION("identical tensors saturate at 100 dB") {
        MetricValue v = psnr_db(a, a, 1.0);
        REQUIRE(v.db == 100.0);
        REQUIRE(v.saturated);
    }
    SECTION("MSE equal to max^2 gives 0 dB") {
        rvec b = a;
        for (double& x : b) x += 2.0;
        MetricValue v = psnr_db(a, b, 2.0);
        REQUIRE(v.db == Approx(0.0).margin(1e-12));
        REQUIRE_FALSE(v.saturated);
    }
    SECTION("symmetric and strictly decreasing in MSE") {
        rvec b = {0.2, 0.4, -0.2, 0.8};
        REQUIRE(psnr_db(a, b, 1.0).db == psnr_db(b, a, 1.0).db);
        rvec c = {0.4, 0.2, 0.1, 0.5};
        REQUIRE(psnr_db(a, b, 1.0).db > psnr_db(a, c, 1.0).db);
    }
    SECTION("shape mismatch is rejected") {
        REQUIRE_THROWS_AS(psnr_db(a, rvec{1.0}, 1.0), std::invalid_argument);
    }
}

TEST_CASE("msssim dB conversion") {
    MetricValue v = msssim_to_db(0.9);
    REQUIRE(v.db == 10.0);  // -10 log10(0.1) exactly
    REQUIRE_FALSE(v.saturated);
    REQUIRE(msssim_to_db(1.0).saturated);
    REQUIRE(msssim_to_db(1.0).db == 100.0);
}

namespace {

rvec test_image(std::size_t h, std::size_t w) {
    rvec img(h * w);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            img[y * w + x] = 0.5 + 0.25 * std::sin(0.11 * x) * std::cos(0.07 * y) +
                             0.2 * std::sin(0.31 * (x + 2.0 * y));
        }
    }
    return img;
}

} // namespace

TEST_CASE("ms_ssim equals one for identical images and decreases with noise") {
    const std::size_t h = 192, w = 192;
    rvec img = test_image(h, w);
    REQUIRE(ms_ssim(img, img, h, w) == Approx(1.0).margin(1e-9));
    REQUIRE(ms_ssim_db(img, img, h, w).saturated);

    std::mt19937_64 rng(37);
    double prev = 1.0;
    for (double noise : {0.02, 0.08, 0.25}) {
        std::normal_distribution<double> g(0.0, noise);
        rvec degraded = img;
        for (double& v : degraded) v += g(rng);
        const double score = ms_ssim(img, degraded, h, w);
        REQUIRE(score < prev);
        REQUIRE(score > 0.0);
        prev = score;
    }
}

TEST_CASE("ms_ssim rejects images too small for five scales") {
    rvec small(128 * 128, 0.5);
    REQUIRE_THROWS_AS(ms_ssim(small, small, 128, 128), std::invalid_argument);
}

TEST_CASE("weighted loss") {
    REQUIRE(weighted_loss(2.0, 4.0, 1.0) == 2.0);
    REQUIRE(weighted_loss(2.0, 4.0, 0.0) == 4.0);
    REQUIRE(weighted_loss(2.0, 4.0, 0.5) == 3.0);
    REQUIRE_THROWS_AS(weighted_loss(1.0, 1.0, 1.5), std::invalid_argument);
    REQUIRE_THROWS_AS(weighted_loss(1.0, 1.0, -0.1), std::invalid_argument);
}

TEST_CASE("metrics report serialization") {
    MetricsReport r;
    r.config_hash = 0xabcdef;
    r.seed = 42;
    r.add("feature_mse", 0.001953125, "");
    r.add("papr_p99", 8.25, "dB");
    const std::string text = r.to_text();
    REQUIRE(text.find("config_hash 0000000000abcdef\n") != std::string::npos);
    REQUIRE(text.find("seed 42\n") != std::string::npos);
    REQUIRE(text.find("feature_mse 0.001953125\n") != std::string::npos);
    REQUIRE(text.find("papr_p99 8.25 dB\n") != std::string::npos);
    const std::string csv = r.to_csv();
    REQUIRE(csv.find("name,value,unit\n") == 0);
    REQUIRE(csv.find("papr_p99,8.25,dB\n") != std::string::npos);
}
