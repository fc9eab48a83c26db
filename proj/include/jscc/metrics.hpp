#pragma once

/**
 * @file metrics.hpp
 * @brief Quantitative evaluation: PAPR, empirical CDFs, cross-subcarrier
 *        correlation, per-position MSE, PSNR, MS-SSIM (reported in dB), and
 *        the weighted MSE+PAPR loss. MetricsReport serializes results as
 *        key/value/unit text and CSV.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "jscc/errors.hpp"
#include "jscc/signal.hpp"

namespace jscc {

/// 10 log10(peak / mean) instantaneous power ratio of a waveform.
inline double papr_db(const cvec& time_samples) {
    if (time_samples.empty()) throw UndefinedMetricError("papr_db: empty signal");
    double peak = 0.0, mean = 0.0;
    for (const cplx& v : time_samples) {
        const double p = std::norm(v);
        peak = std::max(peak, p);
        mean += p;
    }
    mean /= static_cast<double>(time_samples.size());
    if (mean <= 0.0) throw UndefinedMetricError("papr_db: zero signal");
    return 10.0 * std::log10(peak / mean);
}

/// Standard empirical CDF: probabilities i/n at the sorted values.
inline std::vector<std::pair<double, double>> empirical_cdf(const rvec& values) {
    if (values.empty()) throw std::invalid_argument("empirical_cdf: empty input");
    rvec sorted = values;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::pair<double, double>> cdf(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        cdf[i] = {sorted[i], static_cast<double>(i + 1) / static_cast<double>(sorted.size())};
    }
    return cdf;
}

/// Smallest value whose empirical CDF reaches p (e.g. p = 0.99).
inline double percentile(const rvec& values, double p) {
    if (values.empty()) throw std::invalid_argument("percentile: empty input");
    if (p <= 0.0 || p > 1.0) throw std::invalid_argument("percentile: need 0 < p <= 1");
    rvec sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const auto idx = static_cast<std::size_t>(
        std::ceil(p * static_cast<double>(sorted.size())) - 1.0);
    return sorted[std::min(idx, sorted.size() - 1)];
}

struct CorrelationMatrix {
    std::vector<rvec> magnitude;        ///< |Pearson| per subcarrier pair, unit diagonal
    std::vector<std::size_t> flagged;   ///< zero-variance subcarriers
};

/// Magnitude of the Hermitian Pearson correlation between subcarrier symbol
/// sequences across blocks.
inline CorrelationMatrix cross_subcarrier_correlation(const std::vector<cvec>& blocks) {
    if (blocks.size() < 2)
        throw InsufficientDataError("cross_subcarrier_correlation: need >= 2 blocks");
    const std::size_t n = blocks.front().size();
    for (const cvec& b : blocks)
        if (b.size() != n)
            throw std::invalid_argument("cross_subcarrier_correlation: ragged blocks");
    cvec mean(n, cplx{0.0, 0.0});
    for (const cvec& b : blocks)
        for (std::size_t k = 0; k < n; ++k) mean[k] += b[k];
    for (cplx& m : mean) m /= static_cast<double>(blocks.size());

    std::vector<cvec> cov(n, cvec(n, cplx{0.0, 0.0}));
    for (const cvec& b : blocks) {
        for (std::size_t k1 = 0; k1 < n; ++k1) {
            const cplx d1 = b[k1] - mean[k1];
            for (std::size_t k2 = k1; k2 < n; ++k2) {
                cov[k1][k2] += d1 * std::conj(b[k2] - mean[k2]);
            }
        }
    }
    CorrelationMatrix out;
    out.magnitude.assign(n, rvec(n, 0.0));
    rvec var(n);
    for (std::size_t k = 0; k < n; ++k) {
        var[k] = cov[k][k].real();
        if (var[k] <= 0.0) out.flagged.push_back(k);
    }
    for (std::size_t k1 = 0; k1 < n; ++k1) {
        out.magnitude[k1][k1] = 1.0;
        for (std::size_t k2 = k1 + 1; k2 < n; ++k2) {
            if (var[k1] <= 0.0 || var[k2] <= 0.0) continue;  // flagged pair stays 0
            const double r = std::abs(cov[k1][k2]) / std::sqrt(var[k1] * var[k2]);
            out.magnitude[k1][k2] = r;
            out.magnitude[k2][k1] = r;
        }
    }
    return out;
}

/// Mean |tx - rx|^2 per data-symbol position across blocks.
inline rvec per_subcarrier_mse(const std::vector<cvec>& tx, const std::vector<cvec>& rx) {
    if (tx.size() != rx.size() || tx.empty())
        throw std::invalid_argument("per_subcarrier_mse: block count mismatch");
    const std::size_t n = tx.front().size();
    rvec mse(n, 0.0);
    for (std::size_t b = 0; b < tx.size(); ++b) {
        if (tx[b].size() != n || rx[b].size() != n)
            throw std::invalid_argument("per_subcarrier_mse: block shape mismatch");
        for (std::size_t k = 0; k < n; ++k) mse[k] += std::norm(tx[b][k] - rx[b][k]);
    }
    for (double& v : mse) v /= static_cast<double>(tx.size());
    return mse;
}

/// dB value plus a saturation flag for zero-error inputs.
struct MetricValue {
    double db = 0.0;
    bool saturated = false;
};

inline MetricValue psnr_db(const rvec& a, const rvec& b, double max_value) {
    if (a.size() != b.size() || a.empty())
        throw std::invalid_argument("psnr_db: shape mismatch");
    if (max_value <= 0.0) throw std::invalid_argument("psnr_db: max_value must be positive");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    if (mse == 0.0) return {100.0, true};
    return {10.0 * std::log10(max_value * max_value / mse), false};
}

/// -10 log10(1 - v), saturating at 100 dB for v = 1.
inline MetricValue msssim_to_db(double msssim) {
    if (msssim >= 1.0) return {100.0, true};
    return {-10.0 * std::log10(1.0 - msssim), false};
}

namespace detail {

inline rvec gaussian_kernel_11() {
    rvec k(11);
    const double sigma = 1.5;
    double sum = 0.0;
    for (int i = 0; i < 11; ++i) {
        const double x = i - 5.0;
        k[static_cast<std::size_t>(i)] = std::exp(-x * x / (2.0 * sigma * sigma));
        sum += k[static_cast<std::size_t>(i)];
    }
    for (double& v : k) v /= sum;
    return k;
}

/// Separable valid-mode Gaussian filter; output is (h-10) x (w-10).
inline rvec gauss_filter_valid(const rvec& img, std::size_t h, std::size_t w) {
    static const rvec kernel = gaussian_kernel_11();
    const std::size_t ow = w - 10;
    rvec rows(h * ow, 0.0);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::size_t t = 0; t < 11; ++t) acc += kernel[t] * img[y * w + x + t];
            rows[y * ow + x] = acc;
        }
    }
    const std::size_t oh = h - 10;
    rvec out(oh * ow, 0.0);
    for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::size_t t = 0; t < 11; ++t) acc += kernel[t] * rows[(y + t) * ow + x];
            out[y * ow + x] = acc;
        }
    }
    return out;
}

/// 2x2 average-pool downsampling (floor semantics).
inline rvec downsample2(const rvec& img, std::size_t h, std::size_t w, std::size_t& oh,
                        std::size_t& ow) {
    oh = h / 2;
    ow = w / 2;
    rvec out(oh * ow);
    for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            out[y * ow + x] = 0.25 * (img[(2 * y) * w + 2 * x] + img[(2 * y) * w + 2 * x + 1] +
                                      img[(2 * y + 1) * w + 2 * x] +
                                      img[(2 * y + 1) * w + 2 * x + 1]);
        }
    }
    return out;
}

struct SsimScale {
    double luminance = 0.0;
    double contrast_structure = 0.0;
};

inline SsimScale ssim_scale(const rvec& a, const rvec& b, std::size_t h, std::size_t w,
                            double c1, double c2) {
    const rvec mu_a = gauss_filter_valid(a, h, w);
    const rvec mu_b = gauss_filter_valid(b, h, w);
    rvec aa(a.size()), bb(a.size()), ab(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    const rvec e_aa = gauss_filter_valid(aa, h, w);
    const rvec e_bb = gauss_filter_valid(bb, h, w);
    const rvec e_ab = gauss_filter_valid(ab, h, w);
    double lum = 0.0, cs = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double var_a = std::max(e_aa[i] - mu_a[i] * mu_a[i], 0.0);
        const double var_b = std::max(e_bb[i] - mu_b[i] * mu_b[i], 0.0);
        const double cov = e_ab[i] - mu_a[i] * mu_b[i];
        lum += (2.0 * mu_a[i] * mu_b[i] + c1) / (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1);
        cs += (2.0 * cov + c2) / (var_a + var_b + c2);
    }
    const double count = static_cast<double>(mu_a.size());
    return {lum / count, cs / count};
}

inline constexpr double kMsSsimWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

} // namespace detail

/**
 * 5-scale MS-SSIM with the 11x11 sigma=1.5 Gaussian window and canonical
 * scale weights; scales are linked by 2x2 average-pool downsampling. Both
 * sides must be at least 176 pixels in each dimension so the window fits at
 * the coarsest scale.
 */
inline double ms_ssim(const rvec& a, const rvec& b, std::size_t height, std::size_t width,
                      double max_value = 1.0) {
    if (a.size() != b.size() || a.size() != height * width)
        throw std::invalid_argument("ms_ssim: shape mismatch");
    if (height < 176 || width < 176)
        throw std::invalid_argument("ms_ssim: need >= 176 px per side for 5 scales");
    const double c1 = (0.01 * max_value) * (0.01 * max_value);
    const double c2 = (0.03 * max_value) * (0.03 * max_value);
    rvec cur_a = a, cur_b = b;
    std::size_t h = height, w = width;
    double result = 1.0;
    for (int scale = 0; scale < 5; ++scale) {
        const detail::SsimScale s = detail::ssim_scale(cur_a, cur_b, h, w, c1, c2);
        const double cs = std::max(s.contrast_structure, 0.0);
        result *= std::pow(cs, detail::kMsSsimWeights[scale]);
        if (scale == 4) result *= std::pow(std::max(s.luminance, 0.0),
                                           detail::kMsSsimWeights[scale]);
        if (scale < 4) {
            std::size_t nh = 0, nw = 0;
            cur_a = detail::downsample2(cur_a, h, w, nh, nw);
            cur_b = detail::downsample2(cur_b, h, w, nh, nw);
            h = nh;
            w = nw;
        }
    }
    return std::min(result, 1.0);
}

inline MetricValue ms_ssim_db(const rvec& a, const rvec& b, std::size_t height,
                              std::size_t width, double max_value = 1.0) {
    return msssim_to_db(ms_ssim(a, b, height, width, max_value));
}

/// alpha * mse + (1 - alpha) * papr_linear.
inline double weighted_loss(double mse, double papr_linear, double alpha) {
    if (alpha < 0.0 || alpha > 1.0)
        throw std::invalid_argument("weighted_loss: alpha must be in [0, 1]");
    return alpha * mse + (1.0 - alpha) * papr_linear;
}

/// Named scalar results of one experiment, hash-stamped for reproducibility.
struct MetricsReport {
    struct Entry {
        std::string name;
        double value = 0.0;
        std::string unit;
    };
    std::vector<Entry> entries;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;

    void add(std::string name, double value, std::string unit = "") {
        entries.push_back({std::move(name), value, std::move(unit)});
    }

    std::string to_text() const {
        std::string out;
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(config_hash));
        out += "config_hash " + std::string(buf) + "\n";
        std::snprintf(buf, sizeof(buf), "%llu", static_cast<unsigned long long>(seed));
        out += "seed " + std::string(buf) + "\n";
        for (const Entry& e : entries) {
            std::snprintf(buf, sizeof(buf), "%.12g", e.value);
            out += e.name + " " + buf + (e.unit.empty() ? "" : " " + e.unit) + "\n";
        }
        return out;
    }

    std::string to_csv() const {
        std::string out = "name,value,unit\n";
        char buf[64];
        for (const Entry& e : entries) {
            std::snprintf(buf, sizeof(buf), "%.12g", e.value);
            out += e.name + "," + buf + "," + e.unit + "\n";
        }
        return out;
    }
};

} // namespace jscc
