#pragma once

/**
 * @file precoder.hpp
 * @brief Cross-subcarrier precoding: symbol/channel covariance models, the
 *        correlation + peak-power objective, and the alternating row-wise
 *        optimizer that produces a unitary precoding matrix. Also the binary
 *        persistence format for optimized matrices.
 *
 * The optimizer runs the row-sweep scheme: from each initialization it
 * repeatedly updates rows v_1..v_Kd in order, each row minimizing the
 * smoothed objective subject to orthogonality against the rows already
 * updated in the sweep and ||v|| <= 1 (projected gradient with Armijo
 * backtracking), then renormalizes the row to unit norm. Sweeps stop when
 * the true objective stops improving by more than `tol`; the best candidate
 * across initializations (the identity is always included) is returned.
 */

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "jscc/errors.hpp"
#include "jscc/signal.hpp"

namespace jscc {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::RowVectorXcd;
using Eigen::VectorXcd;

enum class CovarianceKind {
    hermitian,  ///< E{(x-mu)(x-mu)^H}; used throughout the precoder
    pseudo      ///< E{(x-mu)(x-mu)^T}; provided for correlation studies
};

/// Sample covariance of the mapped data symbols across segments.
struct SymbolCovariance {
    MatrixXcd matrix;
    std::size_t sample_count = 0;
    CovarianceKind kind = CovarianceKind::hermitian;
};

/// Banded 0/1 channel correlation model over the data subcarriers: bins
/// within K_c physical indices of each other are fully correlated.
struct ChannelCovariance {
    MatrixXd matrix;
    std::size_t coherence_subcarriers = 0;
};

struct PrecodingMatrix {
    MatrixXcd v;
    double objective_value = 0.0;
    double omega = 0.0;
    std::size_t init_count = 0;
    /// True-objective value after each accepted sweep, per initialization
    /// (index 0 is the identity candidate).
    std::vector<rvec> sweep_objectives;
};

inline double unitarity_error(const MatrixXcd& v) {
    return (v * v.adjoint() - MatrixXcd::Identity(v.rows(), v.cols())).norm();
}

inline SymbolCovariance estimate_symbol_covariance(
    const std::vector<cvec>& segments, CovarianceKind kind = CovarianceKind::hermitian) {
    if (segments.size() < 2)
        throw InsufficientDataError("estimate_symbol_covariance: need at least 2 segments");
    const std::size_t n = segments.front().size();
    for (const cvec& s : segments)
        if (s.size() != n)
            throw std::invalid_argument("estimate_symbol_covariance: ragged segments");
    VectorXcd mean = VectorXcd::Zero(n);
    for (const cvec& s : segments)
        for (std::size_t i = 0; i < n; ++i) mean(static_cast<Eigen::Index>(i)) += s[i];
    mean /= static_cast<double>(segments.size());

    MatrixXcd acc = MatrixXcd::Zero(n, n);
    VectorXcd x(n);
    for (const cvec& s : segments) {
        for (std::size_t i = 0; i < n; ++i)
            x(static_cast<Eigen::Index>(i)) = s[i] - mean(static_cast<Eigen::Index>(i));
        if (kind == CovarianceKind::hermitian)
            acc.noalias() += x * x.adjoint();
        else
            acc.noalias() += x * x.transpose();
    }
    acc /= static_cast<double>(segments.size());
    if (kind == CovarianceKind::hermitian)
        acc = 0.5 * (acc + acc.adjoint().eval());  // exact Hermitian symmetry
    SymbolCovariance out;
    out.matrix = std::move(acc);
    out.sample_count = segments.size();
    out.kind = kind;
    return out;
}

inline ChannelCovariance banded_channel_covariance(const OfdmConfig& config, std::size_t k_c) {
    if (k_c < 1 || k_c > config.subcarriers)
        throw std::invalid_argument("banded_channel_covariance: need 1 <= K_c <= K");
    const std::size_t n = config.n_data();
    ChannelCovariance out;
    out.coherence_subcarriers = k_c;
    out.matrix = MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const auto a = static_cast<long long>(config.data_indices[i]);
            const auto b = static_cast<long long>(config.data_indices[j]);
            if (std::llabs(a - b) < static_cast<long long>(k_c))
                out.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0;
        }
    }
    return out;
}

namespace detail {

inline MatrixXcd dft_matrix_eigen(const OfdmConfig& config) {
    DftMatrixTruncated f = truncated_dft_matrix(config);
    MatrixXcd m(f.rows, f.cols);
    for (std::size_t r = 0; r < f.rows; ++r)
        for (std::size_t c = 0; c < f.cols; ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = f.at(r, c);
    return m;
}

} // namespace detail

/// p_y[k] = p_t f_k^H (V cov V^H) f_k + pilot_time_power[k] over all K
/// sampling points.
inline rvec expected_ofdm_power(const MatrixXcd& v, const SymbolCovariance& cov,
                                const OfdmConfig& config, double p_t,
                                const rvec& pilot_power) {
    const auto n = static_cast<Eigen::Index>(config.n_data());
    if (v.rows() != n || v.cols() != n || cov.matrix.rows() != n)
        throw std::invalid_argument("expected_ofdm_power: dimension mismatch");
    if (pilot_power.size() != config.subcarriers)
        throw std::invalid_argument("expected_ofdm_power: pilot power length != K");
    const MatrixXcd f = detail::dft_matrix_eigen(config);
    const MatrixXcd r = v * cov.matrix * v.adjoint();
    const MatrixXcd g = r * f;  // K_d x K
    rvec p(config.subcarriers);
    for (std::size_t k = 0; k < config.subcarriers; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        p[k] = p_t * (f.col(kk).adjoint() * g.col(kk))(0, 0).real() + pilot_power[k];
    }
    return p;
}

/**
 * Eq-style objective: sum over subcarrier pairs of the banded channel
 * weight times |V cov V^H| normalized to unit diagonal, plus omega times the
 * peak expected sampling-point power.
 */
inline double precoding_objective(const MatrixXcd& v, const SymbolCovariance& cov_x,
                                  const ChannelCovariance& cov_h, const OfdmConfig& config,
                                  double p_t, const rvec& pilot_power, double omega) {
    if (omega < 0.0) throw std::invalid_argument("precoding_objective: omega must be >= 0");
    const auto n = static_cast<Eigen::Index>(config.n_data());
    if (v.rows() != n || cov_x.matrix.rows() != n || cov_h.matrix.rows() != n)
        throw std::invalid_argument("precoding_objective: dimension mismatch");
    const MatrixXcd r = v * cov_x.matrix * v.adjoint();
    rvec diag(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        diag[static_cast<std::size_t>(i)] = r(i, i).real();
        if (!(diag[static_cast<std::size_t>(i)] > 0.0))
            throw DegenerateCovarianceError("precoding_objective: zero-variance subcarrier");
    }
    double term1 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double w = cov_h.matrix(i, j);
            if (w == 0.0) continue;
            const double denom = std::sqrt(diag[static_cast<std::size_t>(i)] *
                                           diag[static_cast<std::size_t>(j)]);
            term1 += w * ((i == j) ? 1.0 : std::abs(r(i, j)) / denom);
        }
    }
    if (omega == 0.0) return term1;
    const rvec p = expected_ofdm_power(v, cov_x, config, p_t, pilot_power);
    double peak = p.empty() ? 0.0 : p[0];
    for (double x : p) peak = std::max(peak, x);
    return term1 + omega * peak;
}

/// omega that puts `weight` of the identity-V correlation term onto the
/// identity-V peak power (the scale balancing used by the experiments).
inline double balanced_omega(const SymbolCovariance& cov_x, const ChannelCovariance& cov_h,
                             const OfdmConfig& config, double p_t, const rvec& pilot_power,
                             double weight = 0.1) {
    const auto n = static_cast<Eigen::Index>(config.n_data());
    const MatrixXcd identity = MatrixXcd::Identity(n, n);
    const double term1 = precoding_objective(identity, cov_x, cov_h, config, p_t,
                                             pilot_power, 0.0);
    const rvec p = expected_ofdm_power(identity, cov_x, config, p_t, pilot_power);
    double peak = 0.0;
    for (double x : p) peak = std::max(peak, x);
    if (peak <= 0.0) return weight;
    return weight * term1 / peak;
}

namespace detail {

inline constexpr double kSoftmaxBeta = 50.0;
inline constexpr double kArmijoC = 1e-4;
inline constexpr int kMaxInnerIterations = 100;

/// Haar-distributed random unitary via QR of a complex Gaussian matrix.
inline MatrixXcd random_unitary(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    MatrixXcd a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) a(i, j) = cplx{g(rng), g(rng)};
    Eigen::HouseholderQR<MatrixXcd> qr(a);
    MatrixXcd q = qr.householderQ();
    const MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < n; ++j) {
        const cplx d = r(j, j);
        const double m = std::abs(d);
        q.col(j) *= (m > 0.0) ? (d / m) : cplx{1.0, 0.0};
    }
    return q;
}

/// State shared by one row subproblem (everything except the row itself is
/// held fixed).
struct RowProblem {
    const MatrixXcd& cov;
    const MatrixXcd& f;  // K_d x K truncated DFT matrix
    const rvec& pilot_power;
    double p_t;
    double omega;

    Eigen::Index row;
    std::vector<Eigen::Index> neighbors;  // banded-channel peers of `row`
    MatrixXcd cov_vh;                     // cov * V^H at subproblem entry
    rvec peer_variance;                   // d2[k2] = v_k2 cov v_k2^H
    MatrixXcd u;                          // K x n rows: c_k * cov
    cvec phi;                             // conj(F(row, k))
    rvec phi_sq;                          // |F(row, k)|^2
    rvec gamma;                           // c_k cov c_k^H
    const MatrixXcd* v_fixed = nullptr;   // rows < row are the orthogonality set

    double evaluate(const RowVectorXcd& v, VectorXcd& q_scratch) const {
        q_scratch.noalias() = cov * v.adjoint();
        const double d = std::max((v * q_scratch)(0, 0).real(), 1e-300);
        double term1 = 0.0;
        for (Eigen::Index k2 : neighbors) {
            const cplx a = (v * cov_vh.col(k2))(0, 0);
            term1 += 2.0 * std::abs(a) /
                     std::sqrt(d * peer_variance[static_cast<std::size_t>(k2)]);
        }
        if (omega == 0.0) return term1;
        return term1 + omega * smoothed_peak(v, d);
    }

    double smoothed_peak(const RowVectorXcd& v, double d) const {
        const std::size_t k_total = pilot_power.size();
        rvec p(k_total);
        double peak = -1e300;
        for (std::size_t k = 0; k < k_total; ++k) {
            const auto kk = static_cast<Eigen::Index>(k);
            const cplx uv = (u.row(kk) * v.adjoint())(0, 0);
            p[k] = p_t * (gamma[k] + 2.0 * (phi[k] * uv).real() + phi_sq[k] * d) +
                   pilot_power[k];
            peak = std::max(peak, p[k]);
        }
        double acc = 0.0;
        for (double x : p) acc += std::exp(kSoftmaxBeta * (x - peak));
        return peak + std::log(acc) / kSoftmaxBeta;
    }

    /// Wirtinger gradient d f / d conj(v) of the smoothed row objective.
    RowVectorXcd gradient(const RowVectorXcd& v, VectorXcd& q_scratch) const {
        q_scratch.noalias() = cov * v.adjoint();
        const RowVectorXcd v_cov = q_scratch.adjoint();  // = v * cov (Hermitian cov)
        const double d = std::max((v * q_scratch)(0, 0).real(), 1e-300);
        RowVectorXcd g = RowVectorXcd::Zero(v.cols());
        for (Eigen::Index k2 : neighbors) {
            const cplx a = (v * cov_vh.col(k2))(0, 0);
            const double am = std::max(std::abs(a), 1e-300);
            const double d2 = peer_variance[static_cast<std::size_t>(k2)];
            const double inv_denom = 1.0 / std::sqrt(d * d2);
            g.noalias() += (a / am) * inv_denom * cov_vh.col(k2).adjoint();
            g.noalias() -= (am / (std::sqrt(d2) * d * std::sqrt(d))) * v_cov;
        }
        if (omega == 0.0) return g;

        // softmax-weighted power gradient
        const std::size_t k_total = pilot_power.size();
        rvec p(k_total);
        double peak = -1e300;
        std::vector<cplx> uv(k_total);
        for (std::size_t k = 0; k < k_total; ++k) {
            const auto kk = static_cast<Eigen::Index>(k);
            uv[k] = (u.row(kk) * v.adjoint())(0, 0);
            p[k] = p_t * (gamma[k] + 2.0 * (phi[k] * uv[k]).real() + phi_sq[k] * d) +
                   pilot_power[k];
            peak = std::max(peak, p[k]);
        }
        double z = 0.0;
        for (double x : p) z += std::exp(kSoftmaxBeta * (x - peak));
        RowVectorXcd power_grad = RowVectorXcd::Zero(v.cols());
        double phi_sq_weighted = 0.0;
        for (std::size_t k = 0; k < k_total; ++k) {
            const double w = std::exp(kSoftmaxBeta * (p[k] - peak)) / z;
            if (w < 1e-14) continue;
            power_grad.noalias() += (w * phi[k]) * u.row(static_cast<Eigen::Index>(k));
            phi_sq_weighted += w * phi_sq[k];
        }
        power_grad.noalias() += phi_sq_weighted * v_cov;
        g.noalias() += (omega * p_t) * power_grad;
        return g;
    }

    /// Orthogonalize against the already-updated rows, then clip the norm
    /// to 1 (the relaxed feasible set).
    void project(RowVectorXcd& v) const {
        for (Eigen::Index j = 0; j < row; ++j) {
            const RowVectorXcd fixed = v_fixed->row(j);
            v.noalias() -= (v * fixed.adjoint())(0, 0) * fixed;
        }
        const double nrm = v.norm();
        if (nrm > 1.0) v /= nrm;
    }

    /// Deterministic fallback direction inside the feasible subspace.
    RowVectorXcd fallback_direction() const {
        RowVectorXcd best = RowVectorXcd::Zero(cov.rows());
        double best_norm = -1.0;
        for (Eigen::Index i = 0; i < cov.rows(); ++i) {
            RowVectorXcd e = RowVectorXcd::Zero(cov.rows());
            e(i) = cplx{1.0, 0.0};
            project(e);
            const double nrm = e.norm();
            if (nrm > best_norm) {
                best_norm = nrm;
                best = e;
            }
        }
        return best;
    }
};

/// Minimize the smoothed objective over row `row` of v (projected gradient
/// with Armijo backtracking), then renormalize the row to unit norm.
inline void solve_row(MatrixXcd& v_mat, RowProblem& prob) {
    prob.v_fixed = &v_mat;
    RowVectorXcd v = v_mat.row(prob.row);
    prob.project(v);
    if (v.norm() < 1e-9) v = prob.fallback_direction();

    VectorXcd q(v_mat.cols());
    double f = prob.evaluate(v, q);
    double step = 1.0;
    for (int iter = 0; iter < kMaxInnerIterations; ++iter) {
        const RowVectorXcd g = prob.gradient(v, q);
        bool accepted = false;
        RowVectorXcd v_new;
        double f_new = f;
        for (int bt = 0; bt < 40 && step > 1e-14; ++bt) {
            v_new = v - step * g;
            prob.project(v_new);
            const RowVectorXcd delta = v_new - v;
            const double delta_norm = delta.norm();
            if (delta_norm < 1e-13) break;  // stationary on the feasible set
            f_new = prob.evaluate(v_new, q);
            const double dir = 2.0 * (g * delta.adjoint())(0, 0).real();
            if (f_new <= f + kArmijoC * dir) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        const double improvement = f - f_new;
        v = v_new;
        f = f_new;
        step = std::min(step * 2.0, 1e6);
        if (improvement <= 1e-10 * (1.0 + std::abs(f))) break;
    }

    const double nrm = v.norm();
    if (nrm < 1e-9) {
        v = prob.fallback_direction();
        const double fn = v.norm();
        v /= (fn > 0.0 ? fn : 1.0);
    } else {
        v /= nrm;
    }
    v_mat.row(prob.row) = v;
}

/// One full sweep over all rows of v. v is unitary again on exit.
inline void sweep_rows(MatrixXcd& v, const MatrixXcd& cov, const MatrixXcd& f,
                       const MatrixXd& cov_h, const rvec& pilot_power, double p_t,
                       double omega) {
    const Eigen::Index n = v.rows();
    for (Eigen::Index r = 0; r < n; ++r) {
        RowProblem prob{cov, f, pilot_power, p_t, omega, r, {}, {}, {}, {}, {}, {}, {}, nullptr};
        for (Eigen::Index k2 = 0; k2 < n; ++k2)
            if (k2 != r && cov_h(r, k2) != 0.0) prob.neighbors.push_back(k2);
        prob.cov_vh.noalias() = cov * v.adjoint();
        prob.peer_variance.resize(static_cast<std::size_t>(n));
        for (Eigen::Index k2 = 0; k2 < n; ++k2)
            prob.peer_variance[static_cast<std::size_t>(k2)] =
                std::max((v.row(k2) * prob.cov_vh.col(k2))(0, 0).real(), 1e-300);
        if (omega > 0.0) {
            const std::size_t k_total = pilot_power.size();
            // c_k excludes row r's own contribution to f_k^H V
            MatrixXcd c = f.adjoint() * v;  // K x n
            prob.phi.resize(k_total);
            prob.phi_sq.resize(k_total);
            prob.gamma.resize(k_total);
            for (std::size_t k = 0; k < k_total; ++k) {
                const auto kk = static_cast<Eigen::Index>(k);
                const cplx frk = f(r, kk);
                prob.phi[k] = std::conj(frk);
                prob.phi_sq[k] = std::norm(frk);
                c.row(kk).noalias() -= prob.phi[k] * v.row(r);
            }
            prob.u.noalias() = c * cov;  // K x n
            for (std::size_t k = 0; k < k_total; ++k) {
                const auto kk = static_cast<Eigen::Index>(k);
                prob.gamma[k] = (prob.u.row(kk) * c.row(kk).adjoint())(0, 0).real();
            }
        }
        solve_row(v, prob);
    }
}

} // namespace detail

/**
 * Alternating row-wise optimization of the unitary precoding matrix over
 * `n_init` random initializations plus the identity. Each candidate's sweep
 * loop keeps only improving sweeps, so its recorded objective sequence is
 * nonincreasing; the best final candidate by true objective wins.
 */
inline PrecodingMatrix optimize_precoder(const SymbolCovariance& cov_x,
                                         const ChannelCovariance& cov_h,
                                         const OfdmConfig& config, double p_t,
                                         const rvec& pilot_power, double omega,
                                         std::size_t n_init = 8, std::size_t max_sweeps = 20,
                                         double tol = 1e-6, std::uint64_t seed = 1) {
    if (n_init < 1) throw std::invalid_argument("optimize_precoder: need n_init >= 1");
    if (omega < 0.0) throw std::invalid_argument("optimize_precoder: omega must be >= 0");
    if (cov_x.kind != CovarianceKind::hermitian)
        throw std::invalid_argument("optimize_precoder: requires the Hermitian covariance");
    const auto n = static_cast<Eigen::Index>(config.n_data());
    if (cov_x.matrix.rows() != n || cov_h.matrix.rows() != n)
        throw std::invalid_argument("optimize_precoder: dimension mismatch");

    // PSD gate: tiny negative eigenvalues are estimation noise, anything
    // beyond that is a broken covariance
    Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(cov_x.matrix);
    const double trace = cov_x.matrix.trace().real();
    if (!(trace > 0.0) || eig.eigenvalues().minCoeff() < -1e-8 * trace)
        throw DegenerateCovarianceError("optimize_precoder: covariance is not PSD");

    const MatrixXcd f = detail::dft_matrix_eigen(config);
    auto true_objective = [&](const MatrixXcd& v) {
        return precoding_objective(v, cov_x, cov_h, config, p_t, pilot_power, omega);
    };

    PrecodingMatrix best;
    best.omega = omega;
    best.init_count = n_init;
    double best_obj = 0.0;
    bool have_best = false;

    for (std::size_t init = 0; init <= n_init; ++init) {
        std::mt19937_64 rng(derive_seed(seed, init));
        MatrixXcd v = (init == 0) ? MatrixXcd::Identity(n, n)
                                  : detail::random_unitary(n, rng);
        double obj = true_objective(v);
        rvec history{obj};
        for (std::size_t s = 0; s < max_sweeps; ++s) {
            MatrixXcd trial = v;
            detail::sweep_rows(trial, cov_x.matrix, f, cov_h.matrix, pilot_power, p_t, omega);
            const double trial_obj = true_objective(trial);
            if (!(trial_obj < obj)) break;  // non-improving sweep ends the loop
            const double improvement = obj - trial_obj;
            v = std::move(trial);
            obj = trial_obj;
            history.push_back(obj);
            if (improvement < tol) break;
        }
        best.sweep_objectives.push_back(history);
        if (!have_best || obj < best_obj) {
            best_obj = obj;
            best.v = v;
            have_best = true;
        }
    }
    best.objective_value = best_obj;
    return best;
}

inline cvec apply_precoding(const PrecodingMatrix& p, const cvec& x_d) {
    if (static_cast<Eigen::Index>(x_d.size()) != p.v.rows())
        throw std::invalid_argument("apply_precoding: dimension mismatch");
    VectorXcd x(p.v.rows());
    for (std::size_t i = 0; i < x_d.size(); ++i) x(static_cast<Eigen::Index>(i)) = x_d[i];
    const VectorXcd y = p.v * x;
    cvec out(x_d.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = y(static_cast<Eigen::Index>(i));
    return out;
}

inline cvec invert_precoding(const PrecodingMatrix& p, const cvec& x_hat) {
    if (static_cast<Eigen::Index>(x_hat.size()) != p.v.rows())
        throw std::invalid_argument("invert_precoding: dimension mismatch");
    if (unitarity_error(p.v) > 1e-6)
        throw InvalidPrecoderError("invert_precoding: matrix is not unitary");
    VectorXcd x(p.v.rows());
    for (std::size_t i = 0; i < x_hat.size(); ++i) x(static_cast<Eigen::Index>(i)) = x_hat[i];
    const VectorXcd y = p.v.adjoint() * x;
    cvec out(x_hat.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = y(static_cast<Eigen::Index>(i));
    return out;
}

// ---------------------------------------------------------------------------
// Persistence: "JPC1" magic, u32 K_d, row-major complex entries as
// little-endian f64 pairs, then objective, omega and the init count.
// ---------------------------------------------------------------------------

inline constexpr char kPrecoderMagic[4] = {'J', 'P', 'C', '1'};

namespace detail {

inline void put_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

inline void put_f64_le(std::string& out, double d) {
    std::uint64_t u;
    std::memcpy(&u, &d, sizeof(u));
    put_u64_le(out, u);
}

inline double get_f64_le(const unsigned char* p) {
    const std::uint64_t u = get_u64_le(p);
    double d;
    std::memcpy(&d, &u, sizeof(d));
    return d;
}

} // namespace detail

inline void save_precoder(const PrecodingMatrix& p, const std::string& path) {
    std::string buf;
    buf.append(kPrecoderMagic, 4);
    const auto n = static_cast<std::uint32_t>(p.v.rows());
    buf.push_back(static_cast<char>(n & 0xff));
    buf.push_back(static_cast<char>((n >> 8) & 0xff));
    buf.push_back(static_cast<char>((n >> 16) & 0xff));
    buf.push_back(static_cast<char>((n >> 24) & 0xff));
    for (Eigen::Index r = 0; r < p.v.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.v.cols(); ++c) {
            detail::put_f64_le(buf, p.v(r, c).real());
            detail::put_f64_le(buf, p.v(r, c).imag());
        }
    }
    detail::put_f64_le(buf, p.objective_value);
    detail::put_f64_le(buf, p.omega);
    const auto nr = static_cast<std::uint32_t>(p.init_count);
    buf.push_back(static_cast<char>(nr & 0xff));
    buf.push_back(static_cast<char>((nr >> 8) & 0xff));
    buf.push_back(static_cast<char>((nr >> 16) & 0xff));
    buf.push_back(static_cast<char>((nr >> 24) & 0xff));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("save_precoder: cannot open " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw FormatError("save_precoder: short write");
}

inline PrecodingMatrix load_precoder(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("load_precoder: cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 8 || std::memcmp(buf.data(), kPrecoderMagic, 4) != 0)
        throw FormatError("load_precoder: bad magic");
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
    const std::uint32_t n = detail::get_u32_le(p + 4);
    const std::size_t want = 8 + 16ull * n * n + 16 + 4;
    if (buf.size() != want) throw FormatError("load_precoder: size mismatch");
    PrecodingMatrix out;
    out.v.resize(n, n);
    std::size_t off = 8;
    for (std::uint32_t r = 0; r < n; ++r) {
        for (std::uint32_t c = 0; c < n; ++c) {
            const double re = detail::get_f64_le(p + off);
            const double im = detail::get_f64_le(p + off + 8);
            out.v(r, c) = cplx{re, im};
            off += 16;
        }
    }
    out.objective_value = detail::get_f64_le(p + off);
    out.omega = detail::get_f64_le(p + off + 8);
    out.init_count = detail::get_u32_le(p + off + 16);
    if (unitarity_error(out.v) > 1e-6)
        throw InvalidPrecoderError("load_precoder: stored matrix is not unitary");
    return out;
}

} // namespace jscc
