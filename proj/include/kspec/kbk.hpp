#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "kspec/baselines.hpp"
#include "kspec/common.hpp"
#include "kspec/embed.hpp"

/// EM identification of the lifted linear-Gaussian block model
///
///   z_{k+1} = A z_k + v_k,   v_k ~ N(0, R_v)
///   y_k     = z_k + w_k,     w_k ~ N(0, R_w)
///
/// The E-step is a Kalman filter followed by a Rauch-Tung-Striebel smoother;
/// the M-step updates R_w, R_v and A in closed form, in that order.
namespace kspec::kbk {

/// Raised when the M-step sufficient statistic sum(H_k) cannot be inverted.
class DegenerateStatistics : public NumericalError {
public:
    using NumericalError::NumericalError;
};

inline constexpr double singular_condition = 1e14;

template <typename Scalar = double>
struct StateSpaceModel {
    Matrix<Scalar> A;
    Matrix<Scalar> process_cov;      ///< R_v
    Matrix<Scalar> measurement_cov;  ///< R_w
    Vector<Scalar> init_mean;        ///< prior mean of z_1
    Matrix<Scalar> init_cov;         ///< prior covariance of z_1

    Eigen::Index dimension() const noexcept { return A.rows(); }
};

template <typename Scalar = double>
struct FilterResult {
    Matrix<Scalar> predicted_means;  ///< column k: E[z_k | y_1..y_{k-1}]
    std::vector<Matrix<Scalar>> predicted_covs;
    Matrix<Scalar> filtered_means;  ///< column k: E[z_k | y_1..y_k]
    std::vector<Matrix<Scalar>> filtered_covs;
    std::vector<Matrix<Scalar>> gains;
    Scalar log_likelihood{};
};

template <typename Scalar = double>
struct Posterior {
    Matrix<Scalar> means;  ///< column k: E[z_k | Y]
    std::vector<Matrix<Scalar>> covs;
    /// lag_one_covs[k] = Cov(z_{k+1}, z_k | Y), k = 0 .. Q-2 (0-based).
    std::vector<Matrix<Scalar>> lag_one_covs;
};

struct EMConfig {
    int max_iterations = 500;
    double likelihood_rel_tol = 1e-8;
    bool diagonal_covariances = true;
    double cov_floor = 1e-10;
};

enum class Termination { Converged, MaxIterations };

struct EMIteration {
    int iteration = 0;
    double log_likelihood = 0.0;
    /// Frobenius norm of the A change made by the preceding M-step (0 on the first record).
    double delta_a = 0.0;
};

struct EMTrace {
    std::vector<EMIteration> iterations;
    Termination termination = Termination::MaxIterations;
};

template <typename Scalar = double>
struct EMFit {
    StateSpaceModel<Scalar> model;
    Posterior<Scalar> posterior;
    EMTrace trace;
};

namespace detail {

template <typename Scalar>
void check_dims(const StateSpaceModel<Scalar>& model, const embed::BlockData<Scalar>& data)
{
    const Eigen::Index m = model.dimension();
    kspec::detail::require(model.A.cols() == m && model.process_cov.rows() == m &&
                               model.process_cov.cols() == m && model.measurement_cov.rows() == m &&
                               model.measurement_cov.cols() == m && model.init_mean.size() == m &&
                               model.init_cov.rows() == m && model.init_cov.cols() == m,
                           "kbk: inconsistent model dimensions");
    kspec::detail::require(data.block_length() == m, "kbk: block length differs from model dimension");
    kspec::detail::require(data.block_count() >= 1, "kbk: no data blocks");
}

/// Symmetric part, then either diagonal projection with a floor on the
/// diagonal, or an eigenvalue clamp at `floor`.
template <typename Scalar>
Matrix<Scalar> condition_covariance(const Matrix<Scalar>& raw, bool diagonal, Scalar floor)
{
    Matrix<Scalar> sym = kspec::detail::symmetrized(raw);
    if (diagonal) {
        Vector<Scalar> d = sym.diagonal().cwiseMax(floor);
        return d.asDiagonal();
    }
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(sym);
    const Vector<Scalar> clamped = es.eigenvalues().cwiseMax(floor);
    return kspec::detail::symmetrized(Matrix<Scalar>(es.eigenvectors() * clamped.asDiagonal() *
                                                     es.eigenvectors().transpose()));
}

}  // namespace detail

template <typename Scalar>
FilterResult<Scalar> kalman_filter(const StateSpaceModel<Scalar>& model,
                                   const embed::BlockData<Scalar>& data)
{
    detail::check_dims(model, data);
    const Eigen::Index m = model.dimension();
    const Eigen::Index q = data.block_count();
    const Matrix<Scalar> identity = Matrix<Scalar>::Identity(m, m);
    const Scalar log_2pi = std::log(Scalar(2) * std::numbers::pi_v<Scalar>);

    FilterResult<Scalar> out;
    out.predicted_means.resize(m, q);
    out.filtered_means.resize(m, q);
    out.predicted_covs.reserve(q);
    out.filtered_covs.reserve(q);
    out.gains.reserve(q);
    out.log_likelihood = 0;

    for (Eigen::Index k = 0; k < q; ++k) {
        Vector<Scalar> mean_pred;
        Matrix<Scalar> cov_pred;
        if (k == 0) {
            mean_pred = model.init_mean;
            cov_pred = model.init_cov;
        } else {
            mean_pred = model.A * out.filtered_means.col(k - 1);
            cov_pred = kspec::detail::symmetrized(
                Matrix<Scalar>(model.A * out.filtered_covs.back() * model.A.transpose() +
                               model.process_cov));
        }

        const Matrix<Scalar> innovation_cov =
            kspec::detail::symmetrized(Matrix<Scalar>(cov_pred + model.measurement_cov));
        if (!innovation_cov.allFinite() ||
            kspec::detail::condition_number(innovation_cov) > Scalar(singular_condition))
            throw NumericalError("kalman_filter: singular innovation covariance at block " +
                                 std::to_string(k + 1));
        const Eigen::LLT<Matrix<Scalar>> chol(innovation_cov);
        if (chol.info() != Eigen::Success)
            throw NumericalError("kalman_filter: innovation covariance not positive definite at block " +
                                 std::to_string(k + 1));

        const Vector<Scalar> residual = data.block(k) - mean_pred;
        // K = cov_pred * S^{-1}; both symmetric so K^T = S^{-1} cov_pred.
        const Matrix<Scalar> gain = chol.solve(cov_pred).transpose();
        const Scalar log_det = Scalar(2) * chol.matrixLLT().diagonal().array().log().sum();
        out.log_likelihood -=
            Scalar(0.5) * (Scalar(m) * log_2pi + log_det + residual.dot(chol.solve(residual)));

        out.predicted_means.col(k) = mean_pred;
        out.filtered_means.col(k) = mean_pred + gain * residual;
        out.predicted_covs.push_back(cov_pred);
        out.filtered_covs.push_back(
            kspec::detail::symmetrized(Matrix<Scalar>((identity - gain) * cov_pred)));
        out.gains.push_back(gain);
    }
    return out;
}

template <typename Scalar>
Posterior<Scalar> rts_smoother(const FilterResult<Scalar>& filter, const StateSpaceModel<Scalar>& model)
{
    const Eigen::Index q = filter.filtered_means.cols();
    const Eigen::Index m = model.dimension();
    kspec::detail::require(q >= 1 && static_cast<Eigen::Index>(filter.filtered_covs.size()) == q,
                           "rts_smoother: filter result is empty or inconsistent");
    const Matrix<Scalar> identity = Matrix<Scalar>::Identity(m, m);
    const Matrix<Scalar>& a = model.A;

    Posterior<Scalar> post;
    post.means.resize(m, q);
    post.covs.assign(q, Matrix<Scalar>());
    post.lag_one_covs.assign(q > 0 ? q - 1 : 0, Matrix<Scalar>());
    post.means.col(q - 1) = filter.filtered_means.col(q - 1);
    post.covs[q - 1] = filter.filtered_covs[q - 1];
    if (q == 1) return post;

    // Smoother gains G_k = Sigma_k A^T (Sigma_bar_{k+1})^{-1}, k = 0 .. Q-2.
    std::vector<Matrix<Scalar>> gains(q - 1);
    for (Eigen::Index k = q - 2; k >= 0; --k) {
        const Matrix<Scalar>& cov_next_pred = filter.predicted_covs[k + 1];
        if (!cov_next_pred.allFinite() ||
            kspec::detail::condition_number(cov_next_pred) > Scalar(singular_condition))
            throw NumericalError("rts_smoother: singular predicted covariance at block " +
                                 std::to_string(k + 2));
        const Eigen::LDLT<Matrix<Scalar>> ldlt(cov_next_pred);
        const Matrix<Scalar>& sigma = filter.filtered_covs[k];
        gains[k] = ldlt.solve(a * sigma).transpose();

        post.means.col(k) = filter.filtered_means.col(k) +
                            gains[k] * (post.means.col(k + 1) - filter.predicted_means.col(k + 1));
        post.covs[k] = kspec::detail::symmetrized(
            Matrix<Scalar>(sigma + gains[k] * (post.covs[k + 1] - cov_next_pred) * gains[k].transpose()));
    }

    // Lag-one covariances, backward from Cov(z_Q, z_{Q-1}) = (I - K_Q) A Sigma_{Q-1}.
    post.lag_one_covs[q - 2] = (identity - filter.gains[q - 1]) * a * filter.filtered_covs[q - 2];
    for (Eigen::Index k = q - 2; k >= 1; --k) {
        // Cov(z_{k+1}, z_k) in 0-based block indices k, k-1.
        post.lag_one_covs[k - 1] =
            filter.filtered_covs[k] * gains[k - 1].transpose() +
            gains[k] * (post.lag_one_covs[k] - a * filter.filtered_covs[k]) * gains[k - 1].transpose();
    }
    return post;
}

template <typename Scalar>
Scalar log_likelihood(const StateSpaceModel<Scalar>& model, const embed::BlockData<Scalar>& data)
{
    return kalman_filter(model, data).log_likelihood;
}

/// Closed-form block-coordinate M-step: R_w, then R_v at the current A, then A.
template <typename Scalar>
StateSpaceModel<Scalar> m_step(const Posterior<Scalar>& post, const embed::BlockData<Scalar>& data,
                               const StateSpaceModel<Scalar>& current, const EMConfig& config = {})
{
    detail::check_dims(current, data);
    const Eigen::Index m = current.dimension();
    const Eigen::Index q = data.block_count();
    kspec::detail::require(q >= 2, "m_step: need at least two blocks");
    kspec::detail::require(post.means.cols() == q && post.means.rows() == m &&
                               static_cast<Eigen::Index>(post.covs.size()) == q &&
                               static_cast<Eigen::Index>(post.lag_one_covs.size()) == q - 1,
                           "m_step: posterior does not match the data");
    const Scalar floor = static_cast<Scalar>(config.cov_floor);
    const Matrix<Scalar>& a = current.A;

    // H_k = P_k + m_k m_k^T
    std::vector<Matrix<Scalar>> h(q);
    for (Eigen::Index k = 0; k < q; ++k)
        h[k] = post.covs[k] + post.means.col(k) * post.means.col(k).transpose();

    Matrix<Scalar> rw = Matrix<Scalar>::Zero(m, m);
    for (Eigen::Index k = 0; k < q; ++k) {
        const auto y = data.block(k);
        rw += h[k] - Scalar(2) * post.means.col(k) * y.transpose() + y * y.transpose();
    }
    rw /= Scalar(q);

    Matrix<Scalar> s00 = Matrix<Scalar>::Zero(m, m);  // sum_{k<Q} H_k
    Matrix<Scalar> s11 = Matrix<Scalar>::Zero(m, m);  // sum_{k>1} H_k
    Matrix<Scalar> s10 = Matrix<Scalar>::Zero(m, m);  // sum E[z_{k+1} z_k^T]
    for (Eigen::Index k = 0; k + 1 < q; ++k) {
        s00 += h[k];
        s11 += h[k + 1];
        s10 += post.lag_one_covs[k] + post.means.col(k + 1) * post.means.col(k).transpose();
    }
    Matrix<Scalar> rv = (a * s00 * a.transpose() + s11 - Scalar(2) * s10 * a.transpose()) / Scalar(q - 1);

    if (!s00.allFinite() || kspec::detail::condition_number(s00) > Scalar(singular_condition))
        throw DegenerateStatistics("m_step: sum of second moments is singular");
    // Row j of A solves A_j * S00 = (S10)_j, i.e. S00 A^T = S10^T.
    const Eigen::LDLT<Matrix<Scalar>> ldlt(kspec::detail::symmetrized(s00));

    StateSpaceModel<Scalar> next;
    next.measurement_cov = detail::condition_covariance(rw, config.diagonal_covariances, floor);
    next.process_cov = detail::condition_covariance(rv, config.diagonal_covariances, floor);
    next.A = ldlt.solve(s10.transpose()).transpose();
    next.init_mean = post.means.col(0);
    next.init_cov = detail::condition_covariance(post.covs[0], false, floor);
    return next;
}

/// A = least-squares DMD of consecutive blocks; R_w = R_v = Sigma_1 = 0.1 var(y) I.
template <typename Scalar>
StateSpaceModel<Scalar> default_init(const embed::BlockData<Scalar>& data, const EMConfig& config = {})
{
    const Eigen::Index m = data.block_length();
    const Eigen::Index q = data.block_count();
    kspec::detail::require(q >= 2, "default_init: need at least two blocks");
    const Scalar floor = static_cast<Scalar>(config.cov_floor);
    const Matrix<Scalar> identity = Matrix<Scalar>::Identity(m, m);

    const auto& y = data.blocks;
    const Scalar mean = y.mean();
    const Scalar var = (y.array() - mean).square().sum() / Scalar(y.size());

    StateSpaceModel<Scalar> model;
    model.init_mean = data.block(0);
    if (!(var > Scalar(0))) {
        model.A = identity;
        model.process_cov = floor * identity;
        model.measurement_cov = floor * identity;
        model.init_cov = floor * identity;
        return model;
    }
    const Scalar level = std::max(Scalar(0.1) * var, floor);
    model.A = baselines::dmd(baselines::make_pairs(data));
    model.process_cov = level * identity;
    model.measurement_cov = level * identity;
    model.init_cov = level * identity;
    return model;
}

template <typename Scalar>
EMFit<Scalar> em_fit(const embed::BlockData<Scalar>& data, const EMConfig& config,
                     const StateSpaceModel<Scalar>& init)
{
    kspec::detail::require(data.block_count() >= 2, "em_fit: need at least two blocks");
    kspec::detail::require(config.max_iterations >= 1, "em_fit: max_iterations must be positive");
    kspec::detail::require(config.likelihood_rel_tol > 0, "em_fit: likelihood_rel_tol must be positive");
    kspec::detail::require(config.cov_floor > 0, "em_fit: cov_floor must be positive");

    EMFit<Scalar> fit;
    fit.model = init;
    double previous_ll = 0.0;
    double delta_a = 0.0;
    for (int it = 0; it < config.max_iterations; ++it) {
        try {
            const FilterResult<Scalar> filter = kalman_filter(fit.model, data);
            fit.posterior = rts_smoother(filter, fit.model);
            const double ll = static_cast<double>(filter.log_likelihood);
            fit.trace.iterations.push_back({it, ll, delta_a});

            if (it > 0 && std::abs(ll - previous_ll) / (std::abs(ll) + 1.0) < config.likelihood_rel_tol) {
                fit.trace.termination = Termination::Converged;
                break;
            }
            if (it + 1 == config.max_iterations) {
                fit.trace.termination = Termination::MaxIterations;
                break;
            }
            StateSpaceModel<Scalar> next = m_step(fit.posterior, data, fit.model, config);
            delta_a = static_cast<double>((next.A - fit.model.A).norm());
            fit.model = std::move(next);
            previous_ll = ll;
        } catch (const DegenerateStatistics& e) {
            throw DegenerateStatistics("em_fit iteration " + std::to_string(it) + ": " + e.what());
        } catch (const NumericalError& e) {
            throw NumericalError("em_fit iteration " + std::to_string(it) + ": " + e.what());
        }
    }
    return fit;
}

template <typename Scalar>
EMFit<Scalar> em_fit(const embed::BlockData<Scalar>& data, const EMConfig& config = {})
{
    return em_fit(data, config, default_init(data, config));
}

}  // namespace kspec::kbk
