#pragma once

// Test-only helpers: random model generators and dense-algebra oracles that
// are independent of the recursive filter/smoother code paths.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "kspec/kbk.hpp"
#include "kspec/rng.hpp"

namespace kspec::testing {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd random_matrix(NormalStream& rng, Index rows, Index cols)
{
    MatrixXd out(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) out(i, j) = rng();
    return out;
}

inline MatrixXd random_spd(NormalStream& rng, Index m, double shift = 0.1)
{
    const MatrixXd b = random_matrix(rng, m, m);
    return b * b.transpose() / double(m) + shift * MatrixXd::Identity(m, m);
}

/// Random matrix rescaled to the given spectral radius.
inline MatrixXd random_stable(NormalStream& rng, Index m, double radius = 0.9)
{
    MatrixXd a = random_matrix(rng, m, m);
    const double rho = a.eigenvalues().cwiseAbs().maxCoeff();
    return a * (radius / rho);
}

inline kbk::StateSpaceModel<double> random_model(NormalStream& rng, Index m)
{
    kbk::StateSpaceModel<double> model;
    model.A = random_stable(rng, m, 0.95);
    model.process_cov = random_spd(rng, m);
    model.measurement_cov = random_spd(rng, m);
    model.init_mean = random_matrix(rng, m, 1);
    model.init_cov = random_spd(rng, m);
    return model;
}

/// Simulates the linear-Gaussian block model; column k = y_{k+1}.
inline MatrixXd simulate_blocks(NormalStream& rng, const kbk::StateSpaceModel<double>& model, Index q)
{
    const Index m = model.dimension();
    const Eigen::LLT<MatrixXd> lv(model.process_cov), lw(model.measurement_cov), l1(model.init_cov);
    MatrixXd y(m, q);
    VectorXd z = model.init_mean + l1.matrixL() * random_matrix(rng, m, 1);
    for (Index k = 0; k < q; ++k) {
        if (k > 0) z = model.A * z + lv.matrixL() * random_matrix(rng, m, 1);
        y.col(k) = z + lw.matrixL() * random_matrix(rng, m, 1);
    }
    return y;
}

/// Joint Gaussian of the stacked states (z_1..z_Q) and observations, conditioned directly.
struct BatchPosterior {
    VectorXd prior_mean;   // stacked E[z]
    MatrixXd prior_cov;    // Cov(z)
    MatrixXd obs_cov;      // Cov(y)
    VectorXd post_mean;
    MatrixXd post_cov;
    double log_density = 0.0;
    Index m = 0;

    VectorXd mean(Index k) const { return post_mean.segment(k * m, m); }
    MatrixXd cov(Index i, Index j) const { return post_cov.block(i * m, j * m, m, m); }
};

inline BatchPosterior batch_posterior(const kbk::StateSpaceModel<double>& model, const MatrixXd& y)
{
    const Index m = model.dimension();
    const Index q = y.cols();
    BatchPosterior out;
    out.m = m;
    out.prior_mean.resize(q * m);
    out.prior_cov.resize(q * m, q * m);

    std::vector<MatrixXd> marginal(q);
    out.prior_mean.segment(0, m) = model.init_mean;
    marginal[0] = model.init_cov;
    for (Index k = 1; k < q; ++k) {
        out.prior_mean.segment(k * m, m) = model.A * out.prior_mean.segment((k - 1) * m, m);
        marginal[k] = model.A * marginal[k - 1] * model.A.transpose() + model.process_cov;
    }
    // Cov(z_i, z_j) = A^{i-j} Var(z_j) for i >= j.
    for (Index j = 0; j < q; ++j) {
        MatrixXd block = marginal[j];
        for (Index i = j; i < q; ++i) {
            out.prior_cov.block(i * m, j * m, m, m) = block;
            out.prior_cov.block(j * m, i * m, m, m) = block.transpose();
            block = model.A * block;
        }
    }
    out.obs_cov = out.prior_cov;
    for (Index k = 0; k < q; ++k) out.obs_cov.block(k * m, k * m, m, m) += model.measurement_cov;

    const VectorXd yv = Eigen::Map<const VectorXd>(y.data(), y.size());
    const Eigen::LDLT<MatrixXd> ldlt(out.obs_cov);
    const VectorXd resid = yv - out.prior_mean;
    out.post_mean = out.prior_mean + out.prior_cov * ldlt.solve(resid);
    out.post_cov = out.prior_cov - out.prior_cov * ldlt.solve(out.prior_cov);

    const Eigen::PartialPivLU<MatrixXd> lu(out.obs_cov);
    const double log_det = lu.matrixLU().diagonal().array().abs().log().sum();
    out.log_density = -0.5 * (double(q * m) * std::log(2.0 * std::numbers::pi) + log_det +
                              resid.dot(ldlt.solve(resid)));
    return out;
}

/// The M-step minimization objective L(A, R_v, R_w) written term by term.
/// The cross term uses tr(R_v^{-1} A P_{k+1,k}^T) with P_{k+1,k} = Cov(z_{k+1}, z_k).
inline double em_objective(const MatrixXd& a, const MatrixXd& rv, const MatrixXd& rw,
                           const kbk::Posterior<double>& post, const MatrixXd& y)
{
    const Index q = y.cols();
    const MatrixXd rw_inv = rw.inverse();
    const MatrixXd rv_inv = rv.inverse();
    const double log_det_w = std::log(rw.determinant());
    const double log_det_v = std::log(rv.determinant());
    double total = 0.0;
    for (Index k = 0; k < q; ++k) {
        const VectorXd yk = y.col(k);
        const VectorXd mk = post.means.col(k);
        total += log_det_w + yk.dot(rw_inv * yk) + mk.dot(rw_inv * mk) + (rw_inv * post.covs[k]).trace() -
                 2.0 * yk.dot(rw_inv * mk);
    }
    for (Index k = 0; k + 1 < q; ++k) {
        const VectorXd mk = post.means.col(k);
        const VectorXd mn = post.means.col(k + 1);
        total += log_det_v + mn.dot(rv_inv * mn) + mk.dot(a.transpose() * rv_inv * a * mk) -
                 2.0 * mn.dot(rv_inv * a * mk) +
                 (rv_inv * post.covs[k + 1] + a.transpose() * rv_inv * a * post.covs[k] -
                  2.0 * rv_inv * a * post.lag_one_covs[k].transpose())
                     .trace();
    }
    return total;
}

/// Posterior extracted from the batch oracle, in the library's layout.
inline kbk::Posterior<double> posterior_from_batch(const BatchPosterior& b, Index q)
{
    kbk::Posterior<double> post;
    post.means.resize(b.m, q);
    for (Index k = 0; k < q; ++k) {
        post.means.col(k) = b.mean(k);
        post.covs.push_back(b.cov(k, k));
        if (k + 1 < q) post.lag_one_covs.push_back(b.cov(k + 1, k));
    }
    return post;
}

}  // namespace kspec::testing
