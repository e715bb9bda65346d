#pragma once

#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

#include "kspec/common.hpp"
#include "kspec/embed.hpp"

/// DMD-family reference estimators on delay-block snapshot pairs.
namespace kspec::baselines {

/// Column j of `future` is the block that follows column j of `past`.
template <typename Scalar = double>
struct SnapshotPairs {
    Matrix<Scalar> past;
    Matrix<Scalar> future;
};

template <typename Scalar>
SnapshotPairs<Scalar> make_pairs(const embed::BlockData<Scalar>& data)
{
    const Eigen::Index q = data.block_count();
    detail::require(q >= 2, "make_pairs: need at least two blocks");
    return {data.blocks.leftCols(q - 1), data.blocks.rightCols(q - 1)};
}

/// Moore-Penrose pseudoinverse, singular values below rel_tol * s_max dropped.
template <typename Derived>
Matrix<typename Derived::Scalar> pseudo_inverse(const Eigen::MatrixBase<Derived>& x,
                                                typename Derived::RealScalar rel_tol = 1e-12)
{
    using Scalar = typename Derived::Scalar;
    Eigen::JacobiSVD<Matrix<Scalar>> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    Vector<Scalar> s_inv = Vector<Scalar>::Zero(s.size());
    if (s.size() > 0 && s(0) > Scalar(0)) {
        const Scalar cutoff = rel_tol * s(0);
        for (Eigen::Index i = 0; i < s.size(); ++i)
            if (s(i) > cutoff) s_inv(i) = Scalar(1) / s(i);
    }
    return svd.matrixV() * s_inv.asDiagonal() * svd.matrixU().transpose();
}

/// Least-squares operator mapping past to future: future * pinv(past).
template <typename Scalar>
Matrix<Scalar> dmd(const SnapshotPairs<Scalar>& pairs)
{
    detail::require(pairs.past.cols() >= 1 && pairs.past.cols() == pairs.future.cols(),
                    "dmd: snapshot matrices must have matching, nonzero column counts");
    if (pairs.past.isZero(0)) throw NumericalError("dmd: degenerate data (all-zero snapshots)");
    return pairs.future * pseudo_inverse(pairs.past);
}

/// Total-least-squares DMD from the rank-M left singular subspace of [past; future].
template <typename Scalar>
Matrix<Scalar> tdmd(const SnapshotPairs<Scalar>& pairs)
{
    const Eigen::Index m = pairs.past.rows();
    detail::require(pairs.past.cols() == pairs.future.cols(), "tdmd: column count mismatch");
    detail::require(pairs.past.cols() >= m, "tdmd: need at least M snapshot pairs");
    Matrix<Scalar> stacked(2 * m, pairs.past.cols());
    stacked << pairs.past, pairs.future;
    Eigen::JacobiSVD<Matrix<Scalar>> svd(stacked, Eigen::ComputeThinU);
    const Matrix<Scalar> basis = svd.matrixU().leftCols(m);
    const Matrix<Scalar> top = basis.topRows(m);
    const Matrix<Scalar> bottom = basis.bottomRows(m);
    if (detail::condition_number(top) > Scalar(1e14))
        throw NumericalError("tdmd: ill-conditioned signal subspace");
    // A = bottom * top^{-1}, via top^T A^T = bottom^T
    return top.transpose().fullPivLu().solve(bottom.transpose()).transpose();
}

template <typename Scalar = double>
struct FbdmdFit {
    /// Real operator; the real part of `root` when near_branch_cut is set.
    Matrix<Scalar> A;
    /// Principal square root; genuinely complex only near the branch cut.
    Matrix<std::complex<Scalar>> root;
    /// Set when the forward/backward product had an eigenvalue on the negative real axis.
    bool near_branch_cut = false;
};

/// Forward-backward DMD: principal square root of A_f * A_b^{-1}.
template <typename Scalar>
FbdmdFit<Scalar> fbdmd_fit(const SnapshotPairs<Scalar>& pairs)
{
    const Matrix<Scalar> forward = dmd(pairs);
    const Matrix<Scalar> backward = dmd(SnapshotPairs<Scalar>{pairs.future, pairs.past});
    if (detail::condition_number(backward) > Scalar(1e14))
        throw NumericalError("fbdmd: ill-conditioned backward operator");
    const Matrix<Scalar> product = forward * backward.fullPivLu().inverse();

    FbdmdFit<Scalar> fit;
    const Eigen::EigenSolver<Matrix<Scalar>> es(product, false);
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const auto lambda = es.eigenvalues()(i);
        if (lambda.real() < Scalar(0) &&
            std::abs(lambda.imag()) <= Scalar(1e-10) * std::max(Scalar(1), std::abs(lambda)))
            fit.near_branch_cut = true;
    }
    using Complex = std::complex<Scalar>;
    if (fit.near_branch_cut) {
        fit.root = product.template cast<Complex>().sqrt();
        fit.A = fit.root.real();
    } else {
        fit.A = product.sqrt();
        fit.root = fit.A.template cast<Complex>();
    }
    return fit;
}

template <typename Scalar>
Matrix<Scalar> fbdmd(const SnapshotPairs<Scalar>& pairs)
{
    return fbdmd_fit(pairs).A;
}

/// One-step-ahead block reconstruction: z_1 = y_1, z_{k+1} = A z_k.
template <typename Scalar>
Matrix<Scalar> propagate_blocks(const Matrix<Scalar>& a, const embed::BlockData<Scalar>& data)
{
    Matrix<Scalar> out(data.block_length(), data.block_count());
    out.col(0) = data.blocks.col(0);
    for (Eigen::Index k = 1; k < out.cols(); ++k) out.col(k) = a * out.col(k - 1);
    return out;
}

}  // namespace kspec::baselines
