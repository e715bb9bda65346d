#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "kspec/common.hpp"

/// Discrete/continuous eigenvalue extraction and the two error metrics.
namespace kspec::spectrum {

namespace detail {

template <typename Scalar>
bool precedes(const std::complex<Scalar>& a, const std::complex<Scalar>& b)
{
    const Scalar ma = std::abs(a), mb = std::abs(b);
    const Scalar tol = Scalar(1e-12) * std::max({ma, mb, Scalar(1e-300)});
    if (std::abs(ma - mb) > tol) return ma > mb;
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() > b.imag();
}

}  // namespace detail

/// Eigenvalues sorted by descending modulus, then real part, then imaginary part.
/// Accepts real or complex matrices.
template <typename Derived>
ComplexList<typename Derived::RealScalar> discrete_eigs(const Eigen::MatrixBase<Derived>& a)
{
    using Scalar = typename Derived::Scalar;
    using Real = typename Derived::RealScalar;
    kspec::detail::require(a.rows() == a.cols(), "discrete_eigs: matrix must be square");
    kspec::detail::require(a.allFinite(), "discrete_eigs: matrix must be finite");
    ComplexList<Real> eigs;
    auto collect = [&](const auto& es) {
        if (es.info() != Eigen::Success) throw NumericalError("discrete_eigs: eigensolver failed");
        eigs.assign(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    };
    if constexpr (Eigen::NumTraits<Scalar>::IsComplex)
        collect(Eigen::ComplexEigenSolver<Matrix<Scalar>>(a, false));
    else
        collect(Eigen::EigenSolver<Matrix<Scalar>>(a, false));
    std::sort(eigs.begin(), eigs.end(), detail::precedes<Real>);
    return eigs;
}

/// Principal logarithm divided by the block period M*Ts; arg in (-pi, pi].
template <typename Scalar>
std::complex<Scalar> to_continuous(const std::complex<Scalar>& lambda, int m, Scalar ts)
{
    kspec::detail::require(m >= 1 && ts > Scalar(0), "to_continuous: M and Ts must be positive");
    if (lambda == std::complex<Scalar>(0))
        throw NumericalError("to_continuous: logarithm of a zero eigenvalue is undefined");
    Scalar phase = std::atan2(lambda.imag(), lambda.real());
    if (phase == -std::numbers::pi_v<Scalar>) phase = std::numbers::pi_v<Scalar>;
    const Scalar period = Scalar(m) * ts;
    return {std::log(std::abs(lambda)) / period, phase / period};
}

template <typename Scalar>
ComplexList<Scalar> select_dominant(const ComplexList<Scalar>& sorted, std::size_t n)
{
    kspec::detail::require(n <= sorted.size(), "select_dominant: n exceeds the number of eigenvalues");
    return {sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n)};
}

/// Relative eigenvalue error under the best one-to-one pairing (exhaustive).
template <typename Scalar>
Scalar eig_error(const ComplexList<Scalar>& approx, const ComplexList<Scalar>& truth)
{
    kspec::detail::require(!truth.empty() && approx.size() == truth.size(),
                           "eig_error: lists must be nonempty and of equal length");
    Scalar truth_norm2 = 0;
    for (const auto& t : truth) truth_norm2 += std::norm(t);
    kspec::detail::require(truth_norm2 > Scalar(0), "eig_error: reference eigenvalues are all zero");

    std::vector<std::size_t> perm(approx.size());
    std::iota(perm.begin(), perm.end(), 0);
    Scalar best = std::numeric_limits<Scalar>::infinity();
    do {
        Scalar num = 0;
        for (std::size_t i = 0; i < perm.size(); ++i) num += std::norm(approx[perm[i]] - truth[i]);
        best = std::min(best, num);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return std::sqrt(best / truth_norm2);
}

template <typename D1, typename D2>
typename D1::Scalar state_rmse(const Eigen::MatrixBase<D1>& estimate,
                               const Eigen::MatrixBase<D2>& truth)
{
    kspec::detail::require(estimate.size() >= 1 && estimate.size() == truth.size(),
                           "state_rmse: sequences must be nonempty and of equal length");
    using Scalar = typename D1::Scalar;
    return std::sqrt((estimate - truth).squaredNorm() / Scalar(estimate.size()));
}

template <typename Scalar = double>
struct SpectrumResult {
    ComplexList<Scalar> discrete;
    /// Continuous-time eigenvalues of the selected modes, aligned with `selected`.
    ComplexList<Scalar> continuous;
    std::vector<std::size_t> selected;
};

/// Eigenvalues of A, the n dominant ones mapped to continuous time.
template <typename Derived>
SpectrumResult<typename Derived::RealScalar> analyze(const Eigen::MatrixBase<Derived>& a, int m,
                                                     typename Derived::RealScalar ts, std::size_t n)
{
    SpectrumResult<typename Derived::RealScalar> out;
    out.discrete = discrete_eigs(a);
    const auto dominant = select_dominant(out.discrete, n);
    for (std::size_t i = 0; i < dominant.size(); ++i) {
        out.selected.push_back(i);
        out.continuous.push_back(to_continuous(dominant[i], m, ts));
    }
    return out;
}

}  // namespace kspec::spectrum
