#pragma once

#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace kspec {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using ComplexList = std::vector<std::complex<Scalar>>;

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (sizes, ranges).
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// Not enough samples to form the requested structure.
class InsufficientData : public Error {
public:
    using Error::Error;
};

/// Integration produced a non-finite state.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, long step) : Error(what), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

/// A linear solve or decomposition was numerically singular or failed.
class NumericalError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require(bool cond, const std::string& msg)
{
    if (!cond) throw ContractViolation(msg);
}

/// 2-norm condition number from singular values; infinity when singular.
template <typename Derived>
typename Derived::RealScalar condition_number(const Eigen::MatrixBase<Derived>& a)
{
    using Real = typename Derived::RealScalar;
    Eigen::JacobiSVD<Matrix<typename Derived::Scalar>> svd(a);
    const auto& s = svd.singularValues();
    if (s.size() == 0) return Real(0);
    const Real smin = s(s.size() - 1);
    if (!(smin > Real(0))) return std::numeric_limits<Real>::infinity();
    return s(0) / smin;
}

template <typename Derived>
Matrix<typename Derived::Scalar> symmetrized(const Eigen::MatrixBase<Derived>& a)
{
    return (a + a.transpose()) / typename Derived::Scalar(2);
}

}  // namespace detail

}  // namespace kspec
