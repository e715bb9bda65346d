#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "kspec/common.hpp"
#include "kspec/rng.hpp"

/// Benchmark nonlinear systems, RK4 sampling and measurement noise.
namespace kspec::sim {

enum class SystemId { RealSpectrum, ImaginarySpectrum, ComplexSpectrum };

inline constexpr int dimension(SystemId) noexcept { return 2; }

std::string_view name(SystemId id) noexcept;

/// Accepts the enum spelling ("RealSpectrum") or a short alias ("real").
SystemId parse_system(std::string_view text);

/// Principal continuous-time Koopman eigenvalues of each system.
template <typename Scalar = double>
ComplexList<Scalar> true_eigenvalues(SystemId id)
{
    using C = std::complex<Scalar>;
    switch (id) {
    case SystemId::RealSpectrum: return {C(-1, 0), C(-2, 0)};
    case SystemId::ImaginarySpectrum: return {C(0, 1), C(0, -1)};
    case SystemId::ComplexSpectrum: return {C(-1, 3), C(-1, -3)};
    }
    return {};
}

/// Uniformly sampled trajectory; column k of `states` is the state at k*Ts.
template <typename Scalar = double>
struct Trajectory {
    Scalar sample_period{};
    Matrix<Scalar> states;
    Vector<Scalar> initial_condition;

    Eigen::Index size() const noexcept { return states.cols(); }
    Vector<Scalar> coordinate(Eigen::Index i) const { return states.row(i).transpose(); }
};

struct NoiseSpec {
    double variance = 0.0;
    std::uint64_t seed = 0;
};

template <typename Derived>
Vector<typename Derived::Scalar> vector_field(SystemId id, const Eigen::MatrixBase<Derived>& x)
{
    using Scalar = typename Derived::Scalar;
    detail::require(x.size() == dimension(id), "vector_field: state dimension mismatch");
    const Scalar x1 = x(0);
    const Scalar x2 = x(1);
    Vector<Scalar> f(2);
    switch (id) {
    case SystemId::RealSpectrum:
        f << -x1, x1 * x1 - x2;
        break;
    case SystemId::ImaginarySpectrum: {
        const Scalar r2 = x1 * x1 + x2 * x2;
        f << -x2 + x1 * (Scalar(1) - r2), x1 + x2 * (Scalar(1) - r2);
        break;
    }
    case SystemId::ComplexSpectrum: {
        const Scalar s = x1 * x1 + x2 * x2 + Scalar(1);
        f << Scalar(-3) * x2 - x1 * s, Scalar(3) * x1 - x2 * s;
        break;
    }
    }
    return f;
}

/// Classical RK4 with `substeps` internal steps per sample period.
template <typename Derived>
Trajectory<typename Derived::Scalar> integrate(SystemId id, const Eigen::MatrixBase<Derived>& x0,
                                               typename Derived::Scalar ts, long n_samples,
                                               int substeps = 10)
{
    using Scalar = typename Derived::Scalar;
    detail::require(x0.size() == dimension(id), "integrate: initial condition dimension mismatch");
    detail::require(ts > Scalar(0), "integrate: sample period must be positive");
    detail::require(n_samples >= 2, "integrate: need at least two samples");
    detail::require(substeps >= 1, "integrate: substeps must be >= 1");

    Trajectory<Scalar> traj;
    traj.sample_period = ts;
    traj.initial_condition = x0;
    traj.states.resize(x0.size(), n_samples);
    traj.states.col(0) = x0;

    const Scalar h = ts / Scalar(substeps);
    Vector<Scalar> x = x0;
    for (long k = 1; k < n_samples; ++k) {
        for (int s = 0; s < substeps; ++s) {
            const Vector<Scalar> k1 = vector_field(id, x);
            const Vector<Scalar> k2 = vector_field(id, x + h / 2 * k1);
            const Vector<Scalar> k3 = vector_field(id, x + h / 2 * k2);
            const Vector<Scalar> k4 = vector_field(id, x + h * k3);
            x += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        }
        if (!x.allFinite())
            throw DivergenceError("integrate: non-finite state at sample " + std::to_string(k), k);
        traj.states.col(k) = x;
    }
    return traj;
}

/// Adds i.i.d. N(0, variance) to every entry, drawn column by column.
template <typename Scalar>
Trajectory<Scalar> add_noise(const Trajectory<Scalar>& traj, const NoiseSpec& spec)
{
    detail::require(spec.variance >= 0.0, "add_noise: variance must be non-negative");
    Trajectory<Scalar> noisy = traj;
    if (spec.variance == 0.0) return noisy;
    const double sigma = std::sqrt(spec.variance);
    NormalStream normal(spec.seed);
    for (Eigen::Index k = 0; k < noisy.states.cols(); ++k)
        for (Eigen::Index i = 0; i < noisy.states.rows(); ++i)
            noisy.states(i, k) += static_cast<Scalar>(sigma * normal());
    return noisy;
}

/// Default initial condition for each system.
template <typename Scalar = double>
Vector<Scalar> default_initial_condition(SystemId id)
{
    Vector<Scalar> x0(2);
    switch (id) {
    case SystemId::RealSpectrum: x0 << 1, 0.5; break;
    case SystemId::ImaginarySpectrum: x0 << 1, 0; break;
    case SystemId::ComplexSpectrum: x0 << 1, 0; break;
    }
    return x0;
}

}  // namespace kspec::sim
