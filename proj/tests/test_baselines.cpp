#include <doctest.h>

#include "kspec/baselines.hpp"
#include "kspec/rng.hpp"
#include "kspec/sim.hpp"
#include "kspec/spectrum.hpp"
#include "support.hpp"

using namespace kspec;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

/// Noise-free blocks of z_{k+1} = A z_k.
embed::BlockData<double> linear_blocks(const MatrixXd& a, const VectorXd& z0, Eigen::Index q)
{
    MatrixXd z(a.rows(), q);
    z.col(0) = z0;
    for (Eigen::Index k = 1; k < q; ++k) z.col(k) = a * z.col(k - 1);
    return {z, 1.0};
}

MatrixXd rotation(double radius, double theta)
{
    MatrixXd r(2, 2);
    r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    return radius * r;
}

}  // namespace

TEST_CASE("make_pairs shifts by one block")
{
    const MatrixXd y = MatrixXd::Random(3, 5);
    const auto p = baselines::make_pairs(embed::BlockData<double>{y, 1.0});
    CHECK(p.past == y.leftCols(4));
    CHECK(p.future == y.rightCols(4));
    CHECK_THROWS_AS(baselines::make_pairs(embed::BlockData<double>{MatrixXd::Ones(3, 1), 1.0}), ContractViolation);
}

TEST_CASE("pseudo_inverse agrees with an orthogonal-decomposition oracle")
{
    NormalStream rng(4);
    for (int rep = 0; rep < 10; ++rep) {
        MatrixXd x = testing::random_matrix(rng, 4, 9);
        if (rep % 2) x.row(3) = x.row(0) + x.row(1);  // rank deficient
        const MatrixXd oracle = x.completeOrthogonalDecomposition().pseudoInverse();
        CHECK((baselines::pseudo_inverse(x) - oracle).norm() < 1e-10);
    }
}

TEST_CASE("dmd: full-rank data equals normal-equation least squares")
{
    NormalStream rng(5);
    const MatrixXd past = testing::random_matrix(rng, 3, 12);
    const MatrixXd future = testing::random_matrix(rng, 3, 12);
    const MatrixXd a = baselines::dmd(baselines::SnapshotPairs<double>{past, future});
    const MatrixXd oracle = future * past.transpose() * (past * past.transpose()).inverse();
    CHECK((a - oracle).norm() < 1e-10);

    // residual is minimal: no perturbation lowers it
    const double base = (future - a * past).norm();
    for (int i = 0; i < 20; ++i) {
        const MatrixXd d = 1e-3 * testing::random_matrix(rng, 3, 3);
        CHECK((future - (a + d) * past).norm() >= base);
    }
}

TEST_CASE("dmd: degenerate data")
{
    CHECK_THROWS_AS(baselines::dmd(baselines::SnapshotPairs<double>{MatrixXd::Zero(2, 4), MatrixXd::Ones(2, 4)}),
                    NumericalError);
    CHECK_THROWS_AS(baselines::dmd(baselines::SnapshotPairs<double>{MatrixXd::Ones(2, 4), MatrixXd::Ones(2, 3)}),
                    ContractViolation);
}

TEST_CASE("tdmd: scalar total-least-squares slope")
{
    NormalStream rng(6);
    for (int rep = 0; rep < 10; ++rep) {
        const MatrixXd x = testing::random_matrix(rng, 1, 15);
        const MatrixXd y = 0.7 * x + 0.3 * testing::random_matrix(rng, 1, 15);
        const double sxx = x.squaredNorm(), syy = y.squaredNorm(), sxy = (x.array() * y.array()).sum();
        const double slope = (syy - sxx + std::sqrt((syy - sxx) * (syy - sxx) + 4 * sxy * sxy)) / (2 * sxy);
        const MatrixXd a = baselines::tdmd(baselines::SnapshotPairs<double>{x, y});
        CHECK(a(0, 0) == doctest::Approx(slope).epsilon(1e-10));
    }
}

TEST_CASE("tdmd: argument checks")
{
    CHECK_THROWS_AS(baselines::tdmd(baselines::SnapshotPairs<double>{MatrixXd::Ones(4, 3), MatrixXd::Ones(4, 3)}),
                    ContractViolation);
}

TEST_CASE("all three estimators recover a linear generator from noise-free data")
{
    NormalStream rng(8);
    for (int rep = 0; rep < 5; ++rep) {
        const MatrixXd a = testing::random_stable(rng, 3, 0.9);
        const auto data = linear_blocks(a, testing::random_matrix(rng, 3, 1), 12);
        const auto pairs = baselines::make_pairs(data);
        CHECK((baselines::dmd(pairs) - a).norm() < 1e-8);
        CHECK((baselines::tdmd(pairs) - a).norm() < 1e-8);
        const auto fb = baselines::fbdmd_fit(pairs);
        // the principal root picks the branch with eigenvalues in the right half plane
        const auto ev = spectrum::discrete_eigs(a);
        bool right_half = true;
        for (const auto& l : ev) right_half = right_half && l.real() > 0;
        if (right_half) CHECK((fb.A - a).norm() < 1e-6);
        CHECK((fb.A * fb.A - a * a).norm() < 1e-6);
    }
}

TEST_CASE("fbdmd on a decaying rotation")
{
    const MatrixXd a = rotation(0.9, 0.4);
    const auto fit = baselines::fbdmd_fit(baselines::make_pairs(linear_blocks(a, VectorXd::Ones(2), 10)));
    CHECK_FALSE(fit.near_branch_cut);
    CHECK((fit.A - a).norm() < 1e-8);
}

TEST_CASE("fbdmd near the branch cut returns the complex principal root")
{
    // a noisy ComplexSpectrum series whose A_f A_b^-1 has only negative real eigenvalues
    const auto id = sim::SystemId::ComplexSpectrum;
    const auto clean = sim::integrate(id, sim::default_initial_condition(id), 0.1, 200);
    const auto noisy = sim::add_noise(clean, {0.01, derive_seed(0, 2, 16)});
    const auto pairs = baselines::make_pairs(embed::build_blocks(VectorXd(noisy.coordinate(0)), 4, 0.1));
    const MatrixXd forward = baselines::dmd(pairs);
    const MatrixXd backward = baselines::dmd(baselines::SnapshotPairs<double>{pairs.future, pairs.past});
    const MatrixXd product = forward * backward.inverse();

    const auto fit = baselines::fbdmd_fit(pairs);
    REQUIRE(fit.near_branch_cut);
    CHECK((fit.root * fit.root - product.cast<std::complex<double>>()).norm() < 1e-8 * product.norm());
    CHECK(fit.A == fit.root.real());
    for (const auto& l : spectrum::discrete_eigs(fit.root)) {
        CHECK(std::abs(l) > 0);
        CHECK(l.real() >= -1e-12);
    }
}

TEST_CASE("noise bias: TLS and forward-backward correct the DMD shrinkage")
{
    const MatrixXd a = rotation(0.95, 0.3);
    const auto clean = linear_blocks(a, VectorXd::Ones(2), 60);
    NormalStream rng(9);
    double bias_dmd = 0, bias_tdmd = 0, bias_fb = 0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
        embed::BlockData<double> noisy = clean;
        noisy.blocks += 0.05 * testing::random_matrix(rng, 2, 60);
        const auto pairs = baselines::make_pairs(noisy);
        auto radius = [](const MatrixXd& m) { return std::abs(spectrum::discrete_eigs(m)[0]); };
        bias_dmd += (radius(baselines::dmd(pairs)) - 0.95) / trials;
        bias_tdmd += (radius(baselines::tdmd(pairs)) - 0.95) / trials;
        bias_fb += (radius(baselines::fbdmd(pairs)) - 0.95) / trials;
    }
    CHECK(bias_dmd < 0);
    CHECK(std::abs(bias_tdmd) < std::abs(bias_dmd));
    CHECK(std::abs(bias_fb) < std::abs(bias_dmd));
}

TEST_CASE("propagate_blocks")
{
    MatrixXd y(2, 3);
    y << 1, 9, 9, 2, 9, 9;
    const MatrixXd a = Eigen::Vector2d(0.5, 2.0).asDiagonal();
    const MatrixXd z = baselines::propagate_blocks(a, embed::BlockData<double>{y, 1.0});
    MatrixXd expected(2, 3);
    expected << 1, 0.5, 0.25, 2, 4, 8;
    CHECK(z == expected);
}
