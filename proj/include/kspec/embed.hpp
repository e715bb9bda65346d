#pragma once

#include <string_view>

#include "kspec/common.hpp"

/// Non-overlapping delay blocks of a scalar observable series.
namespace kspec::embed {

enum class Observable { X1, X2 };

inline constexpr Eigen::Index coordinate(Observable g) noexcept
{
    return g == Observable::X1 ? 0 : 1;
}

std::string_view name(Observable g) noexcept;
Observable parse_observable(std::string_view text);

struct DelayConfig {
    int block_length = 4;
    Observable observable = Observable::X1;
};

/// Column k holds samples k*M .. (k+1)*M-1 of the source series.
template <typename Scalar = double>
struct BlockData {
    Matrix<Scalar> blocks;
    Scalar sample_period{1};

    Eigen::Index block_length() const noexcept { return blocks.rows(); }
    Eigen::Index block_count() const noexcept { return blocks.cols(); }
    auto block(Eigen::Index k) const { return blocks.col(k); }
};

template <typename Derived>
BlockData<typename Derived::Scalar> build_blocks(const Eigen::MatrixBase<Derived>& series,
                                                 Eigen::Index m,
                                                 typename Derived::Scalar sample_period = 1)
{
    using Scalar = typename Derived::Scalar;
    detail::require(m >= 1, "build_blocks: block length must be positive");
    const Eigen::Index n = series.size();
    if (n < 2 * m)
        throw InsufficientData("build_blocks: need at least 2*M samples, got " + std::to_string(n));
    const Eigen::Index q = n / m;
    BlockData<Scalar> out;
    out.sample_period = sample_period;
    out.blocks = Eigen::Map<const Matrix<Scalar>>(Vector<Scalar>(series.head(q * m)).data(), m, q);
    return out;
}

template <typename Scalar>
Vector<Scalar> flatten_blocks(const BlockData<Scalar>& data)
{
    return Eigen::Map<const Vector<Scalar>>(data.blocks.data(), data.blocks.size());
}

}  // namespace kspec::embed
