#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace kspec {

/// Seeded standard-normal stream.
///
/// std::mt19937_64 is fully specified by the standard, so its raw output is
/// identical across toolchains. The library distributions are not, so the
/// uniform-to-normal mapping is done here: 53-bit uniforms and the
/// trigonometric Box-Muller transform, consuming two uniforms per pair.
class NormalStream {
public:
    static constexpr std::string_view algorithm =
        "mt19937_64 + 53-bit uniforms + Box-Muller (cos/sin pair)";

    explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

    double operator()()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] so the log is finite.
        const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Per-trial seed: mix64(mix64(mix64(base) ^ variance_index) ^ trial_index).
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t variance_index,
                                    std::uint64_t trial_index) noexcept
{
    return mix64(mix64(mix64(base) ^ variance_index) ^ trial_index);
}

}  // namespace kspec
