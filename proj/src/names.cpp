#include <algorithm>
#include <cctype>
#include <string>

#include "kspec/embed.hpp"
#include "kspec/sim.hpp"

namespace {

std::string lowered(std::string_view text)
{
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

namespace kspec::sim {

std::string_view name(SystemId id) noexcept
{
    switch (id) {
    case SystemId::RealSpectrum: return "RealSpectrum";
    case SystemId::ImaginarySpectrum: return "ImaginarySpectrum";
    case SystemId::ComplexSpectrum: return "ComplexSpectrum";
    }
    return "unknown";
}

SystemId parse_system(std::string_view text)
{
    const std::string t = lowered(text);
    if (t == "realspectrum" || t == "real") return SystemId::RealSpectrum;
    if (t == "imaginaryspectrum" || t == "imaginary") return SystemId::ImaginarySpectrum;
    if (t == "complexspectrum" || t == "complex") return SystemId::ComplexSpectrum;
    throw ContractViolation("unknown system '" + std::string(text) + "'");
}

}  // namespace kspec::sim

namespace kspec::embed {

std::string_view name(Observable g) noexcept
{
    return g == Observable::X1 ? "X1" : "X2";
}

Observable parse_observable(std::string_view text)
{
    const std::string t = lowered(text);
    if (t == "x1") return Observable::X1;
    if (t == "x2") return Observable::X2;
    throw ContractViolation("unknown observable '" + std::string(text) + "'");
}

}  // namespace kspec::embed
