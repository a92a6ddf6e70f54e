#include "qdbias/rng.hpp"

#include <cmath>
#include <numbers>

namespace qdbias {

namespace {
constexpr double kTwoPow53 = 9007199254740992.0;
}

double CounterRng::uniform(std::uint64_t counter) const noexcept {
    return static_cast<double>(raw(counter) >> 11) / kTwoPow53;
}

double CounterRng::uniform_open(std::uint64_t counter) const noexcept {
    return (static_cast<double>(raw(counter) >> 11) + 0.5) / kTwoPow53;
}

double CounterRng::normal(std::uint64_t counter) const noexcept {
    const double u1 = uniform_open(2 * counter);
    const double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace qdbias
