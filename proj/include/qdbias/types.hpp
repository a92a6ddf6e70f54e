#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace qdbias {

/// Binary relevance label, 0 or 1.
using Label = std::uint8_t;

/// Identity of a (query, document) pair.
struct PairKey {
    std::string query_id;
    std::string doc_id;

    auto operator<=>(const PairKey&) const = default;
    bool operator==(const PairKey&) const = default;
};

inline constexpr int kNoiseCluster = -1;

} // namespace qdbias
