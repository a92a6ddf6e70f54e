/// @file agreement.hpp
/// @brief Two-rater binary agreement coefficients and cluster label diagnostics.
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "qdbias/types.hpp"

namespace qdbias {

/// Counts of a 2x2 agreement table; first index is rater a, second rater b.
struct ContingencyTable {
    std::size_t n11 = 0;
    std::size_t n10 = 0;
    std::size_t n01 = 0;
    std::size_t n00 = 0;

    std::size_t total() const noexcept { return n11 + n10 + n01 + n00; }
};

/// Equal-length label sequences of two raters. Throws RangeError on length
/// mismatch, empty input, or a label outside {0,1}.
ContingencyTable tabulate(std::span<const Label> a, std::span<const Label> b);

enum class AgreementKind { ac1, kappa };

struct AgreementScore {
    /// Empty when the coefficient is undefined (kappa with Pe = 1).
    std::optional<double> value;
    double pa = 0.0;
    double pe = 0.0;
    std::size_t n = 0;
    AgreementKind kind = AgreementKind::ac1;

    bool defined() const noexcept { return value.has_value(); }
};

double observed_agreement(const ContingencyTable& t);
double observed_agreement(std::span<const Label> a, std::span<const Label> b);

/// Gwet's AC1. Pe = 2*pi*(1-pi) with pi the mean of the two raters' positive
/// rates, so Pe <= 0.5 and the value is always defined.
AgreementScore gwet_ac1(const ContingencyTable& t);
AgreementScore gwet_ac1(std::span<const Label> a, std::span<const Label> b);

/// Cohen's kappa. Pe = pa1*pb1 + pa0*pb0; undefined iff Pe = 1, which for
/// binary labels means both raters used one and the same label throughout.
AgreementScore cohen_kappa(const ContingencyTable& t);
AgreementScore cohen_kappa(std::span<const Label> a, std::span<const Label> b);

/// Binary Shannon entropy in bits of the fraction of 1s.
double label_entropy(std::span<const Label> labels);
double binary_entropy(double p);

enum class Majority { relevant, nonrelevant, tie };

const char* to_string(Majority m) noexcept;

struct ClusterLabelDiagnostics {
    double p_relevant = 0.0;
    double entropy = 0.0;
    double purity = 0.0;
    Majority majority = Majority::tie;
};

ClusterLabelDiagnostics cluster_purity(std::span<const Label> labels);

/// Largest observed purity reached by at least `coverage` of the clusters:
/// the ceil(coverage*n)-th value in descending order.
double purity_at_coverage(std::span<const double> purities, double coverage = 0.8);

} // namespace qdbias
