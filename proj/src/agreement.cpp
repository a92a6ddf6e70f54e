#include "qdbias/agreement.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "qdbias/error.hpp"

namespace qdbias {

ContingencyTable tabulate(std::span<const Label> a, std::span<const Label> b) {
    if (a.size() != b.size()) throw RangeError("label sequences differ in length");
    if (a.empty()) throw RangeError("label sequences are empty");
    ContingencyTable t;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] > 1 || b[i] > 1) throw RangeError("label outside {0,1}");
        if (a[i]) {
            b[i] ? ++t.n11 : ++t.n10;
        } else {
            b[i] ? ++t.n01 : ++t.n00;
        }
    }
    return t;
}

double observed_agreement(const ContingencyTable& t) {
    if (t.total() == 0) throw RangeError("empty contingency table");
    return static_cast<double>(t.n11 + t.n00) / static_cast<double>(t.total());
}

double observed_agreement(std::span<const Label> a, std::span<const Label> b) {
    return observed_agreement(tabulate(a, b));
}

AgreementScore gwet_ac1(const ContingencyTable& t) {
    const double n = static_cast<double>(t.total());
    if (t.total() == 0) throw RangeError("empty contingency table");
    AgreementScore s;
    s.kind = AgreementKind::ac1;
    s.n = t.total();
    s.pa = observed_agreement(t);
    const double pa1 = static_cast<double>(t.n11 + t.n10) / n;
    const double pb1 = static_cast<double>(t.n11 + t.n01) / n;
    const double pi = (pa1 + pb1) / 2.0;
    s.pe = 2.0 * pi * (1.0 - pi);
    s.value = (s.pa - s.pe) / (1.0 - s.pe);
    return s;
}

AgreementScore gwet_ac1(std::span<const Label> a, std::span<const Label> b) { return gwet_ac1(tabulate(a, b)); }

AgreementScore cohen_kappa(const ContingencyTable& t) {
    const double n = static_cast<double>(t.total());
    if (t.total() == 0) throw RangeError("empty contingency table");
    AgreementScore s;
    s.kind = AgreementKind::kappa;
    s.n = t.total();
    s.pa = observed_agreement(t);
    const std::size_t a1 = t.n11 + t.n10, b1 = t.n11 + t.n01;
    const double pa1 = static_cast<double>(a1) / n;
    const double pb1 = static_cast<double>(b1) / n;
    s.pe = pa1 * pb1 + (1.0 - pa1) * (1.0 - pb1);
    // Decided on the counts: Pe is exactly 1 only for identical degenerate marginals.
    const bool degenerate = (a1 == 0 && b1 == 0) || (a1 == t.total() && b1 == t.total());
    if (degenerate) {
        s.pe = 1.0;
    } else {
        s.value = (s.pa - s.pe) / (1.0 - s.pe);
    }
    return s;
}

AgreementScore cohen_kappa(std::span<const Label> a, std::span<const Label> b) { return cohen_kappa(tabulate(a, b)); }

double binary_entropy(double p) {
    auto term = [](double x) { return x > 0.0 ? -x * std::log2(x) : 0.0; };
    return term(p) + term(1.0 - p);
}

double label_entropy(std::span<const Label> labels) {
    if (labels.empty()) throw RangeError("entropy of an empty label sequence");
    auto ones = std::count(labels.begin(), labels.end(), Label{1});
    return binary_entropy(static_cast<double>(ones) / static_cast<double>(labels.size()));
}

const char* to_string(Majority m) noexcept {
    switch (m) {
    case Majority::relevant: return "relevant";
    case Majority::nonrelevant: return "nonrelevant";
    case Majority::tie: return "tie";
    }
    return "tie";
}

ClusterLabelDiagnostics cluster_purity(std::span<const Label> labels) {
    if (labels.empty()) throw RangeError("purity of an empty cluster");
    const auto ones = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Label{1}));
    const auto zeros = labels.size() - ones;
    ClusterLabelDiagnostics d;
    d.p_relevant = static_cast<double>(ones) / static_cast<double>(labels.size());
    d.entropy = binary_entropy(d.p_relevant);
    d.purity = std::max(d.p_relevant, 1.0 - d.p_relevant);
    d.majority = ones > zeros ? Majority::relevant : ones < zeros ? Majority::nonrelevant : Majority::tie;
    return d;
}

double purity_at_coverage(std::span<const double> purities, double coverage) {
    if (purities.empty()) throw RangeError("purity_at_coverage of an empty list");
    if (!(coverage > 0.0 && coverage <= 1.0)) throw RangeError("coverage must lie in (0,1]");
    std::vector<double> sorted(purities.begin(), purities.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const double n = static_cast<double>(sorted.size());
    // The tolerance keeps e.g. 0.8*5 from rounding up to 5.000...1 -> 6.
    auto rank = static_cast<std::size_t>(std::ceil(coverage * n - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

} // namespace qdbias
