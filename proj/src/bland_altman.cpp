#include "qdbias/bland_altman.hpp"

#include <cmath>
#include <map>

#include "qdbias/agreement.hpp"
#include "qdbias/corpus_io.hpp"
#include "qdbias/error.hpp"
#include "qdbias/variation.hpp"

namespace qdbias {

const char* to_string(BaCondition c) noexcept {
    switch (c) {
    case BaCondition::noise: return "noise";
    case BaCondition::non_noise: return "non_noise";
    case BaCondition::contrast: return "contrast";
    }
    return "non_noise";
}

std::vector<ConditionPartition> partition_by_noise(const JudgmentMatrix& matrix, std::span<const int> labels) {
    if (labels.size() != matrix.size()) throw RangeError("cluster labels do not cover the judgment matrix");
    std::map<std::string, ConditionPartition> by_query;
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        auto& part = by_query[matrix.pairs[i].query_id];
        part.query_id = matrix.pairs[i].query_id;
        (labels[i] == kNoiseCluster ? part.noise_pairs : part.dense_pairs).push_back(i);
    }
    std::vector<ConditionPartition> out;
    out.reserve(by_query.size());
    for (auto& [q, p] : by_query) out.push_back(std::move(p));
    return out;
}

std::optional<double> pooled_ac1(std::span<const AgreementCell> cells) {
    double weighted = 0.0;
    std::size_t total = 0;
    for (const auto& c : cells) {
        weighted += static_cast<double>(c.n) * *c.ac1.value;
        total += c.n;
    }
    if (total == 0) return std::nullopt;
    return weighted / static_cast<double>(total);
}

std::optional<double> pooled_ac1(const JudgmentMatrix& matrix, std::span<const int> labels,
                                 const std::string& query_id, const std::string& judge_id, int min_cell_size) {
    HeuristicConfig cfg;
    cfg.min_cell_size = min_cell_size;
    auto cells = per_cell_ac1(matrix, labels, judge_id, cfg);
    std::erase_if(cells, [&](const AgreementCell& c) { return c.query_id != query_id; });
    return pooled_ac1(cells);
}

BaResult ba_stats(std::span<const PairedValue> paired) {
    if (paired.size() < 2)
        throw InsufficientDataError("Bland-Altman needs at least 2 paired values, got " + std::to_string(paired.size()));
    BaResult r;
    double sum = 0.0;
    for (const auto& p : paired) {
        r.points.push_back({p.query_id, (p.a + p.b) / 2.0, p.a - p.b});
        sum += p.a - p.b;
    }
    const double n = static_cast<double>(paired.size());
    r.bias = sum / n;
    double ss = 0.0;
    for (const auto& pt : r.points) ss += (pt.diff - r.bias) * (pt.diff - r.bias);
    r.sd = std::sqrt(ss / (n - 1.0));
    r.loa_low = r.bias - kLoaMultiplier * r.sd;
    r.loa_high = r.bias + kLoaMultiplier * r.sd;
    return r;
}

BaResult ba_label_rates(const JudgmentMatrix& matrix, std::span<const int> labels, const std::string& judge_id,
                        BaCondition condition) {
    if (condition == BaCondition::contrast) throw RangeError("label-rate comparison needs the noise or non_noise condition");
    const auto& judge = matrix.judges.at(matrix.judge_index(judge_id));
    std::vector<PairedValue> paired;
    for (const auto& part : partition_by_noise(matrix, labels)) {
        const auto& idx = condition == BaCondition::noise ? part.noise_pairs : part.dense_pairs;
        if (idx.size() < 2) continue;
        double human = 0.0, llm = 0.0;
        for (auto i : idx) {
            human += matrix.human[i];
            llm += judge[i];
        }
        const double n = static_cast<double>(idx.size());
        paired.push_back({part.query_id, human / n, llm / n});
    }
    auto r = ba_stats(paired);
    r.judge_id = judge_id;
    r.condition = condition;
    return r;
}

BaResult ba_condition_contrast(const JudgmentMatrix& matrix, std::span<const int> labels, const std::string& judge_id,
                               int min_cell_size) {
    const auto& judge = matrix.judges.at(matrix.judge_index(judge_id));
    HeuristicConfig cfg;
    cfg.min_cell_size = min_cell_size;
    auto cells = per_cell_ac1(matrix, labels, judge_id, cfg);

    std::vector<PairedValue> paired;
    std::vector<Label> a, b;
    for (const auto& part : partition_by_noise(matrix, labels)) {
        if (part.noise_pairs.size() < static_cast<std::size_t>(std::max(min_cell_size, 1))) continue;
        std::vector<AgreementCell> mine;
        for (const auto& c : cells)
            if (c.query_id == part.query_id) mine.push_back(c);
        auto dense = pooled_ac1(mine);
        if (!dense) continue;
        a.clear();
        b.clear();
        for (auto i : part.noise_pairs) {
            a.push_back(matrix.human[i]);
            b.push_back(judge[i]);
        }
        paired.push_back({part.query_id, *dense, *gwet_ac1(a, b).value});
    }
    auto r = ba_stats(paired);
    r.judge_id = judge_id;
    r.condition = BaCondition::contrast;
    return r;
}

} // namespace qdbias
