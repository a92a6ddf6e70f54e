#include "qdbias/variation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "qdbias/corpus_io.hpp"
#include "qdbias/error.hpp"

namespace qdbias {

std::vector<std::string> HeuristicConfig::problems() const {
    std::vector<std::string> out;
    if (!(tau_abs > 0.0)) out.push_back("tau_abs must be > 0");
    if (!(iqr_multiplier >= 0.0)) out.push_back("iqr_multiplier must be >= 0");
    if (!(flip_low < flip_high)) out.push_back("flip_low must be < flip_high");
    if (min_judges_flagged < 1) out.push_back("min_judges_flagged must be >= 1");
    if (min_cell_size < 1) out.push_back("min_cell_size must be >= 1");
    return out;
}

std::vector<AgreementCell> per_cell_ac1(const JudgmentMatrix& matrix, std::span<const int> labels,
                                        const std::string& judge_id, const HeuristicConfig& config,
                                        bool include_noise) {
    if (labels.size() != matrix.size()) throw RangeError("cluster labels do not cover the judgment matrix");
    const auto& judge = matrix.judges.at(matrix.judge_index(judge_id));

    std::map<std::pair<std::string, int>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        if (labels[i] == kNoiseCluster && !include_noise) continue;
        groups[{matrix.pairs[i].query_id, labels[i]}].push_back(i);
    }

    std::vector<AgreementCell> cells;
    std::vector<Label> a, b;
    for (const auto& [key, idx] : groups) {
        if (idx.size() < static_cast<std::size_t>(config.min_cell_size)) continue;
        a.clear();
        b.clear();
        for (auto i : idx) {
            a.push_back(matrix.human[i]);
            b.push_back(judge[i]);
        }
        cells.push_back({key.first, key.second, judge_id, idx.size(), gwet_ac1(a, b)});
    }
    return cells;
}

std::optional<VariationRecord> delta_ac1(std::span<const AgreementCell> cells) {
    if (cells.empty()) return std::nullopt;
    VariationRecord r;
    r.query_id = cells.front().query_id;
    r.judge_id = cells.front().judge_id;
    r.max_ac1 = -std::numeric_limits<double>::infinity();
    r.min_ac1 = std::numeric_limits<double>::infinity();
    for (const auto& c : cells) {
        if (c.query_id != r.query_id || c.judge_id != r.judge_id)
            throw RangeError("delta_ac1 expects cells of a single (query, judge)");
        double v = *c.ac1.value;
        r.max_ac1 = std::max(r.max_ac1, v);
        r.min_ac1 = std::min(r.min_ac1, v);
    }
    r.n_cells = cells.size();
    r.delta = r.max_ac1 - r.min_ac1;
    return r;
}

std::string Flags::letters() const {
    std::string s;
    if (absolute) s += 'A';
    if (robust) s += 'R';
    if (directional) s += 'D';
    return s;
}

double quantile(std::span<const double> values, double p) {
    if (values.empty()) throw RangeError("quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw RangeError("quantile probability outside [0,1]");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const double h = static_cast<double>(v.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

RobustCutoff robust_cutoff(std::span<const double> deltas, double iqr_multiplier) {
    RobustCutoff c;
    if (deltas.empty()) {
        c.cutoff = std::numeric_limits<double>::infinity();
        return c;
    }
    c.median = quantile(deltas, 0.5);
    c.iqr = quantile(deltas, 0.75) - quantile(deltas, 0.25);
    c.cutoff = c.median + iqr_multiplier * c.iqr;
    return c;
}

Flags flag_variation(const VariationRecord& record, const RobustCutoff& cutoff, const HeuristicConfig& config) {
    Flags f;
    f.absolute = record.delta >= config.tau_abs;
    // A zero range is never an outlier, even when most records have zero range.
    f.robust = record.delta > 0.0 && record.delta >= cutoff.cutoff;
    f.directional = record.n_cells >= 2 && record.max_ac1 > config.flip_high && record.min_ac1 < config.flip_low;
    return f;
}

Flags flag_variation(const VariationRecord& record, std::span<const double> all_deltas, const HeuristicConfig& config) {
    return flag_variation(record, robust_cutoff(all_deltas, config.iqr_multiplier), config);
}

double bias_severity(const VariationRecord& record, const Flags& flags) {
    return record.delta + (flags.directional ? 1.0 : 0.0);
}

std::size_t required_judges(const HeuristicConfig& config, std::size_t roster_size) {
    if (config.rule == AggregationRule::majority) return roster_size / 2 + 1;
    return static_cast<std::size_t>(config.min_judges_flagged);
}

std::vector<QueryVerdict> aggregate_query_flags(std::span<const JudgeFinding> findings,
                                                const std::vector<std::string>& roster,
                                                const std::vector<std::string>& queries,
                                                const HeuristicConfig& config) {
    std::map<std::string, QueryVerdict> by_query;
    for (const auto& q : queries) {
        auto& v = by_query[q];
        v.query_id = q;
        v.per_judge_bss.assign(roster.size(), std::nullopt);
    }
    for (const auto& f : findings) {
        auto j = std::find(roster.begin(), roster.end(), f.record.judge_id);
        if (j == roster.end()) throw RangeError("finding for judge outside the roster: " + f.record.judge_id);
        auto& v = by_query[f.record.query_id];
        if (v.per_judge_bss.empty()) {
            v.query_id = f.record.query_id;
            v.per_judge_bss.assign(roster.size(), std::nullopt);
        }
        v.per_judge_bss[static_cast<std::size_t>(j - roster.begin())] = f.bss;
        if (f.flags.any()) ++v.judges_flagging;
        v.flags.absolute |= f.flags.absolute;
        v.flags.robust |= f.flags.robust;
        v.flags.directional |= f.flags.directional;
    }

    const std::size_t needed = required_judges(config, roster.size());
    std::vector<QueryVerdict> out;
    out.reserve(by_query.size());
    for (auto& [q, v] : by_query) {
        v.bias_prone = v.judges_flagging >= needed;
        double sum = 0.0;
        std::size_t present = 0;
        for (const auto& b : v.per_judge_bss)
            if (b) {
                sum += *b;
                ++present;
            }
        const std::size_t denom = config.missing_judge == MissingJudgePolicy::zero ? roster.size() : present;
        v.mean_bss = denom > 0 ? sum / static_cast<double>(denom) : 0.0;
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<QueryVerdict> rank_bias_prone(std::vector<QueryVerdict> verdicts) {
    std::erase_if(verdicts, [](const QueryVerdict& v) { return !v.bias_prone; });
    std::sort(verdicts.begin(), verdicts.end(), [](const QueryVerdict& x, const QueryVerdict& y) {
        if (x.mean_bss != y.mean_bss) return x.mean_bss > y.mean_bss;
        return x.query_id < y.query_id;
    });
    for (std::size_t i = 0; i < verdicts.size(); ++i) verdicts[i].rank = i + 1;
    return verdicts;
}

BiasReport analyze_bias(const JudgmentMatrix& matrix, std::span<const int> labels, const HeuristicConfig& config) {
    if (auto p = config.problems(); !p.empty()) throw ConfigError(p);
    BiasReport report;
    report.judges = matrix.judge_names;

    // records[j] holds judge j's variation records in query order.
    std::vector<std::vector<VariationRecord>> records(report.judges.size());
    for (std::size_t j = 0; j < report.judges.size(); ++j) {
        auto cells = per_cell_ac1(matrix, labels, report.judges[j], config);
        auto begin = cells.begin();
        while (begin != cells.end()) {
            auto end = std::find_if(begin, cells.end(), [&](const AgreementCell& c) { return c.query_id != begin->query_id; });
            if (auto r = delta_ac1(std::span<const AgreementCell>(&*begin, static_cast<std::size_t>(end - begin))))
                records[j].push_back(*r);
            begin = end;
        }
        std::vector<double> deltas;
        for (const auto& r : records[j]) deltas.push_back(r.delta);
        report.cutoffs.push_back(robust_cutoff(deltas, config.iqr_multiplier));
    }

    for (std::size_t j = 0; j < report.judges.size(); ++j)
        for (const auto& r : records[j]) {
            auto flags = flag_variation(r, report.cutoffs[j], config);
            report.findings.push_back({r, flags, bias_severity(r, flags)});
        }
    std::stable_sort(report.findings.begin(), report.findings.end(), [](const JudgeFinding& x, const JudgeFinding& y) {
        return x.record.query_id < y.record.query_id;
    });

    std::set<std::string> queries;
    for (const auto& p : matrix.pairs) queries.insert(p.query_id);
    report.queries = aggregate_query_flags(report.findings, report.judges,
                                           std::vector<std::string>(queries.begin(), queries.end()), config);
    report.ranking = rank_bias_prone(report.queries);
    for (const auto& ranked : report.ranking)
        for (auto& v : report.queries)
            if (v.query_id == ranked.query_id) v.rank = ranked.rank;
    return report;
}

} // namespace qdbias
