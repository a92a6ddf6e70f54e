/// @file variation.hpp
/// @brief Per-(query, cluster) agreement, cluster-based agreement variation,
/// bias flags and Bias Severity Score ranking.
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qdbias/agreement.hpp"

namespace qdbias {

struct JudgmentMatrix;

enum class AggregationRule {
    at_least, ///< at least `min_judges_flagged` judges
    majority, ///< more than half of the roster
};

/// How judges without a variation record for a query enter the mean BSS.
enum class MissingJudgePolicy { zero, skip };

struct HeuristicConfig {
    double tau_abs = 0.5;
    double iqr_multiplier = 1.5;
    double flip_high = 0.8;
    double flip_low = 0.2;
    int min_judges_flagged = 2;
    AggregationRule rule = AggregationRule::at_least;
    int min_cell_size = 3;
    MissingJudgePolicy missing_judge = MissingJudgePolicy::zero;

    /// Empty when valid; otherwise one message per violated constraint.
    std::vector<std::string> problems() const;
};

struct AgreementCell {
    std::string query_id;
    int cluster_id = 0;
    std::string judge_id;
    std::size_t n = 0;
    AgreementScore ac1;
};

/// One cell per (query, cluster) holding at least `min_cell_size` of the
/// query's pairs, ordered by query then cluster. Noise cells only on request.
std::vector<AgreementCell> per_cell_ac1(const JudgmentMatrix& matrix, std::span<const int> labels,
                                        const std::string& judge_id, const HeuristicConfig& config,
                                        bool include_noise = false);

struct VariationRecord {
    std::string query_id;
    std::string judge_id;
    double delta = 0.0;
    double max_ac1 = 0.0;
    double min_ac1 = 0.0;
    std::size_t n_cells = 0;
};

/// Range of AC1 over the cells of one (query, judge); nullopt for no cells.
std::optional<VariationRecord> delta_ac1(std::span<const AgreementCell> cells);

struct Flags {
    bool absolute = false;
    bool robust = false;
    bool directional = false;

    bool any() const noexcept { return absolute || robust || directional; }
    /// Concatenated letters, e.g. "AD"; empty when no flag is set.
    std::string letters() const;
    bool operator==(const Flags&) const = default;
};

/// Quantile with linear interpolation between order statistics (h = (n-1)p).
double quantile(std::span<const double> values, double p);

struct RobustCutoff {
    double median = 0.0;
    double iqr = 0.0;
    double cutoff = 0.0;
};

RobustCutoff robust_cutoff(std::span<const double> deltas, double iqr_multiplier);

Flags flag_variation(const VariationRecord& record, const RobustCutoff& cutoff, const HeuristicConfig& config);
Flags flag_variation(const VariationRecord& record, std::span<const double> all_deltas, const HeuristicConfig& config);

/// delta, plus 1 when the directional flag is set.
double bias_severity(const VariationRecord& record, const Flags& flags);

/// Judges needed for a bias-prone verdict with a roster of `roster_size`.
std::size_t required_judges(const HeuristicConfig& config, std::size_t roster_size);

struct JudgeFinding {
    VariationRecord record;
    Flags flags;
    double bss = 0.0;
};

struct QueryVerdict {
    std::string query_id;
    bool bias_prone = false;
    std::size_t judges_flagging = 0;
    double mean_bss = 0.0;
    /// 1-based position among bias-prone queries; 0 when not bias-prone.
    std::size_t rank = 0;
    /// Indexed like the roster; empty for judges without a record.
    std::vector<std::optional<double>> per_judge_bss;
    /// Union of flags across judges.
    Flags flags;
};

/// Verdict for every query in `queries` (sorted by query id).
std::vector<QueryVerdict> aggregate_query_flags(std::span<const JudgeFinding> findings,
                                                const std::vector<std::string>& roster,
                                                const std::vector<std::string>& queries,
                                                const HeuristicConfig& config);

/// Bias-prone verdicts sorted by mean BSS descending, ties by query id; sets `rank`.
std::vector<QueryVerdict> rank_bias_prone(std::vector<QueryVerdict> verdicts);

struct BiasReport {
    std::vector<std::string> judges;
    /// Robust-rule cutoff per judge, pooled over that judge's records.
    std::vector<RobustCutoff> cutoffs;
    /// Ordered by query id, then roster order.
    std::vector<JudgeFinding> findings;
    /// Every query of the matrix, by query id.
    std::vector<QueryVerdict> queries;
    /// Bias-prone queries in rank order.
    std::vector<QueryVerdict> ranking;
};

/// Runs cells -> variation -> flags -> aggregation -> ranking for every judge of the matrix.
BiasReport analyze_bias(const JudgmentMatrix& matrix, std::span<const int> labels, const HeuristicConfig& config);

} // namespace qdbias
