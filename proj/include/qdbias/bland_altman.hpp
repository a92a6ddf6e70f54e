/// @file bland_altman.hpp
/// @brief Noise vs. dense-cluster conditions and Bland-Altman bias / limits of agreement.
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qdbias {

struct JudgmentMatrix;
struct AgreementCell;

struct ConditionPartition {
    std::string query_id;
    std::vector<std::size_t> noise_pairs;
    std::vector<std::size_t> dense_pairs;
};

/// One partition per query, in query id order.
std::vector<ConditionPartition> partition_by_noise(const JudgmentMatrix& matrix, std::span<const int> labels);

/// Size-weighted mean of cell AC1 values; nullopt for no cells.
std::optional<double> pooled_ac1(std::span<const AgreementCell> cells);

/// Pooled AC1 of one query over its non-noise clusters with >= min_cell_size pairs.
std::optional<double> pooled_ac1(const JudgmentMatrix& matrix, std::span<const int> labels,
                                 const std::string& query_id, const std::string& judge_id, int min_cell_size);

enum class BaCondition { noise, non_noise, contrast };

const char* to_string(BaCondition c) noexcept;

struct PairedValue {
    std::string query_id;
    double a = 0.0;
    double b = 0.0;
};

struct BaPoint {
    std::string query_id;
    double mean = 0.0;
    double diff = 0.0; ///< a - b
};

inline constexpr double kLoaMultiplier = 1.96;

struct BaResult {
    std::string judge_id;
    BaCondition condition = BaCondition::non_noise;
    std::vector<BaPoint> points;
    double bias = 0.0;
    double sd = 0.0; ///< sample standard deviation (n-1)
    double loa_low = 0.0;
    double loa_high = 0.0;
};

/// Bias, sd and limits of agreement of a - b. Points keep input order.
/// Throws InsufficientDataError for fewer than 2 pairs.
BaResult ba_stats(std::span<const PairedValue> paired);

/// Per query, human vs. judge relevant rate over the condition's pairs; queries
/// with fewer than 2 pairs in the condition are skipped.
BaResult ba_label_rates(const JudgmentMatrix& matrix, std::span<const int> labels, const std::string& judge_id,
                        BaCondition condition);

/// Per query, pooled non-noise AC1 (a) against noise-condition AC1 (b). Both
/// sides need at least `min_cell_size` pairs.
BaResult ba_condition_contrast(const JudgmentMatrix& matrix, std::span<const int> labels, const std::string& judge_id,
                               int min_cell_size);

} // namespace qdbias
