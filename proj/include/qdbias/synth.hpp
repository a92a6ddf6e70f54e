/// @file synth.hpp
/// @brief Synthetic corpora with planted clusters and simulated LLM judges.
///
/// Points are Gaussian blobs around mutually separated centers. Human labels
/// are Bernoulli per cluster; each judge copies the human label and flips it
/// independently per pair: 0->1 with rate flip01 (over-inclusion) and 1->0
/// with rate flip10 (under-recall). Independence makes the expected AC1 of a
/// cell available in closed form.
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qdbias/corpus_io.hpp"
#include "qdbias/embedding_store.hpp"

namespace qdbias {

struct ErrorRates {
    double flip01 = 0.0;
    double flip10 = 0.0;
};

struct CellOverride {
    std::size_t query = 0;
    int cluster = 0;
    ErrorRates rates;
};

struct JudgeProfile {
    std::string name;
    ErrorRates base;
    std::map<int, ErrorRates> per_cluster;
    std::vector<CellOverride> cells;

    /// Most specific rates for a (query, cluster) cell; cluster -1 is background noise.
    ErrorRates rates_for(std::size_t query, int cluster) const;
};

/// Explicit placement of one query's pairs.
struct QueryLayout {
    std::vector<int> clusters;
    std::size_t pairs_per_cell = 0;
};

struct ScenarioSpec {
    std::size_t n_clusters = 3;
    std::size_t dim = 16;
    /// Used when `query_layout` is empty: each cluster's points are shared
    /// evenly among the queries assigned to it.
    std::size_t points_per_cluster = 100;
    double cluster_spread = 0.05;
    double center_separation = 1.0;
    std::size_t noise_points = 0;
    std::size_t n_queries = 10;
    std::size_t clusters_per_query = 1;
    std::vector<QueryLayout> query_layout;
    /// One rate per cluster, or a single rate for all.
    std::vector<double> human_relevant_rate{0.3};
    double noise_relevant_rate = 0.3;
    std::vector<JudgeProfile> judges;
    std::uint64_t seed = 0;

    std::size_t query_count() const noexcept { return query_layout.empty() ? n_queries : query_layout.size(); }
    double human_rate(int cluster) const;
    bool well_separated() const noexcept { return center_separation > 6.0 * cluster_spread; }
    /// Throws SpecError listing every violated constraint.
    void validate() const;
};

struct ExpectedCell {
    std::string query_id;
    int cluster = 0;
    std::string judge_id;
    double ac1 = 0.0;
};

struct SyntheticCorpus {
    EmbeddingSet embeddings{1};
    /// Aligned human + judge labels, sorted by (query_id, doc_id).
    JudgmentMatrix matrix;
    /// Planted cluster per matrix pair, -1 for background noise.
    std::vector<int> true_cluster;
    std::vector<ExpectedCell> expected_cell_ac1;
    std::vector<GradedJudgment> human_qrels;
    std::vector<NamedJudgments> judge_qrels;
};

/// Expected AC1 between a human with relevant rate p and a judge flipping
/// 0->1 at rate flip01 and 1->0 at rate flip10.
double expected_ac1(double p, double flip01, double flip10);

std::string query_name(std::size_t index, std::size_t n_queries);

/// Deterministic in the scenario (including its seed). Throws SpecError when infeasible.
SyntheticCorpus generate(const ScenarioSpec& spec);

/// 20 queries and 4 judges. Query 0 spans clusters 0 and 1; judges 0 and 1
/// copy the human exactly in cluster 0 and answer at random in cluster 1.
ScenarioSpec planted_bias_spec(std::uint64_t seed);
SyntheticCorpus planted_bias_scenario(std::uint64_t seed);

/// JSON scenario files. `{"preset": "planted_bias", "seed": N}` selects the planted scenario.
ScenarioSpec scenario_from_json(const std::string& text);
std::string scenario_to_json(const ScenarioSpec& spec);

/// Writes human.qrels, judge_<name>.qrels, embeddings.qdv, truth.tsv,
/// expected_ac1.tsv and a ready-to-run config.json into `dir`.
void write_corpus(const SyntheticCorpus& corpus, const std::string& dir);

} // namespace qdbias
