/// @file pipeline.hpp
/// @brief End-to-end analysis: ingest, embedding lookup, clustering, agreement,
/// variation heuristics, Bland-Altman and report writing.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "qdbias/bland_altman.hpp"
#include "qdbias/corpus_io.hpp"
#include "qdbias/hdbscan.hpp"
#include "qdbias/reports.hpp"
#include "qdbias/variation.hpp"

namespace qdbias {

inline constexpr const char* kVersion = "qdbias 1.0.0";

enum class EmbeddingFormat { qdv, tsv };

struct JudgeSource {
    std::string name;
    std::string path;
};

struct RunConfig {
    std::string human_qrels_path;
    std::vector<JudgeSource> judges;
    std::string embeddings_path;
    EmbeddingFormat embeddings_format = EmbeddingFormat::qdv;
    HdbscanParams hdbscan;
    HeuristicConfig heuristics;
    int binarization_threshold = kDefaultRelevanceThreshold;
    std::string output_dir;
    bool write_tsv = true;
    bool write_json = false;
    double purity_coverage = 0.8;
    /// Fraction of aligned pairs that must have an embedding.
    double min_embedding_coverage = 0.99;
    bool normalize_embeddings = true;
    unsigned workers = 1;
};

/// Parses a JSON config; relative paths resolve against `base_dir`.
/// Throws ConfigError with every field problem found.
RunConfig config_from_json(const std::string& text, const std::string& base_dir);
RunConfig load_config(const std::string& path);
std::string config_to_json(const RunConfig& config);

struct ValidationResult {
    RunConfig config;
    std::vector<std::string> errors;
    std::vector<std::string> warnings;

    bool ok() const noexcept { return errors.empty(); }
};

/// Collects every structural problem in one pass.
ValidationResult validate_config(const RunConfig& config);

struct InputDigest {
    std::string role;
    std::string path;
    std::string sha256;
};

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct WarningCounters {
    std::size_t duplicate_qrels = 0;
    std::size_t dropped_pairs = 0;
    std::size_t missing_embeddings = 0;
    std::size_t undefined_kappa = 0;
    std::size_t skipped_bland_altman = 0;
};

struct RunManifest {
    std::string config_json;
    std::vector<InputDigest> inputs;
    std::string version = kVersion;
    std::vector<StageTiming> timings;
    WarningCounters counters;
    std::vector<std::string> messages;
    std::vector<std::string> reports;
};

std::string manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const std::string& text);

/// Inputs whose current digest differs from the manifest's (or that vanished).
std::vector<std::string> verify_manifest(const RunManifest& manifest);

/// Everything computed by one run, before anything is written.
struct AnalysisResult {
    CorpusStats stats;
    JudgmentMatrix matrix;
    ClusterAssignment clusters;
    std::vector<ClusterDiagnosticsRow> diagnostics;
    std::vector<PuritySummaryRow> purity;
    BiasReport bias;
    std::vector<BaResult> bland_altman;
};

/// Runs the analysis and writes the report tree into config.output_dir.
/// Reports are staged and moved into place only when every stage succeeds.
/// Throws ConfigError for an invalid config and StageError for stage failures.
RunManifest run_pipeline(const RunConfig& config);

/// The computational part of run_pipeline, without file output.
AnalysisResult analyze(const RunConfig& config, RunManifest& manifest);

} // namespace qdbias
