/// @file reports.hpp
/// @brief Tab-separated report and plot-data writers.
///
/// Reals are printed with 6 decimals; undefined coefficients print as NA.
#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qdbias/agreement.hpp"
#include "qdbias/bland_altman.hpp"
#include "qdbias/corpus_io.hpp"
#include "qdbias/hdbscan.hpp"
#include "qdbias/variation.hpp"

namespace qdbias {

std::string format_real(double value);
std::string format_real(const std::optional<double>& value);

struct ClusterDiagnosticsRow {
    int cluster_id = 0;
    std::size_t size = 0;
    ClusterLabelDiagnostics labels;
    /// Indexed by judge.
    std::vector<AgreementScore> ac1;
    std::vector<AgreementScore> kappa;
};

/// One row per non-noise cluster.
std::vector<ClusterDiagnosticsRow> cluster_diagnostics(const JudgmentMatrix& matrix, const ClusterAssignment& clusters);

struct PuritySummaryRow {
    std::string group; ///< "relevant", "nonrelevant" or "all"
    std::size_t n_clusters = 0;
    double coverage = 0.8;
    std::optional<double> purity;
};

/// Purity at coverage over relevant-majority, nonrelevant-majority and all clusters.
std::vector<PuritySummaryRow> purity_summary(const std::vector<ClusterDiagnosticsRow>& rows, double coverage);

void write_corpus_stats_tsv(std::ostream& out, const CorpusStats& stats);
void write_cluster_assignments_tsv(std::ostream& out, const JudgmentMatrix& matrix, const ClusterAssignment& clusters);
void write_cluster_diagnostics_tsv(std::ostream& out, const std::vector<std::string>& judges,
                                   const std::vector<ClusterDiagnosticsRow>& rows);
void write_purity_summary_tsv(std::ostream& out, const std::vector<PuritySummaryRow>& rows);
void write_variation_tsv(std::ostream& out, const BiasReport& report);
void write_ranking_tsv(std::ostream& out, const BiasReport& report);
void write_ba_points_tsv(std::ostream& out, const std::vector<BaResult>& results);
void write_ba_summary_tsv(std::ostream& out, const std::vector<BaResult>& results);

/// Plot data: kappa-vs-AC1 per cluster for one judge.
void write_kappa_ac1_scatter_tsv(std::ostream& out, const std::vector<ClusterDiagnosticsRow>& rows, std::size_t judge);
/// Plot data: Bland-Altman points and summary lines in one table.
void write_ba_plot_tsv(std::ostream& out, const std::vector<BaResult>& results);
/// Plot data: per-query delta AC1 per judge.
void write_delta_bars_tsv(std::ostream& out, const BiasReport& report);
/// Plot data: the top `limit` bias-prone queries with per-judge delta and flags.
void write_top_bias_tsv(std::ostream& out, const BiasReport& report, std::size_t limit = 10);

} // namespace qdbias
