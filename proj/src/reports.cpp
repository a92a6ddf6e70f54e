#include "qdbias/reports.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

namespace qdbias {

std::string format_real(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", value);
    // Avoid "-0.000000" so equal reports never differ by the sign of zero.
    if (std::string_view(buf) == "-0.000000") return "0.000000";
    return buf;
}

std::string format_real(const std::optional<double>& value) { return value ? format_real(*value) : "NA"; }

namespace {

std::string format_pct(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", value);
    return buf;
}

std::string flag_field(const Flags& f) {
    auto s = f.letters();
    return s.empty() ? "-" : s;
}

} // namespace

std::vector<ClusterDiagnosticsRow> cluster_diagnostics(const JudgmentMatrix& matrix, const ClusterAssignment& clusters) {
    std::vector<ClusterDiagnosticsRow> rows;
    std::vector<Label> human, judge;
    for (std::size_t c = 0; c < clusters.n_clusters; ++c) {
        const auto& members = clusters.membership[c];
        ClusterDiagnosticsRow row;
        row.cluster_id = static_cast<int>(c);
        row.size = members.size();
        human.clear();
        for (auto i : members) human.push_back(matrix.human[i]);
        row.labels = cluster_purity(human);
        for (const auto& labels : matrix.judges) {
            judge.clear();
            for (auto i : members) judge.push_back(labels[i]);
            auto t = tabulate(human, judge);
            row.ac1.push_back(gwet_ac1(t));
            row.kappa.push_back(cohen_kappa(t));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<PuritySummaryRow> purity_summary(const std::vector<ClusterDiagnosticsRow>& rows, double coverage) {
    std::vector<PuritySummaryRow> out;
    auto summarize = [&](const std::string& group, auto keep) {
        std::vector<double> purities;
        for (const auto& r : rows)
            if (keep(r)) purities.push_back(r.labels.purity);
        PuritySummaryRow s{group, purities.size(), coverage, std::nullopt};
        if (!purities.empty()) s.purity = purity_at_coverage(purities, coverage);
        out.push_back(s);
    };
    summarize("relevant", [](const ClusterDiagnosticsRow& r) { return r.labels.majority == Majority::relevant; });
    summarize("nonrelevant", [](const ClusterDiagnosticsRow& r) { return r.labels.majority == Majority::nonrelevant; });
    summarize("all", [](const ClusterDiagnosticsRow&) { return true; });
    return out;
}

void write_corpus_stats_tsv(std::ostream& out, const CorpusStats& s) {
    out << "n_queries\tn_documents\tn_judgments\tpct_relevant\tpct_nonrelevant\n"
        << s.n_queries << '\t' << s.n_documents << '\t' << s.n_judgments << '\t' << format_pct(s.pct_relevant) << '\t'
        << format_pct(s.pct_nonrelevant) << '\n';
}

void write_cluster_assignments_tsv(std::ostream& out, const JudgmentMatrix& matrix, const ClusterAssignment& clusters) {
    out << "query_id\tdoc_id\tcluster_id\tstability\n";
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        const int c = clusters.labels[i];
        out << matrix.pairs[i].query_id << '\t' << matrix.pairs[i].doc_id << '\t' << c << '\t'
            << (c == kNoiseCluster ? std::string("NA") : format_real(clusters.stability[static_cast<std::size_t>(c)]))
            << '\n';
    }
}

void write_cluster_diagnostics_tsv(std::ostream& out, const std::vector<std::string>& judges,
                                   const std::vector<ClusterDiagnosticsRow>& rows) {
    out << "cluster_id\tsize\tp_relevant\tentropy\tpurity\tmajority";
    for (const auto& j : judges) out << "\tac1_" << j << "\tkappa_" << j;
    out << '\n';
    for (const auto& r : rows) {
        out << r.cluster_id << '\t' << r.size << '\t' << format_real(r.labels.p_relevant) << '\t'
            << format_real(r.labels.entropy) << '\t' << format_real(r.labels.purity) << '\t' << to_string(r.labels.majority);
        for (std::size_t j = 0; j < judges.size(); ++j)
            out << '\t' << format_real(r.ac1[j].value) << '\t' << format_real(r.kappa[j].value);
        out << '\n';
    }
}

void write_purity_summary_tsv(std::ostream& out, const std::vector<PuritySummaryRow>& rows) {
    out << "group\tn_clusters\tcoverage\tpurity_at_coverage\n";
    for (const auto& r : rows)
        out << r.group << '\t' << r.n_clusters << '\t' << format_real(r.coverage) << '\t' << format_real(r.purity) << '\n';
}

void write_variation_tsv(std::ostream& out, const BiasReport& report) {
    out << "query_id\tjudge_id\tn_cells\tmin_ac1\tmax_ac1\tdelta\tflags\tbss\n";
    for (const auto& f : report.findings) {
        const auto& r = f.record;
        out << r.query_id << '\t' << r.judge_id << '\t' << r.n_cells << '\t' << format_real(r.min_ac1) << '\t'
            << format_real(r.max_ac1) << '\t' << format_real(r.delta) << '\t' << flag_field(f.flags) << '\t'
            << format_real(f.bss) << '\n';
    }
}

void write_ranking_tsv(std::ostream& out, const BiasReport& report) {
    out << "rank\tquery_id\tmean_bss\tjudges_flagging";
    for (const auto& j : report.judges) out << "\tbss_" << j;
    out << '\n';
    for (const auto& v : report.ranking) {
        out << v.rank << '\t' << v.query_id << '\t' << format_real(v.mean_bss) << '\t' << v.judges_flagging;
        for (const auto& b : v.per_judge_bss) out << '\t' << format_real(b);
        out << '\n';
    }
}

void write_ba_points_tsv(std::ostream& out, const std::vector<BaResult>& results) {
    out << "judge_id\tcondition\tquery_id\tmean\tdiff\n";
    for (const auto& r : results)
        for (const auto& p : r.points)
            out << r.judge_id << '\t' << to_string(r.condition) << '\t' << p.query_id << '\t' << format_real(p.mean)
                << '\t' << format_real(p.diff) << '\n';
}

void write_ba_summary_tsv(std::ostream& out, const std::vector<BaResult>& results) {
    out << "judge_id\tcondition\tbias\tsd\tloa_low\tloa_high\n";
    for (const auto& r : results)
        out << r.judge_id << '\t' << to_string(r.condition) << '\t' << format_real(r.bias) << '\t' << format_real(r.sd)
            << '\t' << format_real(r.loa_low) << '\t' << format_real(r.loa_high) << '\n';
}

void write_kappa_ac1_scatter_tsv(std::ostream& out, const std::vector<ClusterDiagnosticsRow>& rows, std::size_t judge) {
    out << "cluster_id\tkappa\tac1\tentropy\tsize\n";
    for (const auto& r : rows)
        out << r.cluster_id << '\t' << format_real(r.kappa.at(judge).value) << '\t' << format_real(r.ac1.at(judge).value)
            << '\t' << format_real(r.labels.entropy) << '\t' << r.size << '\n';
}

void write_ba_plot_tsv(std::ostream& out, const std::vector<BaResult>& results) {
    out << "judge_id\tcondition\tquery_id\tmean\tdiff\tbias\tloa_low\tloa_high\n";
    for (const auto& r : results)
        for (const auto& p : r.points)
            out << r.judge_id << '\t' << to_string(r.condition) << '\t' << p.query_id << '\t' << format_real(p.mean)
                << '\t' << format_real(p.diff) << '\t' << format_real(r.bias) << '\t' << format_real(r.loa_low) << '\t'
                << format_real(r.loa_high) << '\n';
}

void write_delta_bars_tsv(std::ostream& out, const BiasReport& report) {
    out << "judge_id\tquery_id\tdelta\tn_cells\n";
    for (const auto& judge : report.judges)
        for (const auto& f : report.findings)
            if (f.record.judge_id == judge)
                out << judge << '\t' << f.record.query_id << '\t' << format_real(f.record.delta) << '\t' << f.record.n_cells
                    << '\n';
}

void write_top_bias_tsv(std::ostream& out, const BiasReport& report, std::size_t limit) {
    out << "rank\tquery_id\tmean_bss\tflags";
    for (const auto& j : report.judges) out << "\tdelta_" << j << "\tflags_" << j;
    out << '\n';
    const std::size_t n = std::min(limit, report.ranking.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto& v = report.ranking[i];
        out << v.rank << '\t' << v.query_id << '\t' << format_real(v.mean_bss) << '\t' << flag_field(v.flags);
        for (const auto& judge : report.judges) {
            const JudgeFinding* hit = nullptr;
            for (const auto& f : report.findings)
                if (f.record.query_id == v.query_id && f.record.judge_id == judge) hit = &f;
            if (hit)
                out << '\t' << format_real(hit->record.delta) << '\t' << flag_field(hit->flags);
            else
                out << "\tNA\t-";
        }
        out << '\n';
    }
}

} // namespace qdbias
