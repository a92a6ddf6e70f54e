#include "qdbias/pipeline.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>

#include "json.hpp"
#include "qdbias/digest.hpp"
#include "qdbias/embedding_store.hpp"
#include "qdbias/error.hpp"

namespace qdbias {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <class F>
auto run_stage(RunManifest& manifest, const std::string& stage, F&& body) {
    const auto start = std::chrono::steady_clock::now();
    auto record = [&] {
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
        manifest.timings.push_back({stage, dt.count()});
    };
    try {
        if constexpr (std::is_void_v<std::invoke_result_t<F>>) {
            body();
            record();
        } else {
            auto out = body();
            record();
            return out;
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

// Removes the pairs listed in `drop`, preserving order.
JudgmentMatrix restrict_matrix(const JudgmentMatrix& m, const std::set<PairKey>& drop) {
    JudgmentMatrix out;
    out.judge_names = m.judge_names;
    out.judges.resize(m.judges.size());
    out.dropped_count = m.dropped_count;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (drop.count(m.pairs[i])) continue;
        out.pairs.push_back(m.pairs[i]);
        out.human.push_back(m.human[i]);
        for (std::size_t j = 0; j < m.judges.size(); ++j) out.judges[j].push_back(m.judges[j][i]);
    }
    return out;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string report_json(const AnalysisResult& r) {
    json j;
    j["corpus_stats"] = {{"n_queries", r.stats.n_queries},
                         {"n_documents", r.stats.n_documents},
                         {"n_judgments", r.stats.n_judgments},
                         {"pct_relevant", r.stats.pct_relevant},
                         {"pct_nonrelevant", r.stats.pct_nonrelevant}};
    j["clusters"] = {{"n_clusters", r.clusters.n_clusters}, {"noise_count", r.clusters.noise_count()}};
    json diag = json::array();
    for (const auto& row : r.diagnostics) {
        json judges = json::object();
        for (std::size_t k = 0; k < r.matrix.judge_names.size(); ++k)
            judges[r.matrix.judge_names[k]] = {{"ac1", optional_json(row.ac1[k].value)},
                                               {"kappa", optional_json(row.kappa[k].value)}};
        diag.push_back({{"cluster_id", row.cluster_id},
                        {"size", row.size},
                        {"stability", r.clusters.stability[static_cast<std::size_t>(row.cluster_id)]},
                        {"p_relevant", row.labels.p_relevant},
                        {"entropy", row.labels.entropy},
                        {"purity", row.labels.purity},
                        {"majority", to_string(row.labels.majority)},
                        {"judges", judges}});
    }
    j["cluster_diagnostics"] = diag;
    json purity = json::array();
    for (const auto& p : r.purity)
        purity.push_back({{"group", p.group},
                          {"n_clusters", p.n_clusters},
                          {"coverage", p.coverage},
                          {"purity_at_coverage", optional_json(p.purity)}});
    j["purity_summary"] = purity;
    json variation = json::array();
    for (const auto& f : r.bias.findings)
        variation.push_back({{"query_id", f.record.query_id},
                             {"judge_id", f.record.judge_id},
                             {"n_cells", f.record.n_cells},
                             {"min_ac1", f.record.min_ac1},
                             {"max_ac1", f.record.max_ac1},
                             {"delta", f.record.delta},
                             {"flags", f.flags.letters()},
                             {"bss", f.bss}});
    j["variation"] = variation;
    json ranking = json::array();
    for (const auto& v : r.bias.ranking) {
        json per = json::object();
        for (std::size_t k = 0; k < r.bias.judges.size(); ++k) per[r.bias.judges[k]] = optional_json(v.per_judge_bss[k]);
        ranking.push_back({{"rank", v.rank},
                           {"query_id", v.query_id},
                           {"mean_bss", v.mean_bss},
                           {"judges_flagging", v.judges_flagging},
                           {"flags", v.flags.letters()},
                           {"bss", per}});
    }
    j["ranking"] = ranking;
    json ba = json::array();
    for (const auto& b : r.bland_altman) {
        json points = json::array();
        for (const auto& p : b.points) points.push_back({{"query_id", p.query_id}, {"mean", p.mean}, {"diff", p.diff}});
        ba.push_back({{"judge_id", b.judge_id},
                      {"condition", to_string(b.condition)},
                      {"bias", b.bias},
                      {"sd", b.sd},
                      {"loa_low", b.loa_low},
                      {"loa_high", b.loa_high},
                      {"points", points}});
    }
    j["bland_altman"] = ba;
    return j.dump(2) + "\n";
}

std::string scatter_name(const std::string& judge) { return "plots/kappa_ac1_scatter_" + judge + ".tsv"; }

std::vector<std::string> report_names(const RunConfig& config, const std::vector<std::string>& judges) {
    std::vector<std::string> names;
    if (config.write_tsv) {
        names = {"corpus_stats.tsv", "cluster_assignments.tsv", "cluster_diagnostics.tsv", "purity_summary.tsv",
                 "variation.tsv",    "ranking.tsv",             "ba_points.tsv",           "ba_summary.tsv"};
        for (const auto& j : judges) names.push_back(scatter_name(j));
        for (const char* n : {"plots/ba_plot.tsv", "plots/delta_bars.tsv", "plots/top_bias.tsv"}) names.push_back(n);
    }
    if (config.write_json) names.push_back("report.json");
    return names;
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot create " + path.string());
    body(out);
    out.flush();
    if (!out) throw Error("write failed: " + path.string());
}

void write_reports(const fs::path& dir, const RunConfig& config, const AnalysisResult& r) {
    if (config.write_tsv) {
        const auto& judges = r.matrix.judge_names;
        write_file(dir / "corpus_stats.tsv", [&](std::ostream& o) { write_corpus_stats_tsv(o, r.stats); });
        write_file(dir / "cluster_assignments.tsv",
                   [&](std::ostream& o) { write_cluster_assignments_tsv(o, r.matrix, r.clusters); });
        write_file(dir / "cluster_diagnostics.tsv",
                   [&](std::ostream& o) { write_cluster_diagnostics_tsv(o, judges, r.diagnostics); });
        write_file(dir / "purity_summary.tsv", [&](std::ostream& o) { write_purity_summary_tsv(o, r.purity); });
        write_file(dir / "variation.tsv", [&](std::ostream& o) { write_variation_tsv(o, r.bias); });
        write_file(dir / "ranking.tsv", [&](std::ostream& o) { write_ranking_tsv(o, r.bias); });
        write_file(dir / "ba_points.tsv", [&](std::ostream& o) { write_ba_points_tsv(o, r.bland_altman); });
        write_file(dir / "ba_summary.tsv", [&](std::ostream& o) { write_ba_summary_tsv(o, r.bland_altman); });
        for (std::size_t j = 0; j < judges.size(); ++j)
            write_file(dir / scatter_name(judges[j]),
                       [&](std::ostream& o) { write_kappa_ac1_scatter_tsv(o, r.diagnostics, j); });
        write_file(dir / "plots/ba_plot.tsv", [&](std::ostream& o) { write_ba_plot_tsv(o, r.bland_altman); });
        write_file(dir / "plots/delta_bars.tsv", [&](std::ostream& o) { write_delta_bars_tsv(o, r.bias); });
        write_file(dir / "plots/top_bias.tsv", [&](std::ostream& o) { write_top_bias_tsv(o, r.bias); });
    }
    if (config.write_json) write_file(dir / "report.json", [&](std::ostream& o) { o << report_json(r); });
}

} // namespace

AnalysisResult analyze(const RunConfig& config, RunManifest& manifest) {
    auto validation = validate_config(config);
    if (!validation.ok()) throw ConfigError(validation.errors);
    for (const auto& w : validation.warnings) manifest.messages.push_back("warning: " + w);
    manifest.config_json = config_to_json(config);

    AnalysisResult result;
    auto& counters = manifest.counters;

    result.matrix = run_stage(manifest, "ingest", [&] {
        auto human = read_qrels_file(config.human_qrels_path);
        manifest.inputs.push_back({"human_qrels", config.human_qrels_path, sha256_file(config.human_qrels_path)});
        counters.duplicate_qrels += human.duplicate_count;
        std::vector<NamedJudgments> judges;
        for (const auto& src : config.judges) {
            auto parsed = read_qrels_file(src.path);
            manifest.inputs.push_back({"judge:" + src.name, src.path, sha256_file(src.path)});
            counters.duplicate_qrels += parsed.duplicate_count;
            judges.push_back({src.name, std::move(parsed.judgments)});
        }
        auto m = align_judgments(human.judgments, judges, config.binarization_threshold);
        counters.dropped_pairs = m.dropped_count;
        result.stats = corpus_stats(m);
        return m;
    });

    auto points = run_stage(manifest, "embed-lookup", [&] {
        auto set = config.embeddings_format == EmbeddingFormat::qdv ? read_qdv_file(config.embeddings_path)
                                                                    : read_qdv_tsv_file(config.embeddings_path);
        manifest.inputs.push_back({"embeddings", config.embeddings_path, sha256_file(config.embeddings_path)});
        auto missing = missing_embeddings(set, result.matrix);
        counters.missing_embeddings = missing.size();
        const double coverage =
            1.0 - static_cast<double>(missing.size()) / static_cast<double>(result.matrix.size());
        if (coverage < config.min_embedding_coverage) {
            std::string msg = std::to_string(missing.size()) + " of " + std::to_string(result.matrix.size()) +
                              " aligned pairs have no embedding (coverage " + format_real(coverage) + " < " +
                              format_real(config.min_embedding_coverage) + "); first missing: " +
                              missing.front().query_id + " " + missing.front().doc_id;
            throw InsufficientDataError(msg);
        }
        if (!missing.empty()) {
            manifest.messages.push_back("warning: dropped " + std::to_string(missing.size()) +
                                        " pairs without embeddings");
            result.matrix = restrict_matrix(result.matrix, std::set<PairKey>(missing.begin(), missing.end()));
        }
        if (config.normalize_embeddings) set = l2_normalize(set);
        if (config.hdbscan.metric == Metric::euclidean_on_normalized && !set.normalized())
            throw RangeError("metric euclidean_on_normalized needs unit-norm embeddings; enable normalize_embeddings");
        return points_from(set, result.matrix.pairs);
    });

    result.clusters = run_stage(manifest, "cluster", [&] { return cluster(points, config.hdbscan, config.workers); });

    run_stage(manifest, "metrics", [&] {
        result.diagnostics = cluster_diagnostics(result.matrix, result.clusters);
        result.purity = purity_summary(result.diagnostics, config.purity_coverage);
        for (const auto& row : result.diagnostics)
            for (const auto& k : row.kappa)
                if (!k.defined()) ++counters.undefined_kappa;
    });

    result.bias = run_stage(manifest, "variation",
                            [&] { return analyze_bias(result.matrix, result.clusters.labels, config.heuristics); });

    run_stage(manifest, "bland_altman", [&] {
        const auto& labels = result.clusters.labels;
        for (const auto& judge : result.matrix.judge_names) {
            auto attempt = [&](BaCondition condition, auto&& compute) {
                try {
                    result.bland_altman.push_back(compute());
                } catch (const InsufficientDataError& e) {
                    ++counters.skipped_bland_altman;
                    manifest.messages.push_back("warning: Bland-Altman skipped for judge " + judge + " (" +
                                                to_string(condition) + "): " + e.what());
                }
            };
            for (auto condition : {BaCondition::non_noise, BaCondition::noise})
                attempt(condition, [&] { return ba_label_rates(result.matrix, labels, judge, condition); });
            attempt(BaCondition::contrast, [&] {
                return ba_condition_contrast(result.matrix, labels, judge, config.heuristics.min_cell_size);
            });
        }
    });
    return result;
}

RunManifest run_pipeline(const RunConfig& config) {
    RunManifest manifest;
    auto result = analyze(config, manifest);

    const fs::path out(config.output_dir);
    fs::path staging = out;
    staging += ".partial";
    manifest.reports = report_names(config, result.matrix.judge_names);

    auto cleanup = [&] {
        std::error_code ec;
        fs::remove_all(staging, ec);
    };
    try {
        run_stage(manifest, "reports", [&] {
            if (fs::exists(out) && !fs::is_empty(out) && !fs::exists(out / "manifest.json"))
                throw Error("output directory '" + out.string() + "' exists and does not hold a previous report");
            fs::remove_all(staging);
            fs::create_directories(staging);
            write_file(staging / "manifest.json", [&](std::ostream& o) { o << manifest_to_json(manifest); });
            write_reports(staging, config, result);
        });
        write_file(staging / "manifest.json", [&](std::ostream& o) { o << manifest_to_json(manifest); });
        fs::remove_all(out);
        if (out.has_parent_path()) fs::create_directories(out.parent_path());
        fs::rename(staging, out);
    } catch (const StageError&) {
        cleanup();
        throw;
    } catch (const std::exception& e) {
        cleanup();
        throw StageError("reports", e.what());
    }
    return manifest;
}

std::string manifest_to_json(const RunManifest& m) {
    json inputs = json::array();
    for (const auto& i : m.inputs) inputs.push_back({{"role", i.role}, {"path", i.path}, {"sha256", i.sha256}});
    json timings = json::array();
    for (const auto& t : m.timings) timings.push_back({{"stage", t.stage}, {"seconds", t.seconds}});
    json j{
        {"version", m.version},
        {"config", m.config_json.empty() ? json::object() : json::parse(m.config_json)},
        {"inputs", inputs},
        {"timings", timings},
        {"counters",
         {{"duplicate_qrels", m.counters.duplicate_qrels},
          {"dropped_pairs", m.counters.dropped_pairs},
          {"missing_embeddings", m.counters.missing_embeddings},
          {"undefined_kappa", m.counters.undefined_kappa},
          {"skipped_bland_altman", m.counters.skipped_bland_altman}}},
        {"messages", m.messages},
        {"reports", m.reports},
    };
    return j.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text) {
    RunManifest m;
    try {
        auto j = json::parse(text);
        m.version = j.at("version").get<std::string>();
        m.config_json = j.at("config").dump(2);
        for (const auto& i : j.at("inputs"))
            m.inputs.push_back({i.at("role").get<std::string>(), i.at("path").get<std::string>(),
                                i.at("sha256").get<std::string>()});
        for (const auto& t : j.value("timings", json::array()))
            m.timings.push_back({t.at("stage").get<std::string>(), t.at("seconds").get<double>()});
        const auto& c = j.at("counters");
        m.counters.duplicate_qrels = c.at("duplicate_qrels").get<std::size_t>();
        m.counters.dropped_pairs = c.at("dropped_pairs").get<std::size_t>();
        m.counters.missing_embeddings = c.at("missing_embeddings").get<std::size_t>();
        m.counters.undefined_kappa = c.at("undefined_kappa").get<std::size_t>();
        m.counters.skipped_bland_altman = c.at("skipped_bland_altman").get<std::size_t>();
        m.messages = j.value("messages", std::vector<std::string>{});
        m.reports = j.value("reports", std::vector<std::string>{});
    } catch (const json::exception& e) {
        throw Error(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

std::vector<std::string> verify_manifest(const RunManifest& manifest) {
    std::vector<std::string> changed;
    for (const auto& input : manifest.inputs) {
        try {
            if (sha256_file(input.path) != input.sha256) changed.push_back(input.path);
        } catch (const Error&) {
            changed.push_back(input.path);
        }
    }
    return changed;
}

} // namespace qdbias
