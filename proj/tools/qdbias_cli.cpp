// qdbias: localize human/LLM relevance-judgment disagreement by semantic cluster.
//
// Exit codes: 0 success, 1 validation error, 2 runtime or data error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "qdbias/error.hpp"
#include "qdbias/pipeline.hpp"
#include "qdbias/synth.hpp"

namespace {

namespace fs = std::filesystem;
using namespace qdbias;

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct AnalyzeOptions {
    std::string config;
    std::string qrels;
    std::vector<std::string> judges;
    std::string embeddings;
    std::optional<int> min_cluster_size;
    std::optional<int> min_samples;
    std::optional<double> tau_abs;
    std::optional<int> min_cell_size;
    std::optional<double> coverage;
    std::string out;
    std::vector<std::string> formats;
    std::optional<unsigned> workers;
};

RunConfig resolve_analyze(const AnalyzeOptions& o) {
    RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
    std::vector<std::string> errors;
    if (!o.qrels.empty()) c.human_qrels_path = o.qrels;
    if (!o.judges.empty()) {
        c.judges.clear();
        for (const auto& spec : o.judges) {
            auto eq = spec.find('=');
            if (eq == std::string::npos || eq == 0) {
                errors.push_back("--judge expects NAME=PATH, got '" + spec + "'");
                continue;
            }
            c.judges.push_back({spec.substr(0, eq), spec.substr(eq + 1)});
        }
    }
    if (!o.embeddings.empty()) {
        c.embeddings_path = o.embeddings;
        if (fs::path(o.embeddings).extension() == ".tsv") c.embeddings_format = EmbeddingFormat::tsv;
    }
    if (o.min_cluster_size) c.hdbscan.min_cluster_size = *o.min_cluster_size;
    if (o.min_samples) c.hdbscan.min_samples = *o.min_samples;
    if (o.tau_abs) c.heuristics.tau_abs = *o.tau_abs;
    if (o.min_cell_size) c.heuristics.min_cell_size = *o.min_cell_size;
    if (o.coverage) c.purity_coverage = *o.coverage;
    if (!o.out.empty()) c.output_dir = o.out;
    if (!o.formats.empty()) {
        c.write_tsv = c.write_json = false;
        for (const auto& f : o.formats) {
            if (f == "tsv") c.write_tsv = true;
            else if (f == "json") c.write_json = true;
            else errors.push_back("--format expects tsv or json, got '" + f + "'");
        }
    }
    if (o.workers) c.workers = *o.workers;
    if (!errors.empty()) throw ConfigError(errors);
    return c;
}

int cmd_analyze(const AnalyzeOptions& o) {
    auto manifest = run_pipeline(resolve_analyze(o));
    for (const auto& m : manifest.messages) std::cerr << m << '\n';
    const auto& c = manifest.counters;
    std::cerr << "duplicates=" << c.duplicate_qrels << " dropped=" << c.dropped_pairs
              << " missing_embeddings=" << c.missing_embeddings << " undefined_kappa=" << c.undefined_kappa
              << " skipped_bland_altman=" << c.skipped_bland_altman << '\n';
    for (const auto& t : manifest.timings) std::cerr << "stage " << t.stage << ": " << t.seconds << " s\n";
    std::cout << manifest.reports.size() << " reports written\n";
    return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& out) {
    auto spec = scenario_from_json(read_text(spec_path));
    auto corpus = generate(spec);
    write_corpus(corpus, out);
    std::cout << corpus.matrix.size() << " pairs, " << corpus.matrix.judge_names.size() << " judges written to "
              << out << '\n';
    return 0;
}

int cmd_validate(const std::string& config_path, const std::string& manifest_path) {
    auto v = validate_config(load_config(config_path));
    for (const auto& w : v.warnings) std::cerr << "warning: " << w << '\n';
    if (!v.ok()) {
        for (const auto& e : v.errors) std::cerr << "error: " << e << '\n';
        return kExitValidation;
    }
    if (!manifest_path.empty()) {
        auto changed = verify_manifest(manifest_from_json(read_text(manifest_path)));
        for (const auto& p : changed) std::cerr << "error: input changed since the manifest was written: " << p << '\n';
        if (!changed.empty()) return kExitValidation;
    }
    std::cout << config_to_json(v.config) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cluster-level agreement analysis of human and LLM relevance judgments"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    AnalyzeOptions ao;
    auto* analyze = app.add_subcommand("analyze", "Run the full analysis and write reports");
    analyze->add_option("--config", ao.config, "JSON run configuration")->check(CLI::ExistingFile);
    analyze->add_option("--qrels", ao.qrels, "Human qrels file");
    analyze->add_option("--judge", ao.judges, "LLM judge qrels as NAME=PATH (repeatable)");
    analyze->add_option("--embeddings", ao.embeddings, "Embedding file (.qdv or .tsv)");
    analyze->add_option("--min-cluster-size", ao.min_cluster_size);
    analyze->add_option("--min-samples", ao.min_samples);
    analyze->add_option("--tau-abs", ao.tau_abs);
    analyze->add_option("--min-cell-size", ao.min_cell_size);
    analyze->add_option("--coverage", ao.coverage, "Purity coverage fraction");
    analyze->add_option("--out", ao.out, "Output directory");
    analyze->add_option("--format", ao.formats, "tsv and/or json (repeatable)")->delimiter(',');
    analyze->add_option("--workers", ao.workers, "Clustering threads (0 = all cores)");

    std::string spec_path, synth_out;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with planted bias");
    synth->add_option("--spec", spec_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
    synth->add_option("--out", synth_out, "Output directory")->required();

    std::string validate_path, manifest_path;
    auto* validate = app.add_subcommand("validate", "Check a configuration (and optionally a run manifest)");
    validate->add_option("--config", validate_path, "JSON run configuration")->required();
    validate->add_option("--manifest", manifest_path, "Manifest whose input digests to re-check");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitValidation;
    }

    try {
        if (*analyze) return cmd_analyze(ao);
        if (*synth) return cmd_synth(spec_path, synth_out);
        return cmd_validate(validate_path, manifest_path);
    } catch (const ConfigError& e) {
        for (const auto& msg : e.errors()) std::cerr << "error: " << msg << '\n';
        return kExitValidation;
    } catch (const SpecError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}
