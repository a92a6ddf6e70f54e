#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "qdbias/error.hpp"
#include "qdbias/pipeline.hpp"

namespace qdbias {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string resolve(const std::string& path, const std::string& base_dir) {
    if (path.empty() || base_dir.empty()) return path;
    fs::path p(path);
    if (p.is_absolute()) return p.lexically_normal().string();
    return (fs::path(base_dir) / p).lexically_normal().string();
}

// Reads typed fields and records every mismatch instead of stopping at the first.
class Reader {
public:
    explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

    template <class T>
    void get(const json& obj, const char* key, const std::string& where, T& out) {
        auto it = obj.find(key);
        if (it == obj.end() || it->is_null()) return;
        try {
            out = it->get<T>();
        } catch (const json::exception&) {
            errors_.push_back(where + key + ": expected " + expected<T>() + ", got " + it->type_name());
        }
    }

    void unknown_keys(const json& obj, const std::set<std::string>& known, const std::string& where) {
        for (const auto& [k, v] : obj.items())
            if (!known.count(k)) errors_.push_back(where + k + ": unknown field");
    }

    bool object(const json& j, const std::string& name) {
        if (j.is_object()) return true;
        errors_.push_back(name + ": expected object, got " + j.type_name());
        return false;
    }

    std::vector<std::string>& errors() { return errors_; }

private:
    template <class T>
    static const char* expected() {
        if constexpr (std::is_same_v<T, bool>) return "boolean";
        else if constexpr (std::is_integral_v<T>) return "integer";
        else if constexpr (std::is_floating_point_v<T>) return "number";
        else return "string";
    }

    std::vector<std::string>& errors_;
};

const char* to_string(AggregationRule r) { return r == AggregationRule::majority ? "majority" : "at_least"; }
const char* to_string(MissingJudgePolicy p) { return p == MissingJudgePolicy::skip ? "skip" : "zero"; }
const char* to_string(EmbeddingFormat f) { return f == EmbeddingFormat::tsv ? "tsv" : "qdv"; }

} // namespace

RunConfig config_from_json(const std::string& text, const std::string& base_dir) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError({std::string("config is not valid JSON: ") + e.what()});
    }
    std::vector<std::string> errors;
    Reader r(errors);
    RunConfig c;
    if (!r.object(root, "config")) throw ConfigError(errors);

    r.unknown_keys(root,
                   {"human_qrels", "judges", "embeddings", "hdbscan", "heuristics", "binarization_threshold",
                    "output_dir", "formats", "purity_coverage", "min_embedding_coverage", "normalize_embeddings",
                    "workers"},
                   "");
    r.get(root, "human_qrels", "", c.human_qrels_path);

    if (auto it = root.find("judges"); it != root.end()) {
        if (it->is_object()) {
            for (const auto& [name, path] : it->items()) {
                if (path.is_string()) c.judges.push_back({name, path.get<std::string>()});
                else errors.push_back("judges." + name + ": expected string path");
            }
        } else if (it->is_array()) {
            for (std::size_t i = 0; i < it->size(); ++i) {
                const auto& j = (*it)[i];
                const std::string where = "judges[" + std::to_string(i) + "].";
                if (!r.object(j, "judges[" + std::to_string(i) + "]")) continue;
                JudgeSource s;
                r.get(j, "name", where, s.name);
                r.get(j, "path", where, s.path);
                r.unknown_keys(j, {"name", "path"}, where);
                c.judges.push_back(s);
            }
        } else {
            errors.push_back(std::string("judges: expected array or object, got ") + it->type_name());
        }
    }

    if (auto it = root.find("embeddings"); it != root.end()) {
        if (it->is_string()) {
            c.embeddings_path = it->get<std::string>();
        } else if (r.object(*it, "embeddings")) {
            r.get(*it, "path", "embeddings.", c.embeddings_path);
            std::string format = "qdv";
            r.get(*it, "format", "embeddings.", format);
            if (format == "qdv") c.embeddings_format = EmbeddingFormat::qdv;
            else if (format == "tsv") c.embeddings_format = EmbeddingFormat::tsv;
            else errors.push_back("embeddings.format: expected 'qdv' or 'tsv', got '" + format + "'");
            r.unknown_keys(*it, {"path", "format"}, "embeddings.");
        }
    }

    if (auto it = root.find("hdbscan"); it != root.end() && r.object(*it, "hdbscan")) {
        r.get(*it, "min_cluster_size", "hdbscan.", c.hdbscan.min_cluster_size);
        r.get(*it, "min_samples", "hdbscan.", c.hdbscan.min_samples);
        std::string metric = to_string(c.hdbscan.metric);
        r.get(*it, "metric", "hdbscan.", metric);
        try {
            c.hdbscan.metric = parse_metric(metric);
        } catch (const RangeError& e) {
            errors.push_back(std::string("hdbscan.metric: ") + e.what());
        }
        r.unknown_keys(*it, {"min_cluster_size", "min_samples", "metric"}, "hdbscan.");
    }

    if (auto it = root.find("heuristics"); it != root.end() && r.object(*it, "heuristics")) {
        auto& h = c.heuristics;
        const std::string w = "heuristics.";
        r.get(*it, "tau_abs", w, h.tau_abs);
        r.get(*it, "iqr_multiplier", w, h.iqr_multiplier);
        r.get(*it, "flip_high", w, h.flip_high);
        r.get(*it, "flip_low", w, h.flip_low);
        r.get(*it, "min_judges_flagged", w, h.min_judges_flagged);
        r.get(*it, "min_cell_size", w, h.min_cell_size);
        std::string rule = to_string(h.rule), missing = to_string(h.missing_judge);
        r.get(*it, "rule", w, rule);
        r.get(*it, "missing_judge", w, missing);
        if (rule == "at_least") h.rule = AggregationRule::at_least;
        else if (rule == "majority") h.rule = AggregationRule::majority;
        else errors.push_back("heuristics.rule: expected 'at_least' or 'majority', got '" + rule + "'");
        if (missing == "zero") h.missing_judge = MissingJudgePolicy::zero;
        else if (missing == "skip") h.missing_judge = MissingJudgePolicy::skip;
        else errors.push_back("heuristics.missing_judge: expected 'zero' or 'skip', got '" + missing + "'");
        r.unknown_keys(*it,
                       {"tau_abs", "iqr_multiplier", "flip_high", "flip_low", "min_judges_flagged", "rule",
                        "min_cell_size", "missing_judge"},
                       w);
    }

    r.get(root, "binarization_threshold", "", c.binarization_threshold);
    r.get(root, "output_dir", "", c.output_dir);
    if (auto it = root.find("formats"); it != root.end()) {
        c.write_tsv = c.write_json = false;
        if (!it->is_array()) {
            errors.push_back(std::string("formats: expected array, got ") + it->type_name());
        } else {
            for (const auto& f : *it) {
                if (f == "tsv") c.write_tsv = true;
                else if (f == "json") c.write_json = true;
                else errors.push_back("formats: unknown format " + f.dump());
            }
        }
    }
    r.get(root, "purity_coverage", "", c.purity_coverage);
    r.get(root, "min_embedding_coverage", "", c.min_embedding_coverage);
    r.get(root, "normalize_embeddings", "", c.normalize_embeddings);
    r.get(root, "workers", "", c.workers);

    if (!errors.empty()) throw ConfigError(errors);

    c.human_qrels_path = resolve(c.human_qrels_path, base_dir);
    for (auto& j : c.judges) j.path = resolve(j.path, base_dir);
    c.embeddings_path = resolve(c.embeddings_path, base_dir);
    c.output_dir = resolve(c.output_dir, base_dir);
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError({"cannot read config file '" + path + "'"});
    std::ostringstream text;
    text << in.rdbuf();
    return config_from_json(text.str(), fs::path(path).parent_path().string());
}

std::string config_to_json(const RunConfig& c) {
    json judges = json::array();
    for (const auto& j : c.judges) judges.push_back({{"name", j.name}, {"path", j.path}});
    json formats = json::array();
    if (c.write_tsv) formats.push_back("tsv");
    if (c.write_json) formats.push_back("json");
    const auto& h = c.heuristics;
    json j{
        {"human_qrels", c.human_qrels_path},
        {"judges", judges},
        {"embeddings", {{"path", c.embeddings_path}, {"format", to_string(c.embeddings_format)}}},
        {"hdbscan",
         {{"min_cluster_size", c.hdbscan.min_cluster_size},
          {"min_samples", c.hdbscan.min_samples},
          {"metric", to_string(c.hdbscan.metric)}}},
        {"heuristics",
         {{"tau_abs", h.tau_abs},
          {"iqr_multiplier", h.iqr_multiplier},
          {"flip_high", h.flip_high},
          {"flip_low", h.flip_low},
          {"min_judges_flagged", h.min_judges_flagged},
          {"rule", to_string(h.rule)},
          {"min_cell_size", h.min_cell_size},
          {"missing_judge", to_string(h.missing_judge)}}},
        {"binarization_threshold", c.binarization_threshold},
        {"output_dir", c.output_dir},
        {"formats", formats},
        {"purity_coverage", c.purity_coverage},
        {"min_embedding_coverage", c.min_embedding_coverage},
        {"normalize_embeddings", c.normalize_embeddings},
        {"workers", c.workers},
    };
    return j.dump(2);
}

ValidationResult validate_config(const RunConfig& config) {
    ValidationResult v{config, {}, {}};
    auto& errors = v.errors;

    auto check_file = [&](const std::string& field, const std::string& path) {
        if (path.empty()) {
            errors.push_back(field + ": missing path");
            return;
        }
        std::error_code ec;
        if (!fs::is_regular_file(path, ec)) errors.push_back(field + ": no such file '" + path + "'");
    };

    check_file("human_qrels", config.human_qrels_path);

    if (config.judges.empty()) errors.push_back("judges: at least one judge is required");
    std::set<std::string> names;
    for (const auto& j : config.judges) {
        if (j.name.empty()) {
            errors.push_back("judges: empty judge name");
            continue;
        }
        if (!names.insert(j.name).second) errors.push_back("judges." + j.name + ": duplicate judge name");
        check_file("judges." + j.name, j.path);
    }

    check_file("embeddings.path", config.embeddings_path);

    try {
        for (auto& w : config.hdbscan.validate()) v.warnings.push_back("hdbscan: " + w);
    } catch (const RangeError& e) {
        errors.push_back(std::string("hdbscan.") + e.what());
    }
    for (const auto& p : config.heuristics.problems()) errors.push_back("heuristics." + p);

    if (config.binarization_threshold < 1 || config.binarization_threshold > 3)
        errors.push_back("binarization_threshold must be in [1, 3]");
    if (config.output_dir.empty()) errors.push_back("output_dir: missing path");
    if (!config.write_tsv && !config.write_json) errors.push_back("formats: at least one of tsv, json is required");
    if (!(config.purity_coverage > 0.0 && config.purity_coverage <= 1.0))
        errors.push_back("purity_coverage must be in (0, 1]");
    if (!(config.min_embedding_coverage >= 0.0 && config.min_embedding_coverage <= 1.0))
        errors.push_back("min_embedding_coverage must be in [0, 1]");
    if (config.hdbscan.metric == Metric::euclidean_on_normalized && !config.normalize_embeddings)
        v.warnings.push_back("metric euclidean_on_normalized without normalize_embeddings requires unit-norm input");
    return v;
}

} // namespace qdbias
