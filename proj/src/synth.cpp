#include "qdbias/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "json.hpp"
#include "qdbias/error.hpp"
#include "qdbias/rng.hpp"

namespace qdbias {

namespace {

// Stream ids of the generator; judge j uses kJudgeFlips + j and kJudgeGrades + j.
enum Stream : std::uint64_t {
    kCenters = 1,
    kCoordinates = 2,
    kHumanLabels = 3,
    kHumanGrades = 4,
    kNoisePositions = 5,
    kJudgeFlips = 100,
    kJudgeGrades = 200,
};

bool valid_rate(double r) { return r >= 0.0 && r <= 1.0; }

} // namespace

ErrorRates JudgeProfile::rates_for(std::size_t query, int cluster) const {
    for (const auto& c : cells)
        if (c.query == query && c.cluster == cluster) return c.rates;
    if (auto it = per_cluster.find(cluster); it != per_cluster.end()) return it->second;
    return base;
}

double ScenarioSpec::human_rate(int cluster) const {
    if (cluster < 0) return noise_relevant_rate;
    if (human_relevant_rate.size() == 1) return human_relevant_rate.front();
    return human_relevant_rate.at(static_cast<std::size_t>(cluster));
}

void ScenarioSpec::validate() const {
    std::vector<std::string> errors;
    if (n_clusters == 0) errors.push_back("n_clusters must be >= 1");
    if (dim == 0) errors.push_back("dim must be >= 1");
    if (!(cluster_spread >= 0.0)) errors.push_back("cluster_spread must be >= 0");
    if (!(center_separation > 0.0)) errors.push_back("center_separation must be > 0");
    if (query_layout.empty()) {
        if (n_queries == 0) errors.push_back("n_queries must be >= 1");
        if (clusters_per_query == 0 || clusters_per_query > n_clusters)
            errors.push_back("clusters_per_query must lie in [1, n_clusters]");
        else if (n_queries * clusters_per_query < n_clusters)
            errors.push_back("n_queries * clusters_per_query must be >= n_clusters so every cluster gets pairs");
    }
    for (std::size_t q = 0; q < query_layout.size(); ++q) {
        if (query_layout[q].clusters.empty()) errors.push_back("query " + std::to_string(q) + " has no clusters");
        for (int c : query_layout[q].clusters)
            if (c < 0 || static_cast<std::size_t>(c) >= n_clusters)
                errors.push_back("query " + std::to_string(q) + " names cluster " + std::to_string(c) + " out of range");
        std::set<int> uniq(query_layout[q].clusters.begin(), query_layout[q].clusters.end());
        if (uniq.size() != query_layout[q].clusters.size())
            errors.push_back("query " + std::to_string(q) + " lists a cluster twice");
    }
    if (human_relevant_rate.size() != 1 && human_relevant_rate.size() != n_clusters)
        errors.push_back("human_relevant_rate needs 1 or n_clusters entries");
    for (double r : human_relevant_rate)
        if (!valid_rate(r)) errors.push_back("human_relevant_rate outside [0,1]");
    if (!valid_rate(noise_relevant_rate)) errors.push_back("noise_relevant_rate outside [0,1]");
    if (judges.empty()) errors.push_back("at least one judge profile is required");
    std::set<std::string> names;
    for (const auto& j : judges) {
        if (j.name.empty()) errors.push_back("judge name is empty");
        if (!names.insert(j.name).second) errors.push_back("duplicate judge name '" + j.name + "'");
        auto check = [&](const ErrorRates& r, const std::string& where) {
            if (!valid_rate(r.flip01) || !valid_rate(r.flip10))
                errors.push_back("judge '" + j.name + "' " + where + " has a flip rate outside [0,1]");
        };
        check(j.base, "base");
        for (const auto& [c, r] : j.per_cluster) check(r, "cluster " + std::to_string(c));
        for (const auto& c : j.cells) {
            check(c.rates, "cell override");
            if (c.query >= query_count()) errors.push_back("judge '" + j.name + "' overrides an unknown query");
        }
    }
    if (!errors.empty()) {
        std::string msg = "invalid scenario: ";
        for (std::size_t i = 0; i < errors.size(); ++i) msg += (i ? "; " : "") + errors[i];
        throw SpecError(msg);
    }
}

double expected_ac1(double p, double flip01, double flip10) {
    const double pa = p * (1.0 - flip10) + (1.0 - p) * (1.0 - flip01);
    const double pb = p * (1.0 - flip10) + (1.0 - p) * flip01;
    const double pi = (p + pb) / 2.0;
    const double pe = 2.0 * pi * (1.0 - pi);
    return (pa - pe) / (1.0 - pe);
}

std::string query_name(std::size_t index, std::size_t n_queries) {
    int width = 2;
    for (std::size_t x = n_queries > 0 ? n_queries - 1 : 0; x >= 100; x /= 10) ++width;
    char buf[32];
    std::snprintf(buf, sizeof buf, "q%0*zu", width, index);
    return buf;
}

namespace {

std::vector<std::vector<double>> make_centers(const ScenarioSpec& spec) {
    std::vector<std::vector<double>> centers;
    if (spec.n_clusters <= spec.dim) {
        // Scaled basis vectors: every pair sits exactly center_separation apart.
        const double r = spec.center_separation / std::sqrt(2.0);
        for (std::size_t c = 0; c < spec.n_clusters; ++c) {
            std::vector<double> v(spec.dim, 0.0);
            v[c] = r;
            centers.push_back(std::move(v));
        }
        return centers;
    }
    const CounterRng rng(spec.seed, kCenters);
    const double side = spec.center_separation * 2.0 *
                        std::ceil(std::pow(static_cast<double>(spec.n_clusters), 1.0 / static_cast<double>(spec.dim)));
    constexpr std::size_t kAttempts = 10000;
    std::uint64_t counter = 0;
    for (std::size_t c = 0; c < spec.n_clusters; ++c) {
        bool placed = false;
        for (std::size_t attempt = 0; attempt < kAttempts && !placed; ++attempt) {
            std::vector<double> v(spec.dim);
            for (auto& x : v) x = side * rng.uniform(counter++);
            placed = std::all_of(centers.begin(), centers.end(), [&](const std::vector<double>& o) {
                double s = 0.0;
                for (std::size_t k = 0; k < spec.dim; ++k) s += (v[k] - o[k]) * (v[k] - o[k]);
                return std::sqrt(s) >= spec.center_separation;
            });
            if (placed) centers.push_back(std::move(v));
        }
        if (!placed)
            throw SpecError("could not place " + std::to_string(spec.n_clusters) + " centers " +
                            std::to_string(spec.center_separation) + " apart in " + std::to_string(spec.dim) +
                            " dimensions");
    }
    return centers;
}

struct Slot {
    std::size_t query;
    int cluster;
};

// Generation order: query cells (query-major), then background noise points.
std::vector<Slot> layout_slots(const ScenarioSpec& spec) {
    std::vector<Slot> slots;
    if (!spec.query_layout.empty()) {
        for (std::size_t q = 0; q < spec.query_layout.size(); ++q)
            for (int c : spec.query_layout[q].clusters)
                for (std::size_t i = 0; i < spec.query_layout[q].pairs_per_cell; ++i) slots.push_back({q, c});
    } else {
        std::vector<std::vector<std::size_t>> members(spec.n_clusters);
        std::vector<std::vector<int>> clusters_of(spec.n_queries);
        for (std::size_t q = 0; q < spec.n_queries; ++q)
            for (std::size_t j = 0; j < spec.clusters_per_query; ++j) {
                auto c = (q * spec.clusters_per_query + j) % spec.n_clusters;
                members[c].push_back(q);
                clusters_of[q].push_back(static_cast<int>(c));
            }
        for (std::size_t q = 0; q < spec.n_queries; ++q)
            for (int c : clusters_of[q]) {
                const auto& m = members[static_cast<std::size_t>(c)];
                const auto pos = static_cast<std::size_t>(std::find(m.begin(), m.end(), q) - m.begin());
                const std::size_t share = spec.points_per_cluster / m.size() + (pos < spec.points_per_cluster % m.size() ? 1 : 0);
                for (std::size_t i = 0; i < share; ++i) slots.push_back({q, c});
            }
    }
    for (std::size_t i = 0; i < spec.noise_points; ++i) slots.push_back({i % spec.query_count(), kNoiseCluster});
    return slots;
}

} // namespace

SyntheticCorpus generate(const ScenarioSpec& spec) {
    spec.validate();
    const auto centers = make_centers(spec);
    const auto slots = layout_slots(spec);
    if (slots.empty()) throw SpecError("scenario produces no pairs");
    const std::size_t nq = spec.query_count();

    std::vector<double> lo(spec.dim, 0.0), hi(spec.dim, 0.0);
    for (std::size_t k = 0; k < spec.dim; ++k) {
        lo[k] = hi[k] = centers.front()[k];
        for (const auto& c : centers) {
            lo[k] = std::min(lo[k], c[k]);
            hi[k] = std::max(hi[k], c[k]);
        }
        lo[k] -= spec.center_separation / 2.0;
        hi[k] += spec.center_separation / 2.0;
    }

    const CounterRng coords(spec.seed, kCoordinates), noise_pos(spec.seed, kNoisePositions);
    const CounterRng human_rng(spec.seed, kHumanLabels), human_grade_rng(spec.seed, kHumanGrades);

    struct Row {
        PairKey key;
        int cluster;
        Label human;
        std::vector<Label> judges;
    };
    std::vector<Row> rows;
    rows.reserve(slots.size());
    SyntheticCorpus corpus;
    corpus.embeddings = EmbeddingSet(static_cast<std::uint32_t>(spec.dim));
    for (const auto& j : spec.judges) corpus.judge_qrels.push_back({j.name, {}});

    const int doc_width = std::max(6, static_cast<int>(std::to_string(slots.size()).size()));
    std::vector<float> v(spec.dim);
    for (std::uint64_t g = 0; g < slots.size(); ++g) {
        const auto& s = slots[g];
        for (std::size_t k = 0; k < spec.dim; ++k) {
            const std::uint64_t counter = g * spec.dim + k;
            double x = s.cluster == kNoiseCluster
                           ? lo[k] + (hi[k] - lo[k]) * noise_pos.uniform(counter)
                           : centers[static_cast<std::size_t>(s.cluster)][k] + spec.cluster_spread * coords.normal(counter);
            v[k] = static_cast<float>(x);
        }
        std::string doc = std::to_string(g);
        doc.insert(0, static_cast<std::size_t>(doc_width) - std::min(doc.size(), static_cast<std::size_t>(doc_width)), '0');
        PairKey key{query_name(s.query, nq), "d" + doc};

        const Label human = human_rng.bernoulli(g, spec.human_rate(s.cluster)) ? 1 : 0;
        const int human_grade = (human ? 2 : 0) + static_cast<int>(human_grade_rng.raw(g) & 1);
        corpus.human_qrels.push_back({key.query_id, key.doc_id, human_grade});

        Row row{key, s.cluster, human, {}};
        for (std::size_t j = 0; j < spec.judges.size(); ++j) {
            const auto rates = spec.judges[j].rates_for(s.query, s.cluster);
            const CounterRng flips(spec.seed, kJudgeFlips + j), grades(spec.seed, kJudgeGrades + j);
            const bool flip = flips.bernoulli(g, human ? rates.flip10 : rates.flip01);
            const Label label = flip ? Label(1 - human) : human;
            row.judges.push_back(label);
            corpus.judge_qrels[j].judgments.push_back(
                {key.query_id, key.doc_id, (label ? 2 : 0) + static_cast<int>(grades.raw(g) & 1)});
        }
        corpus.embeddings.insert(key, v);
        rows.push_back(std::move(row));
    }

    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.key < b.key; });
    auto& m = corpus.matrix;
    for (const auto& j : spec.judges) m.judge_names.push_back(j.name);
    m.judges.resize(spec.judges.size());
    for (auto& r : rows) {
        m.pairs.push_back(r.key);
        m.human.push_back(r.human);
        for (std::size_t j = 0; j < r.judges.size(); ++j) m.judges[j].push_back(r.judges[j]);
        corpus.true_cluster.push_back(r.cluster);
    }

    std::set<std::pair<std::size_t, int>> cells;
    for (const auto& s : slots) cells.insert({s.query, s.cluster});
    for (const auto& [q, c] : cells)
        for (const auto& j : spec.judges) {
            auto r = j.rates_for(q, c);
            corpus.expected_cell_ac1.push_back({query_name(q, nq), c, j.name, expected_ac1(spec.human_rate(c), r.flip01, r.flip10)});
        }
    return corpus;
}

ScenarioSpec planted_bias_spec(std::uint64_t seed) {
    ScenarioSpec spec;
    spec.n_clusters = 8;
    spec.dim = 16;
    spec.cluster_spread = 0.05;
    spec.center_separation = 1.0;
    spec.noise_points = 0;
    spec.seed = seed;
    spec.query_layout.push_back({{0, 1}, 200});
    for (std::size_t q = 1; q < 20; ++q)
        spec.query_layout.push_back({{static_cast<int>(q % 8), static_cast<int>((q + 3) % 8)}, 40});
    spec.human_relevant_rate.assign(8, 0.3);
    spec.human_relevant_rate[0] = spec.human_relevant_rate[1] = 0.5;
    for (int j = 0; j < 4; ++j) {
        JudgeProfile p;
        p.name = "judge" + std::to_string(j);
        p.base = {0.05, 0.05};
        if (j < 2) {
            p.cells.push_back({0, 0, {0.0, 0.0}});
            p.cells.push_back({0, 1, {0.5, 0.5}});
        }
        spec.judges.push_back(std::move(p));
    }
    return spec;
}

SyntheticCorpus planted_bias_scenario(std::uint64_t seed) { return generate(planted_bias_spec(seed)); }

namespace {

using nlohmann::json;

ErrorRates rates_from(const json& j) { return {j.value("flip01", 0.0), j.value("flip10", 0.0)}; }
json rates_to(const ErrorRates& r) { return {{"flip01", r.flip01}, {"flip10", r.flip10}}; }

} // namespace

ScenarioSpec scenario_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw SpecError(std::string("scenario JSON: ") + e.what());
    }
    try {
        if (j.contains("preset")) {
            if (j.at("preset") != "planted_bias") throw SpecError("unknown preset " + j.at("preset").dump());
            return planted_bias_spec(j.value<std::uint64_t>("seed", 0));
        }
        ScenarioSpec s;
        s.n_clusters = j.value("n_clusters", s.n_clusters);
        s.dim = j.value("dim", s.dim);
        s.points_per_cluster = j.value("points_per_cluster", s.points_per_cluster);
        s.cluster_spread = j.value("cluster_spread", s.cluster_spread);
        s.center_separation = j.value("center_separation", s.center_separation);
        s.noise_points = j.value("noise_points", s.noise_points);
        s.seed = j.value<std::uint64_t>("seed", 0);
        if (j.contains("queries")) {
            const auto& q = j.at("queries");
            s.n_queries = q.value("count", s.n_queries);
            s.clusters_per_query = q.value("clusters_per_query", s.clusters_per_query);
            if (q.contains("layout"))
                for (const auto& l : q.at("layout"))
                    s.query_layout.push_back({l.at("clusters").get<std::vector<int>>(), l.at("pairs_per_cell").get<std::size_t>()});
        }
        if (j.contains("human_relevant_rate")) {
            const auto& h = j.at("human_relevant_rate");
            s.human_relevant_rate = h.is_array() ? h.get<std::vector<double>>() : std::vector<double>{h.get<double>()};
        }
        s.noise_relevant_rate = j.value("noise_relevant_rate", s.noise_relevant_rate);
        for (const auto& jp : j.value("judge_profiles", json::array())) {
            JudgeProfile p;
            p.name = jp.at("name").get<std::string>();
            if (jp.contains("base")) p.base = rates_from(jp.at("base"));
            for (const auto& [c, r] : jp.value("per_cluster", json::object()).items()) p.per_cluster[std::stoi(c)] = rates_from(r);
            for (const auto& c : jp.value("cells", json::array()))
                p.cells.push_back({c.at("query").get<std::size_t>(), c.at("cluster").get<int>(), rates_from(c)});
            s.judges.push_back(std::move(p));
        }
        return s;
    } catch (const json::exception& e) {
        throw SpecError(std::string("scenario JSON: ") + e.what());
    }
}

std::string scenario_to_json(const ScenarioSpec& s) {
    json j;
    j["n_clusters"] = s.n_clusters;
    j["dim"] = s.dim;
    j["points_per_cluster"] = s.points_per_cluster;
    j["cluster_spread"] = s.cluster_spread;
    j["center_separation"] = s.center_separation;
    j["noise_points"] = s.noise_points;
    j["seed"] = s.seed;
    json q{{"count", s.n_queries}, {"clusters_per_query", s.clusters_per_query}};
    if (!s.query_layout.empty()) {
        q["layout"] = json::array();
        for (const auto& l : s.query_layout) q["layout"].push_back({{"clusters", l.clusters}, {"pairs_per_cell", l.pairs_per_cell}});
    }
    j["queries"] = q;
    j["human_relevant_rate"] = s.human_relevant_rate;
    j["noise_relevant_rate"] = s.noise_relevant_rate;
    j["judge_profiles"] = json::array();
    for (const auto& p : s.judges) {
        json jp{{"name", p.name}, {"base", rates_to(p.base)}};
        json pc = json::object();
        for (const auto& [c, r] : p.per_cluster) pc[std::to_string(c)] = rates_to(r);
        jp["per_cluster"] = pc;
        jp["cells"] = json::array();
        for (const auto& c : p.cells) {
            auto jc = rates_to(c.rates);
            jc["query"] = c.query;
            jc["cluster"] = c.cluster;
            jp["cells"].push_back(jc);
        }
        j["judge_profiles"].push_back(jp);
    }
    return j.dump(2);
}

void write_corpus(const SyntheticCorpus& corpus, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto open = [&](const std::string& name) {
        std::ofstream out(fs::path(dir) / name, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot create " + (fs::path(dir) / name).string());
        return out;
    };
    {
        auto out = open("human.qrels");
        write_qrels(out, corpus.human_qrels);
    }
    json judges = json::array();
    for (const auto& j : corpus.judge_qrels) {
        auto name = "judge_" + j.name + ".qrels";
        auto out = open(name);
        write_qrels(out, j.judgments);
        judges.push_back({{"name", j.name}, {"path", name}});
    }
    write_qdv_file(corpus.embeddings, (fs::path(dir) / "embeddings.qdv").string());
    {
        auto out = open("truth.tsv");
        out << "query_id\tdoc_id\ttrue_cluster\n";
        for (std::size_t i = 0; i < corpus.matrix.size(); ++i)
            out << corpus.matrix.pairs[i].query_id << '\t' << corpus.matrix.pairs[i].doc_id << '\t'
                << corpus.true_cluster[i] << '\n';
    }
    {
        auto out = open("expected_ac1.tsv");
        out << "query_id\tcluster\tjudge_id\texpected_ac1\n";
        char buf[64];
        for (const auto& e : corpus.expected_cell_ac1) {
            std::snprintf(buf, sizeof buf, "%.6f", e.ac1);
            out << e.query_id << '\t' << e.cluster << '\t' << e.judge_id << '\t' << buf << '\n';
        }
    }
    json config{
        {"human_qrels", "human.qrels"},
        {"judges", judges},
        {"embeddings", {{"path", "embeddings.qdv"}, {"format", "qdv"}}},
        {"hdbscan", {{"min_cluster_size", 15}, {"min_samples", 5}, {"metric", "euclidean"}}},
        {"normalize_embeddings", false},
        {"output_dir", "report"},
    };
    auto out = open("config.json");
    out << config.dump(2) << '\n';
}

} // namespace qdbias
