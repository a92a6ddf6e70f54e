// Acceptance runner: one PASS/FAIL line per criterion.
//
// Usage: qdbias_acceptance [--only N]
// Exit codes: 0 all selected criteria pass, 1 a criterion failed,
// 77 the only failures are criteria whose external data is not available.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "support/oracles.hpp"
#include "qdbias/agreement.hpp"
#include "qdbias/bland_altman.hpp"
#include "qdbias/corpus_io.hpp"
#include "qdbias/embedding_store.hpp"
#include "qdbias/hdbscan.hpp"
#include "qdbias/pipeline.hpp"
#include "qdbias/synth.hpp"

using namespace qdbias;
namespace fs = std::filesystem;

namespace {

constexpr int kExitUnavailable = 77;

struct Outcome {
    bool pass = false;
    std::string detail;
    bool unavailable = false;
};

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s.precision(precision);
    s << std::fixed << v;
    return s.str();
}

std::vector<Label> expand(std::size_t n11, std::size_t n10, std::size_t n01, std::size_t n00, bool rater_a) {
    std::vector<Label> out;
    auto put = [&](std::size_t count, Label a, Label b) { out.insert(out.end(), count, rater_a ? a : b); };
    put(n11, 1, 1);
    put(n10, 1, 0);
    put(n01, 0, 1);
    put(n00, 0, 0);
    return out;
}

std::string sci(double v) {
    std::ostringstream s;
    s.precision(2);
    s << std::scientific << v;
    return s.str();
}

bool rounds_to(double value, double shown) { return std::abs(value - shown) < 0.5e-4; }

// 1. Closed forms against an independent oracle, plus two hand-derived tables.
Outcome agreement_oracle() {
    Stopwatch clock;
    std::mt19937_64 gen(20260101);
    std::uniform_int_distribution<std::size_t> count(0, 60);
    double worst = 0.0;
    std::size_t definedness_mismatch = 0, tables = 0;
    while (tables < 1000) {
        const std::size_t n11 = count(gen), n10 = count(gen), n01 = count(gen), n00 = count(gen);
        if (n11 + n10 + n01 + n00 == 0) continue;
        ++tables;
        // Tabulate from label sequences so the counting path is exercised too.
        const auto a = expand(n11, n10, n01, n00, true), b = expand(n11, n10, n01, n00, false);
        const auto ac1 = gwet_ac1(a, b);
        const auto kappa = cohen_kappa(a, b);
        const double d11 = static_cast<double>(n11), d10 = static_cast<double>(n10), d01 = static_cast<double>(n01),
                     d00 = static_cast<double>(n00);
        worst = std::max(worst, std::abs(*ac1.value - oracle::ac1(d11, d10, d01, d00)));
        const auto expected_kappa = oracle::kappa(d11, d10, d01, d00);
        if (expected_kappa.has_value() != kappa.value.has_value()) ++definedness_mismatch;
        else if (expected_kappa) worst = std::max(worst, std::abs(*kappa.value - *expected_kappa));
    }

    const ContingencyTable f1{1, 1, 0, 8}, f2{0, 3, 2, 95};
    const double f1_ac1 = *gwet_ac1(f1).value, f1_kappa = *cohen_kappa(f1).value;
    const double f2_ac1 = *gwet_ac1(f2).value, f2_kappa = *cohen_kappa(f2).value;
    const bool fixtures = rounds_to(f1_ac1, 0.8658) && rounds_to(f1_kappa, 0.6154) && rounds_to(f2_ac1, 0.9474) &&
                          rounds_to(f2_kappa, -0.0246) &&
                          std::abs(f1_ac1 - oracle::ac1(1, 1, 0, 8)) <= 1e-12 &&
                          std::abs(f2_kappa - *oracle::kappa(0, 3, 2, 95)) <= 1e-12;
    const double elapsed = clock.seconds();
    const bool pass = worst <= 1e-12 && definedness_mismatch == 0 && fixtures && elapsed < 1.0;
    return {pass, std::to_string(tables) + " tables, max |error| " + sci(worst) + ", undefined mismatches " +
                      std::to_string(definedness_mismatch) + "; fixtures AC1 " + fmt(f1_ac1) + " / kappa " +
                      fmt(f1_kappa) + " and AC1 " + fmt(f2_ac1) + " / kappa " + fmt(f2_kappa) + "; " +
                      fmt(elapsed, 3) + " s (limit 1 s)"};
}

// 2. Imbalanced tables where agreed positives are rare relative to disagreements.
Outcome kappa_paradox() {
    Stopwatch clock;
    std::size_t members = 0, kappa_over = 0, ac1_under = 0;
    double max_kappa = -1.0, min_ac1 = 2.0;
    for (std::size_t n = 100; n <= 1000; n += 100) {
        const std::size_t cap = n / 10;
        for (std::size_t n11 = 0; n11 <= cap; ++n11)
            for (std::size_t n10 = 0; n10 <= cap; ++n10)
                for (std::size_t n01 = 0; n10 + n01 <= cap; ++n01) {
                    const std::size_t d = n10 + n01;
                    if (n11 + d > n) continue;
                    const std::size_t n00 = n - n11 - d;
                    if (10 * (n11 + n00) < 9 * n || 10 * n00 < 9 * n) continue;
                    if (8 * n11 > d || d == 0) continue;
                    const ContingencyTable t{n11, n10, n01, n00};
                    const auto kappa = cohen_kappa(t);
                    const double ac1 = *gwet_ac1(t).value;
                    ++members;
                    if (!kappa.value || *kappa.value > 0.2) ++kappa_over;
                    else max_kappa = std::max(max_kappa, *kappa.value);
                    if (ac1 < 0.8) ++ac1_under;
                    min_ac1 = std::min(min_ac1, ac1);
                }
    }
    const bool pass = members > 0 && kappa_over == 0 && ac1_under == 0;
    return {pass, std::to_string(members) + " tables (Pa >= 0.9, both-negative >= 0.9, n11 <= disagreements/8): max kappa " +
                      fmt(max_kappa) + ", min AC1 " + fmt(min_ac1) + ", kappa > 0.2 in " + std::to_string(kappa_over) +
                      ", AC1 < 0.8 in " + std::to_string(ac1_under) + "; " + fmt(clock.seconds(), 2) + " s"};
}

std::vector<std::vector<double>> as_double(const std::vector<std::vector<float>>& rows) {
    std::vector<std::vector<double>> out;
    for (const auto& r : rows) out.emplace_back(r.begin(), r.end());
    return out;
}

// 3. Exact MST, planted recovery, background rejection, worker invariance.
Outcome clustering() {
    Stopwatch clock;
    std::size_t mst_mismatch = 0;
    for (unsigned seed = 0; seed < 100; ++seed) {
        std::mt19937_64 gen(seed);
        const std::size_t n = 2 + seed % 7, dim = 1 + seed % 4;
        std::uniform_real_distribution<float> u(-1, 1);
        std::vector<std::vector<float>> rows(n, std::vector<float>(dim));
        for (auto& r : rows)
            for (auto& x : r) x = u(gen);
        const std::size_t k = 1 + seed % std::min<std::size_t>(3, n - 1);
        const auto pts = Points::from_rows(rows);
        const auto ref_cores = oracle::core_distances(as_double(rows), k);
        const auto mst = build_mst(pts, core_distances(pts, k));
        const auto ref = oracle::kruskal_mst(as_double(rows), ref_cores);
        bool same = mst.size() == ref.size();
        for (std::size_t i = 0; same && i < ref.size(); ++i) same = mst[i].weight == ref[i].w;
        if (!same) ++mst_mismatch;
    }

    ScenarioSpec spec;
    spec.n_clusters = 3;
    spec.dim = 16;
    spec.points_per_cluster = 100;
    spec.n_queries = 3;
    spec.cluster_spread = 0.05;
    spec.center_separation = 1.0;
    spec.judges = {{"judge", {0.0, 0.0}, {}, {}}};
    spec.seed = 7;
    const auto corpus = generate(spec);
    const auto planted = points_from(corpus.embeddings, corpus.matrix.pairs);
    const HdbscanParams params{15, 5, Metric::euclidean};
    const auto found = cluster(planted, params, 1);
    const double ari = oracle::adjusted_rand_index(found.labels, corpus.true_cluster);

    std::mt19937_64 gen(99);
    std::uniform_real_distribution<float> u(0, 1);
    std::vector<std::vector<float>> background(300, std::vector<float>(16));
    for (auto& r : background)
        for (auto& x : r) x = u(gen);
    const auto uniform = cluster(Points::from_rows(background), params, 1);
    const double noise_share = static_cast<double>(uniform.noise_count()) / 300.0;

    bool identical = true;
    for (unsigned w : {2u, 4u, 8u}) {
        const auto other = cluster(planted, params, w);
        identical = identical && other.labels == found.labels && other.stability == found.stability &&
                    build_mst(planted, core_distances(planted, 5, w), w) ==
                        build_mst(planted, core_distances(planted, 5, 1), 1);
    }
    const double elapsed = clock.seconds();
    const bool pass = mst_mismatch == 0 && ari >= 0.9 && noise_share >= 0.95 && identical && elapsed < 30.0;
    return {pass, "Kruskal mismatches " + std::to_string(mst_mismatch) + "/100; planted ARI " + fmt(ari) + " (" +
                      std::to_string(found.n_clusters) + " clusters); uniform noise share " + fmt(noise_share, 3) +
                      "; worker-invariant " + (identical ? "yes" : "no") + "; " + fmt(elapsed, 2) +
                      " s (limit 30 s)"};
}

// 4. The planted query is recovered through the full analysis over 100 seeds.
Outcome heuristic_recovery() {
    Stopwatch clock;
    testutil::TempDir dir;
    std::size_t recovered = 0, clean = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto corpus_dir = dir.str("seed" + std::to_string(seed));
        write_corpus(planted_bias_scenario(seed), corpus_dir);
        RunManifest manifest;
        const auto result = analyze(load_config(corpus_dir + "/config.json"), manifest);
        bool planted_ok = false, stray_d = false;
        for (const auto& v : result.bias.queries) {
            if (v.query_id == "q00")
                planted_ok = v.bias_prone && v.flags.absolute && v.flags.directional && v.rank == 1;
            else if (v.flags.directional)
                stray_d = true;
        }
        recovered += planted_ok;
        clean += !stray_d;
        fs::remove_all(corpus_dir);
    }
    const double elapsed = clock.seconds();
    const bool pass = recovered >= 95 && clean >= 95 && elapsed < 60.0;
    return {pass, "q00 bias-prone with A and D at rank 1 in " + std::to_string(recovered) +
                      "/100 seeds (need 95); no stray D in " + std::to_string(clean) + "/100 seeds (need 95); " +
                      fmt(elapsed, 2) + " s (limit 60 s)"};
}

// 5. Corpus statistics of the public DL-2019 / DL-2020 passage qrels.
Outcome dl_corpus_stats() {
    Stopwatch clock;
    struct Target {
        const char* env;
        const char* name;
        std::size_t queries;
        std::size_t judgments;
        double pct_relevant;
    };
    const Target targets[] = {{"QDBIAS_DL19_QRELS", "DL-2019", 43, 9260, 27.0},
                              {"QDBIAS_DL20_QRELS", "DL-2020", 54, 11386, 15.0}};
    std::string detail;
    bool pass = true, missing = false;
    for (const auto& t : targets) {
        const char* path = std::getenv(t.env);
        if (!path || !fs::is_regular_file(path)) {
            pass = false;
            missing = true;
            detail += std::string(t.name) + ": qrels not available (set " + t.env + "); ";
            continue;
        }
        const auto human = read_qrels_file(path);
        const auto stats = corpus_stats(align_judgments(human.judgments, {}));
        const bool ok = stats.n_queries == t.queries && stats.n_judgments == t.judgments &&
                        std::abs(stats.pct_relevant - t.pct_relevant) <= 0.05;
        pass = pass && ok;
        detail += std::string(t.name) + ": " + std::to_string(stats.n_queries) + " queries / " +
                  std::to_string(stats.n_judgments) + " judgments / " + fmt(stats.pct_relevant, 2) + "% relevant; ";
    }
    const double elapsed = clock.seconds();
    pass = pass && elapsed < 5.0;
    return {pass, detail + fmt(elapsed, 2) + " s (limit 5 s)", missing};
}

// Standard normal from two uniform draws, independent of the library generator.
double box_muller(std::mt19937_64& gen) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double u1 = 1.0 - u(gen), u2 = u(gen);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// 6. Bias and limits against the direct formula, and the coverage of the limits.
Outcome bland_altman() {
    Stopwatch clock;
    std::mt19937_64 gen(6);
    std::uniform_int_distribution<std::size_t> size(2, 200);
    std::uniform_real_distribution<double> value(-1.0, 1.0);
    double worst = 0.0;
    for (int set = 0; set < 1000; ++set) {
        const std::size_t n = size(gen);
        std::vector<PairedValue> paired;
        std::vector<double> a, b;
        for (std::size_t i = 0; i < n; ++i) {
            paired.push_back({"q" + std::to_string(i), value(gen), value(gen)});
            a.push_back(paired.back().a);
            b.push_back(paired.back().b);
        }
        const auto r = ba_stats(paired);
        const auto ref = oracle::bland_altman(a, b);
        worst = std::max({worst, std::abs(r.bias - ref.bias), std::abs(r.sd - ref.sd), std::abs(r.loa_low - ref.lo),
                          std::abs(r.loa_high - ref.hi)});
    }

    double low = 1.0, high = 0.0;
    std::size_t runs = 0, outside = 0;
    for (double sigma : {0.01, 1.0, 100.0})
        for (unsigned seed = 0; seed < 10; ++seed) {
            std::mt19937_64 g(1000 + seed);
            std::vector<PairedValue> paired;
            for (int i = 0; i < 500; ++i) {
                const double base = box_muller(g);
                paired.push_back({"q" + std::to_string(i), base + sigma * box_muller(g), base});
            }
            const auto r = ba_stats(paired);
            std::size_t within = 0;
            for (const auto& p : r.points) within += p.diff >= r.loa_low && p.diff <= r.loa_high;
            const double share = static_cast<double>(within) / 500.0;
            low = std::min(low, share);
            high = std::max(high, share);
            ++runs;
            outside += share < 0.92 || share > 0.98;
        }
    const bool pass = worst <= 1e-12 && outside == 0;
    return {pass, "1000 sets, max |error| " + sci(worst) + "; within-LoA share over " + std::to_string(runs) +
                      " runs of n=500 in [" + fmt(low, 3) + ", " + fmt(high, 3) + "] (need [0.92, 0.98]); " +
                      fmt(clock.seconds(), 2) + " s"};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Every file of a report tree; run timings are removed from the manifest.
std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), root).generic_string();
        auto text = slurp(e.path());
        if (rel == "manifest.json") {
            auto j = nlohmann::json::parse(text);
            j.erase("timings");
            text = j.dump();
        }
        files[rel] = std::move(text);
    }
    return files;
}

bool same_bits(const EmbeddingSet& x, const EmbeddingSet& y) {
    if (x.dimension() != y.dimension() || x.size() != y.size()) return false;
    auto i = x.records().begin();
    auto j = y.records().begin();
    for (; i != x.records().end(); ++i, ++j) {
        if (!(i->first == j->first)) return false;
        for (std::size_t d = 0; d < i->second.size(); ++d)
            if (std::bit_cast<std::uint32_t>(i->second[d]) != std::bit_cast<std::uint32_t>(j->second[d])) return false;
    }
    return true;
}

// 7. Reproducible report trees, lossless formats, and an 11k-pair run.
Outcome determinism_and_formats() {
    Stopwatch clock;
    testutil::TempDir dir;
    write_corpus(planted_bias_scenario(0), dir.str("planted"));
    auto cfg = load_config(dir.str("planted/config.json"));
    cfg.write_json = true;
    run_pipeline(cfg);
    const auto first = snapshot(cfg.output_dir);
    run_pipeline(cfg);
    const auto second = snapshot(cfg.output_dir);
    const bool deterministic = !first.empty() && first == second;

    std::mt19937_64 gen(77);
    std::uniform_real_distribution<float> u(-1e6f, 1e6f);
    EmbeddingSet set(24);
    const float specials[] = {0.0f, -0.0f, 1e-45f, -1e-45f, 1.17549435e-38f, 3.40282347e38f, -3.40282347e38f,
                              0.1f, 1.0f / 3.0f};
    for (int r = 0; r < 200; ++r) {
        std::vector<float> v(24);
        for (std::size_t d = 0; d < v.size(); ++d) v[d] = r < 9 && d == 0 ? specials[r] : u(gen) * std::exp2(-(r % 40));
        set.insert({"q" + std::to_string(r % 7), "d" + std::to_string(r)}, v);
    }
    std::stringstream qdv, tsv;
    write_qdv(set, qdv);
    write_qdv_tsv(set, tsv);
    const bool qdv_ok = same_bits(read_qdv(qdv), set);
    const bool tsv_ok = same_bits(parse_qdv_tsv(tsv), set);

    ScenarioSpec big;
    big.n_clusters = 40;
    big.dim = 32;
    big.points_per_cluster = 275;
    big.n_queries = 43;
    big.clusters_per_query = 3;
    big.cluster_spread = 0.05;
    big.center_separation = 1.0;
    big.noise_points = 0;
    big.judges = {{"judge0", {0.05, 0.05}, {}, {}}, {"judge1", {0.1, 0.02}, {}, {}}};
    big.seed = 11;
    const auto corpus = generate(big);
    write_corpus(corpus, dir.str("big"));
    Stopwatch big_clock;
    run_pipeline(load_config(dir.str("big/config.json")));
    const double big_seconds = big_clock.seconds();

    const bool pass = deterministic && qdv_ok && tsv_ok && corpus.matrix.size() >= 11000 && big_seconds < 300.0;
    return {pass, std::string("two planted runs byte-identical: ") + (deterministic ? "yes" : "no") + " (" +
                      std::to_string(first.size()) + " files); QDV1 round-trip " + (qdv_ok ? "exact" : "LOSSY") +
                      "; TSV round-trip " + (tsv_ok ? "exact" : "LOSSY") + "; " +
                      std::to_string(corpus.matrix.size()) + "-pair pipeline " + fmt(big_seconds, 1) +
                      " s (limit 300 s); total " + fmt(clock.seconds(), 1) + " s"};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

} // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria = {
        {1, "agreement-metric oracle", agreement_oracle},
        {2, "kappa paradox", kappa_paradox},
        {3, "clustering correctness", clustering},
        {4, "heuristic recovery", heuristic_recovery},
        {5, "corpus statistics", dl_corpus_stats},
        {6, "Bland-Altman correctness", bland_altman},
        {7, "determinism and formats", determinism_and_formats},
    };

    int only = 0;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--only" && i + 1 < argc) {
            only = std::atoi(argv[++i]);
        } else {
            std::cerr << "usage: qdbias_acceptance [--only N]\n";
            return 1;
        }
    }

    bool failed = false, failed_available = false;
    for (const auto& c : criteria) {
        if (only != 0 && c.id != only) continue;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << c.id << ". " << c.name << ": " << o.detail << std::endl;
        if (!o.pass) {
            failed = true;
            failed_available |= !o.unavailable;
        }
    }
    if (!failed) return 0;
    return failed_available ? 1 : kExitUnavailable;
}
