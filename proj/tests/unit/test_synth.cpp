#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "../support/oracles.hpp"
#include "qdbias/error.hpp"
#include "qdbias/synth.hpp"
#include "qdbias/variation.hpp"

using namespace qdbias;

namespace {

ScenarioSpec small_spec(std::uint64_t seed) {
    ScenarioSpec s;
    s.n_clusters = 3;
    s.dim = 8;
    s.points_per_cluster = 30;
    s.n_queries = 3;
    s.noise_points = 5;
    s.seed = seed;
    s.judges.push_back({"a", {0.1, 0.2}, {}, {}});
    s.judges.push_back({"b", {0.0, 0.0}, {{2, {0.5, 0.5}}}, {}});
    return s;
}

} // namespace

TEST_CASE("expected AC1 closed form") {
    CHECK(expected_ac1(0.5, 0, 0) == 1.0);
    CHECK(expected_ac1(0.5, 0.5, 0.5) == doctest::Approx(0.0));
    // Pa = 0.7, judge marginal 0, pi = 0.15, Pe = 0.255
    CHECK(expected_ac1(0.3, 0, 1) == doctest::Approx((0.7 - 0.255) / (1 - 0.255)));
    CHECK(expected_ac1(0.3, 0, 1) == doctest::Approx(0.597).epsilon(1e-3));
    // Independent judge: the same value the AC1 oracle gives on the expected table.
    const double p = 0.4, a = 0.2, b = 0.1;
    CHECK(expected_ac1(p, a, b) ==
          doctest::Approx(oracle::ac1(p * (1 - b), p * b, (1 - p) * a, (1 - p) * (1 - a))));
}

TEST_CASE("query names sort in index order") {
    CHECK(query_name(0, 20) == "q00");
    CHECK(query_name(7, 100) == "q07");
    CHECK(query_name(7, 101) == "q007");
    CHECK(query_name(99, 101) < query_name(100, 101));
}

TEST_CASE("generation is a pure function of the spec") {
    auto a = generate(small_spec(5));
    auto b = generate(small_spec(5));
    CHECK(a.embeddings == b.embeddings);
    CHECK(a.matrix.human == b.matrix.human);
    CHECK(a.matrix.judges == b.matrix.judges);
    CHECK(a.human_qrels == b.human_qrels);
    auto c = generate(small_spec(6));
    CHECK_FALSE(c.embeddings == a.embeddings);
}

TEST_CASE("corpus components are key-consistent") {
    auto s = small_spec(1);
    auto c = generate(s);
    const std::size_t n = s.n_clusters * s.points_per_cluster + s.noise_points;
    CHECK(c.matrix.size() == n);
    CHECK(c.embeddings.size() == n);
    CHECK(c.true_cluster.size() == n);
    CHECK(c.human_qrels.size() == n);
    REQUIRE(c.judge_qrels.size() == 2);
    auto realigned = align_judgments(c.human_qrels, c.judge_qrels);
    CHECK(realigned.pairs == c.matrix.pairs);
    CHECK(realigned.human == c.matrix.human);
    CHECK(realigned.judges == c.matrix.judges);
    for (const auto& k : c.matrix.pairs) CHECK(c.embeddings.find(k).has_value());
    std::size_t noise = 0;
    for (int t : c.true_cluster) noise += t == -1;
    CHECK(noise == s.noise_points);
    CHECK(std::is_sorted(c.matrix.pairs.begin(), c.matrix.pairs.end()));
}

TEST_CASE("zero flip rates copy the human labels") {
    auto s = small_spec(2);
    s.judges = {{"copy", {0, 0}, {}, {}}};
    auto c = generate(s);
    CHECK(c.matrix.judges[0] == c.matrix.human);
    for (const auto& e : c.expected_cell_ac1) CHECK(e.ac1 == 1.0);
}

TEST_CASE("infeasible or invalid specs raise SpecError") {
    auto s = small_spec(0);
    s.clusters_per_query = 4;
    CHECK_THROWS_AS(generate(s), SpecError);

    // More clusters than dimensions: centers come from rejection sampling.
    auto packed = small_spec(0);
    packed.n_clusters = 12;
    packed.dim = 2;
    packed.n_queries = 12;
    auto c = generate(packed);
    CHECK(c.matrix.size() == 12 * packed.points_per_cluster + packed.noise_points);

    auto bad = small_spec(0);
    bad.judges.push_back({"a", {1.5, 0}, {}, {}});
    try {
        bad.validate();
        FAIL("expected a spec error");
    } catch (const SpecError& e) {
        const std::string what = e.what();
        CHECK(what.find("duplicate judge name") != std::string::npos);
        CHECK(what.find("outside [0,1]") != std::string::npos);
    }
}

TEST_CASE("scenario JSON round-trips") {
    auto s = planted_bias_spec(9);
    auto back = scenario_from_json(scenario_to_json(s));
    CHECK(scenario_to_json(back) == scenario_to_json(s));
    auto g1 = generate(s), g2 = generate(back);
    CHECK(g1.embeddings == g2.embeddings);
    CHECK(g1.matrix.judges == g2.matrix.judges);

    auto preset = scenario_from_json(R"({"preset": "planted_bias", "seed": 9})");
    CHECK(scenario_to_json(preset) == scenario_to_json(s));
    CHECK_THROWS_AS(scenario_from_json("{"), SpecError);
    CHECK_THROWS_AS(scenario_from_json(R"({"preset": "other"})"), SpecError);
}

TEST_CASE("planted scenario shape") {
    auto s = planted_bias_spec(0);
    CHECK(s.query_count() == 20);
    CHECK(s.judges.size() == 4);
    CHECK(s.well_separated());
    auto c = planted_bias_scenario(0);
    std::map<std::tuple<std::string, int, std::string>, double> expected;
    for (const auto& e : c.expected_cell_ac1) expected[{e.query_id, e.cluster, e.judge_id}] = e.ac1;
    CHECK(expected.at({"q00", 0, "judge0"}) == 1.0);
    CHECK(expected.at({"q00", 1, "judge1"}) == doctest::Approx(0.0));
    CHECK(expected.at({"q00", 1, "judge2"}) == doctest::Approx(expected_ac1(0.5, 0.05, 0.05)));
}

TEST_CASE("empirical cell AC1 converges to the closed form at 200 pairs per cell") {
    // Per-cell sampling sd is about 0.04 here, so over 80 cells a few land past 0.1 by chance.
    // The check is on the share of cells within 0.1 and on the mean signed error.
    HeuristicConfig cfg;
    std::size_t total = 0, within = 0;
    double signed_sum = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        ScenarioSpec s;
        s.n_clusters = 2;
        s.dim = 4;
        s.query_layout = {{{0, 1}, 200}};
        s.human_relevant_rate = {0.5, 0.3};
        s.seed = seed;
        s.judges = {{"j", {0.1, 0.2}, {{1, {0.05, 0.3}}}, {}}, {"k", {0.2, 0.05}, {}, {}}};
        auto c = generate(s);
        for (const auto& judge : c.matrix.judge_names) {
            auto cells = per_cell_ac1(c.matrix, c.true_cluster, judge, cfg);
            REQUIRE(cells.size() == 2);
            for (const auto& cell : cells)
                for (const auto& e : c.expected_cell_ac1)
                    if (e.judge_id == judge && e.cluster == cell.cluster_id) {
                        const double d = *cell.ac1.value - e.ac1;
                        ++total;
                        within += std::abs(d) <= 0.1;
                        signed_sum += d;
                    }
        }
    }
    REQUIRE(total == 80);
    CHECK(static_cast<double>(within) / static_cast<double>(total) >= 0.95);
    CHECK(std::abs(signed_sum / static_cast<double>(total)) <= 0.02);
}

TEST_CASE("write_corpus emits a runnable corpus") {
    testutil::TempDir dir;
    write_corpus(generate(small_spec(3)), dir.str());
    for (const char* f : {"human.qrels", "judge_a.qrels", "judge_b.qrels", "embeddings.qdv", "truth.tsv",
                          "expected_ac1.tsv", "config.json"})
        CHECK(std::filesystem::exists(dir.path() / f));
}
