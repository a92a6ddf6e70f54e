#include <doctest.h>

#include <sstream>

#include "qdbias/corpus_io.hpp"
#include "qdbias/error.hpp"

using namespace qdbias;

namespace {

ParsedQrels parse(const std::string& text) {
    std::istringstream in(text);
    return parse_qrels(in);
}

std::vector<GradedJudgment> qrels(std::initializer_list<std::pair<const char*, int>> docs) {
    std::vector<GradedJudgment> out;
    for (auto [d, g] : docs) out.push_back({"q", d, g});
    return out;
}

} // namespace

TEST_CASE("parse_qrels reads the four TREC fields") {
    auto p = parse("19335 0 1017759 0\n1110199 0 8726436 3\n");
    REQUIRE(p.judgments.size() == 2);
    CHECK(p.judgments[0] == GradedJudgment{"19335", "1017759", 0});
    CHECK(p.judgments[1] == GradedJudgment{"1110199", "8726436", 3});
    CHECK(p.duplicate_count == 0);
}

TEST_CASE("parse_qrels accepts CRLF, tabs, blank lines and extra fields") {
    auto p = parse("a\t0\tx\t2\r\n\r\n  b 0 y 1 extra\n");
    REQUIRE(p.judgments.size() == 2);
    CHECK(p.judgments[0] == GradedJudgment{"a", "x", 2});
    CHECK(p.judgments[1] == GradedJudgment{"b", "y", 1});
}

TEST_CASE("parse_qrels reports the failing line") {
    try {
        parse("19335 0 X\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 1);
    }
    try {
        parse("a 0 x 1\na 0 y two\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(parse("a 0 x 4\n"), RangeError);
    CHECK_THROWS_AS(parse("a 0 x -1\n"), RangeError);
}

TEST_CASE("duplicate keys keep the last grade and are counted") {
    auto p = parse("q 0 d1 0\nq 0 d2 1\nq 0 d1 3\n");
    CHECK(p.duplicate_count == 1);
    REQUIRE(p.judgments.size() == 2);
    CHECK(p.judgments[0] == GradedJudgment{"q", "d2", 1});
    CHECK(p.judgments[1] == GradedJudgment{"q", "d1", 3});
}

TEST_CASE("write then parse round-trips") {
    std::vector<GradedJudgment> in{{"q1", "d1", 0}, {"q1", "d2", 3}, {"q2", "d1", 2}, {"q3", "x", 1}};
    std::ostringstream out;
    write_qrels(out, in);
    CHECK(parse(out.str()).judgments == in);
}

TEST_CASE("binarize maps 2 and 3 to relevant") {
    CHECK(binarize(0) == 0);
    CHECK(binarize(1) == 0);
    CHECK(binarize(2) == 1);
    CHECK(binarize(3) == 1);
    CHECK(binarize(1, 1) == 1);
    CHECK_THROWS_AS(binarize(4), RangeError);
    CHECK_THROWS_AS(binarize(-1), RangeError);
}

TEST_CASE("align_judgments is an inner join with a dropped count") {
    auto m = align_judgments(qrels({{"A", 3}, {"B", 0}, {"C", 2}}), {{"j", qrels({{"A", 1}, {"B", 2}})}});
    REQUIRE(m.size() == 2);
    CHECK(m.pairs[0].doc_id == "A");
    CHECK(m.pairs[1].doc_id == "B");
    CHECK(m.human == std::vector<Label>{1, 0});
    CHECK(m.judges[0] == std::vector<Label>{0, 1});
    CHECK(m.dropped_count == 1);

    auto one = align_judgments(qrels({{"A", 2}}), {{"j", qrels({{"A", 2}})}});
    CHECK(one.size() == 1);
    CHECK(one.dropped_count == 0);

    CHECK_THROWS_AS(align_judgments(qrels({{"A", 2}}), {{"j", qrels({{"B", 2}})}}), AlignmentError);
    CHECK_THROWS_AS(align_judgments(qrels({{"A", 2}}), {{"j", qrels({{"A", 2}})}, {"j", qrels({{"A", 2}})}}),
                    AlignmentError);
}

TEST_CASE("dropped_count counts the union minus the intersection over all raters") {
    // human {A,B,C,D}, j1 {A,B,E}, j2 {A,B,C}: union {A..E} = 5, intersection {A,B} = 2.
    auto m = align_judgments(qrels({{"A", 0}, {"B", 0}, {"C", 0}, {"D", 0}}),
                             {{"j1", qrels({{"A", 0}, {"B", 0}, {"E", 0}})}, {"j2", qrels({{"A", 0}, {"B", 0}, {"C", 0}})}});
    CHECK(m.size() == 2);
    CHECK(m.dropped_count == 3);
    CHECK(m.judge_index("j2") == 1);
    CHECK_THROWS(m.judge_index("nobody"));
}

TEST_CASE("corpus_stats counts human labels") {
    std::vector<GradedJudgment> h{{"q1", "a", 2}, {"q1", "b", 0}, {"q2", "a", 0}, {"q2", "c", 1}};
    auto m = align_judgments(h, {{"j", h}});
    auto s = corpus_stats(m);
    CHECK(s.n_queries == 2);
    CHECK(s.n_documents == 3);
    CHECK(s.n_judgments == 4);
    CHECK(s.pct_relevant == doctest::Approx(25.0));
    CHECK(s.pct_relevant + s.pct_nonrelevant == doctest::Approx(100.0));
    CHECK_THROWS_AS(corpus_stats(JudgmentMatrix{}), InsufficientDataError);
}

TEST_CASE("matrix export has one column per judge") {
    std::vector<GradedJudgment> h{{"q", "a", 2}};
    auto m = align_judgments(h, {{"x", h}, {"y", {{"q", "a", 0}}}});
    std::ostringstream out;
    write_matrix_tsv(out, m);
    CHECK(out.str() == "query_id\tdoc_id\thuman\tx\ty\nq\ta\t1\t1\t0\n");
}
