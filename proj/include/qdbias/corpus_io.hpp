/// @file corpus_io.hpp
/// @brief TREC qrels parsing, binarization and rater alignment.
#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "qdbias/types.hpp"

namespace qdbias {

struct GradedJudgment {
    std::string query_id;
    std::string doc_id;
    int grade = 0;

    bool operator==(const GradedJudgment&) const = default;
};

struct ParsedQrels {
    std::vector<GradedJudgment> judgments;
    /// Lines whose (query, doc) key repeated an earlier line.
    std::size_t duplicate_count = 0;
};

/// Parses `qid 0 docid grade` lines. Blank lines are skipped, CRLF is accepted,
/// fields beyond the fourth are ignored. A repeated key keeps its last
/// occurrence (at that occurrence's position) and bumps `duplicate_count`.
/// Throws ParseError on malformed lines and RangeError on grades outside [0,3].
ParsedQrels parse_qrels(std::istream& in);

ParsedQrels read_qrels_file(const std::string& path);

/// Writes the canonical `qid 0 docid grade` form, one judgment per line.
void write_qrels(std::ostream& out, const std::vector<GradedJudgment>& judgments);

inline constexpr int kDefaultRelevanceThreshold = 2;

/// 1 iff grade >= threshold. Throws RangeError outside [0,3].
Label binarize(int grade, int threshold = kDefaultRelevanceThreshold);

struct NamedJudgments {
    std::string name;
    std::vector<GradedJudgment> judgments;
};

/// Human and LLM labels over the pairs every rater judged.
struct JudgmentMatrix {
    std::vector<PairKey> pairs;
    std::vector<Label> human;
    std::vector<std::string> judge_names;
    /// judges[j][i] is judge j's label for pairs[i].
    std::vector<std::vector<Label>> judges;
    /// |union of rater keys| - |intersection|.
    std::size_t dropped_count = 0;

    std::size_t size() const noexcept { return pairs.size(); }
    /// Index of a judge by name; throws std::out_of_range if unknown.
    std::size_t judge_index(const std::string& name) const;
};

/// Inner join of all raters on (query_id, doc_id), binarized, sorted by key.
/// Throws AlignmentError when the join is empty or judge names repeat.
JudgmentMatrix align_judgments(const std::vector<GradedJudgment>& human,
                               const std::vector<NamedJudgments>& judges,
                               int threshold = kDefaultRelevanceThreshold);

struct CorpusStats {
    std::size_t n_queries = 0;
    std::size_t n_documents = 0;
    std::size_t n_judgments = 0;
    double pct_relevant = 0.0;
    double pct_nonrelevant = 0.0;
};

/// Counts over the human labels. Throws InsufficientDataError on an empty matrix.
CorpusStats corpus_stats(const JudgmentMatrix& matrix);

/// TSV with header `query_id doc_id human <judge>...`.
void write_matrix_tsv(std::ostream& out, const JudgmentMatrix& matrix);

} // namespace qdbias
