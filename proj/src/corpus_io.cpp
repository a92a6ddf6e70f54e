#include "qdbias/corpus_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string_view>

#include "qdbias/error.hpp"

namespace qdbias {

namespace {

std::vector<std::string_view> split_whitespace(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r' ||
                                   line[i] == '\v' || line[i] == '\f'))
            ++i;
        std::size_t start = i;
        while (i < line.size() && !(line[i] == ' ' || line[i] == '\t' || line[i] == '\r' ||
                                    line[i] == '\v' || line[i] == '\f'))
            ++i;
        if (i > start) fields.push_back(line.substr(start, i - start));
    }
    return fields;
}

void check_grade(int grade) {
    if (grade < 0 || grade > 3)
        throw RangeError("grade " + std::to_string(grade) + " outside [0,3]");
}

} // namespace

ParsedQrels parse_qrels(std::istream& in) {
    ParsedQrels out;
    std::map<PairKey, std::size_t> seen;
    std::vector<bool> superseded;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto fields = split_whitespace(line);
        if (fields.empty()) continue;
        if (fields.size() < 4)
            throw ParseError(line_no, "expected 'qid iter docid grade', got " +
                                          std::to_string(fields.size()) + " field(s)");
        int grade = 0;
        auto g = fields[3];
        auto [ptr, ec] = std::from_chars(g.data(), g.data() + g.size(), grade);
        if (ec != std::errc() || ptr != g.data() + g.size())
            throw ParseError(line_no, "grade '" + std::string(g) + "' is not an integer");
        try {
            check_grade(grade);
        } catch (const RangeError& e) {
            throw RangeError("line " + std::to_string(line_no) + ": " + e.what());
        }

        PairKey key{std::string(fields[0]), std::string(fields[2])};
        auto [it, inserted] = seen.try_emplace(key, out.judgments.size());
        if (!inserted) {
            superseded[it->second] = true;
            it->second = out.judgments.size();
            ++out.duplicate_count;
        }
        out.judgments.push_back({std::move(key.query_id), std::move(key.doc_id), grade});
        superseded.push_back(false);
    }
    if (out.duplicate_count > 0) {
        std::vector<GradedJudgment> kept;
        kept.reserve(out.judgments.size() - out.duplicate_count);
        for (std::size_t i = 0; i < out.judgments.size(); ++i)
            if (!superseded[i]) kept.push_back(std::move(out.judgments[i]));
        out.judgments = std::move(kept);
    }
    return out;
}

ParsedQrels read_qrels_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open qrels file: " + path);
    try {
        return parse_qrels(in);
    } catch (const ParseError& e) {
        throw ParseError(e.line(), path + ": " + e.what());
    } catch (const RangeError& e) {
        throw RangeError(path + ": " + e.what());
    }
}

void write_qrels(std::ostream& out, const std::vector<GradedJudgment>& judgments) {
    for (const auto& j : judgments) out << j.query_id << " 0 " << j.doc_id << ' ' << j.grade << '\n';
}

Label binarize(int grade, int threshold) {
    check_grade(grade);
    return grade >= threshold ? 1 : 0;
}

std::size_t JudgmentMatrix::judge_index(const std::string& name) const {
    auto it = std::find(judge_names.begin(), judge_names.end(), name);
    if (it == judge_names.end()) throw std::out_of_range("unknown judge: " + name);
    return static_cast<std::size_t>(it - judge_names.begin());
}

JudgmentMatrix align_judgments(const std::vector<GradedJudgment>& human,
                               const std::vector<NamedJudgments>& judges, int threshold) {
    {
        std::set<std::string> names;
        for (const auto& j : judges)
            if (!names.insert(j.name).second) throw AlignmentError("duplicate judge name: " + j.name);
    }

    auto index = [](const std::vector<GradedJudgment>& list) {
        std::map<PairKey, int> m;
        for (const auto& j : list) m[PairKey{j.query_id, j.doc_id}] = j.grade;
        return m;
    };

    auto human_map = index(human);
    std::vector<std::map<PairKey, int>> judge_maps;
    judge_maps.reserve(judges.size());
    for (const auto& j : judges) judge_maps.push_back(index(j.judgments));

    std::set<PairKey> all_keys;
    for (const auto& [k, g] : human_map) all_keys.insert(k);
    for (const auto& m : judge_maps)
        for (const auto& [k, g] : m) all_keys.insert(k);

    JudgmentMatrix matrix;
    matrix.judges.resize(judges.size());
    for (const auto& j : judges) matrix.judge_names.push_back(j.name);

    // human_map is ordered by (query_id, doc_id), so the output is too.
    for (const auto& [key, grade] : human_map) {
        bool everywhere = std::all_of(judge_maps.begin(), judge_maps.end(),
                                      [&](const auto& m) { return m.count(key) > 0; });
        if (!everywhere) continue;
        matrix.pairs.push_back(key);
        matrix.human.push_back(binarize(grade, threshold));
        for (std::size_t j = 0; j < judge_maps.size(); ++j)
            matrix.judges[j].push_back(binarize(judge_maps[j].at(key), threshold));
    }

    if (matrix.pairs.empty()) {
        std::ostringstream msg;
        msg << "no (query, doc) pair is judged by every rater; key counts: human=" << human_map.size();
        for (std::size_t j = 0; j < judges.size(); ++j)
            msg << ", " << judges[j].name << '=' << judge_maps[j].size();
        throw AlignmentError(msg.str());
    }
    matrix.dropped_count = all_keys.size() - matrix.pairs.size();
    return matrix;
}

CorpusStats corpus_stats(const JudgmentMatrix& matrix) {
    if (matrix.pairs.empty()) throw InsufficientDataError("corpus_stats on an empty judgment matrix");
    std::set<std::string_view> queries, docs;
    for (const auto& p : matrix.pairs) {
        queries.insert(p.query_id);
        docs.insert(p.doc_id);
    }
    CorpusStats s;
    s.n_queries = queries.size();
    s.n_documents = docs.size();
    s.n_judgments = matrix.pairs.size();
    auto relevant = static_cast<std::size_t>(std::count(matrix.human.begin(), matrix.human.end(), Label{1}));
    s.pct_relevant = 100.0 * static_cast<double>(relevant) / static_cast<double>(s.n_judgments);
    s.pct_nonrelevant = 100.0 * static_cast<double>(s.n_judgments - relevant) / static_cast<double>(s.n_judgments);
    return s;
}

void write_matrix_tsv(std::ostream& out, const JudgmentMatrix& matrix) {
    out << "query_id\tdoc_id\thuman";
    for (const auto& name : matrix.judge_names) out << '\t' << name;
    out << '\n';
    for (std::size_t i = 0; i < matrix.pairs.size(); ++i) {
        out << matrix.pairs[i].query_id << '\t' << matrix.pairs[i].doc_id << '\t' << int(matrix.human[i]);
        for (const auto& labels : matrix.judges) out << '\t' << int(labels[i]);
        out << '\n';
    }
}

} // namespace qdbias
