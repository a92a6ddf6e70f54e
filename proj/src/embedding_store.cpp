#include "qdbias/embedding_store.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string_view>

#include "qdbias/corpus_io.hpp"
#include "qdbias/error.hpp"

namespace qdbias {

static_assert(std::endian::native == std::endian::little, "QDV1 I/O assumes a little-endian host");
static_assert(std::numeric_limits<float>::is_iec559);

const char* to_string(FormatErrorKind kind) noexcept {
    switch (kind) {
    case FormatErrorKind::bad_magic: return "bad magic";
    case FormatErrorKind::bad_header: return "bad header";
    case FormatErrorKind::truncated: return "truncated stream";
    case FormatErrorKind::duplicate_key: return "duplicate key";
    case FormatErrorKind::non_finite: return "non-finite component";
    case FormatErrorKind::dimension_mismatch: return "dimension mismatch";
    case FormatErrorKind::io: return "I/O failure";
    }
    return "unknown";
}

namespace {

constexpr char kMagic[4] = {'Q', 'D', 'V', '1'};

std::string describe(const PairKey& key) { return "(" + key.query_id + ", " + key.doc_id + ")"; }

template <typename T>
T read_le(std::istream& in, const char* what) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (in.gcount() != static_cast<std::streamsize>(sizeof(T)))
        throw FormatError(FormatErrorKind::truncated, std::string("while reading ") + what);
    return value;
}

template <typename T>
void write_le(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

std::string read_token(std::istream& in, const char* what) {
    auto len = read_le<std::uint16_t>(in, what);
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (in.gcount() != len) throw FormatError(FormatErrorKind::truncated, std::string("while reading ") + what);
    return s;
}

void write_token(std::ostream& out, const std::string& s) {
    if (s.size() > std::numeric_limits<std::uint16_t>::max())
        throw FormatError(FormatErrorKind::io, "identifier longer than 65535 bytes");
    write_le(out, static_cast<std::uint16_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

double norm_of(std::span<const float> v) {
    double sum = 0.0;
    for (float x : v) sum += static_cast<double>(x) * x;
    return std::sqrt(sum);
}

} // namespace

EmbeddingSet::EmbeddingSet(std::uint32_t dimension) : dimension_(dimension) {
    if (dimension == 0) throw FormatError(FormatErrorKind::bad_header, "dimension must be positive");
}

void EmbeddingSet::insert(PairKey key, std::span<const float> vector) {
    if (vector.size() != dimension_)
        throw FormatError(FormatErrorKind::dimension_mismatch,
                          describe(key) + " has " + std::to_string(vector.size()) + " components, expected " +
                              std::to_string(dimension_));
    for (float x : vector)
        if (!std::isfinite(x)) throw FormatError(FormatErrorKind::non_finite, describe(key));
    if (records_.count(key)) throw FormatError(FormatErrorKind::duplicate_key, describe(key));
    records_.emplace(std::move(key), std::vector<float>(vector.begin(), vector.end()));
    normalized_ = normalized_ && std::abs(norm_of(vector) - 1.0) <= 1e-5;
}

std::optional<std::span<const float>> EmbeddingSet::find(const PairKey& key) const {
    auto it = records_.find(key);
    if (it == records_.end()) return std::nullopt;
    return std::span<const float>(it->second);
}

bool EmbeddingSet::all_unit_norm(double tolerance) const {
    for (const auto& [key, v] : records_)
        if (std::abs(norm_of(v) - 1.0) > tolerance) return false;
    return true;
}

EmbeddingSet read_qdv(std::istream& in) {
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError(FormatErrorKind::bad_magic, "stream does not start with QDV1");
    auto dim = read_le<std::uint32_t>(in, "dimension");
    auto count = read_le<std::uint64_t>(in, "record count");
    if (dim == 0) throw FormatError(FormatErrorKind::bad_header, "dimension must be positive");

    EmbeddingSet set(dim);
    std::vector<float> buf(dim);
    for (std::uint64_t r = 0; r < count; ++r) {
        auto qid = read_token(in, "query id");
        auto docid = read_token(in, "doc id");
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(dim * sizeof(float)));
        if (in.gcount() != static_cast<std::streamsize>(dim * sizeof(float)))
            throw FormatError(FormatErrorKind::truncated,
                              "record " + std::to_string(r) + " of " + std::to_string(count));
        set.insert(PairKey{std::move(qid), std::move(docid)}, buf);
    }
    return set;
}

EmbeddingSet read_qdv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(FormatErrorKind::io, "cannot open " + path);
    return read_qdv(in);
}

std::size_t write_qdv(const EmbeddingSet& set, std::ostream& out) {
    std::size_t bytes = 0;
    out.write(kMagic, 4);
    write_le(out, set.dimension());
    write_le(out, static_cast<std::uint64_t>(set.size()));
    bytes += 16;
    for (const auto& [key, v] : set.records()) {
        write_token(out, key.query_id);
        write_token(out, key.doc_id);
        out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
        bytes += 4 + key.query_id.size() + key.doc_id.size() + v.size() * sizeof(float);
    }
    if (!out) throw FormatError(FormatErrorKind::io, "write failed");
    return bytes;
}

std::size_t write_qdv_file(const EmbeddingSet& set, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(FormatErrorKind::io, "cannot create " + path);
    auto n = write_qdv(set, out);
    out.flush();
    if (!out) throw FormatError(FormatErrorKind::io, "write failed: " + path);
    return n;
}

EmbeddingSet parse_qdv_tsv(std::istream& in) {
    std::optional<EmbeddingSet> set;
    std::string line;
    std::size_t line_no = 0;
    std::vector<float> values;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto t1 = line.find('\t');
        auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
        if (t2 == std::string::npos) throw ParseError(line_no, "expected query_id<TAB>doc_id<TAB>vector");
        PairKey key{line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1)};
        if (key.query_id.empty() || key.doc_id.empty()) throw ParseError(line_no, "empty identifier");

        values.clear();
        std::string_view rest(line);
        rest.remove_prefix(t2 + 1);
        while (true) {
            auto comma = rest.find(',');
            auto tok = rest.substr(0, comma);
            while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
            while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
            float v = 0;
            auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (ec != std::errc() || ptr != tok.data() + tok.size())
                throw ParseError(line_no, "bad float '" + std::string(tok) + "'");
            values.push_back(v);
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (!set) set.emplace(static_cast<std::uint32_t>(values.size()));
        if (values.size() != set->dimension())
            throw FormatError(FormatErrorKind::dimension_mismatch,
                              "line " + std::to_string(line_no) + ": " + std::to_string(values.size()) +
                                  " components, expected " + std::to_string(set->dimension()));
        try {
            set->insert(std::move(key), values);
        } catch (const FormatError& e) {
            throw FormatError(e.kind(), "line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!set) throw FormatError(FormatErrorKind::bad_header, "TSV embedding file has no records");
    return std::move(*set);
}

EmbeddingSet read_qdv_tsv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError(FormatErrorKind::io, "cannot open " + path);
    return parse_qdv_tsv(in);
}

void write_qdv_tsv(const EmbeddingSet& set, std::ostream& out) {
    char buf[64];
    for (const auto& [key, v] : set.records()) {
        out << key.query_id << '\t' << key.doc_id << '\t';
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) out << ',';
            auto res = std::to_chars(buf, buf + sizeof buf, v[i]);
            out.write(buf, res.ptr - buf);
        }
        out << '\n';
    }
}

EmbeddingSet l2_normalize(const EmbeddingSet& set) {
    EmbeddingSet out(set.dimension());
    for (const auto& [key, v] : set.records()) {
        double n = norm_of(v);
        if (n == 0.0) throw DegenerateVectorError("zero vector for " + describe(key));
        std::vector<float> scaled(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) scaled[i] = static_cast<float>(v[i] / n);
        out.records_.emplace(key, std::move(scaled));
    }
    out.normalized_ = true;
    return out;
}

std::vector<PairKey> missing_embeddings(const EmbeddingSet& set, const JudgmentMatrix& matrix) {
    std::vector<PairKey> missing;
    for (const auto& key : matrix.pairs)
        if (!set.records().count(key)) missing.push_back(key);
    return missing;
}

} // namespace qdbias
