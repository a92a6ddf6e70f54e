/// @file embedding_store.hpp
/// @brief Joint query-document embedding sets and their on-disk formats.
///
/// QDV1 layout, all integers little-endian:
///
///     magic      4 bytes  "QDV1"
///     dimension  u32
///     count      u64
///     count x {
///         qid_len   u16,  qid bytes (UTF-8)
///         docid_len u16,  docid bytes
///         dimension x f32 (IEEE-754)
///     }
///
/// Records are written sorted by (query_id, doc_id).
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qdbias/types.hpp"

namespace qdbias {

struct JudgmentMatrix;

class EmbeddingSet {
public:
    using Map = std::map<PairKey, std::vector<float>>;

    explicit EmbeddingSet(std::uint32_t dimension);

    std::uint32_t dimension() const noexcept { return dimension_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }
    bool normalized() const noexcept { return normalized_; }

    /// Adds a record. Throws FormatError (dimension_mismatch, duplicate_key,
    /// non_finite) when the record would violate the set invariants.
    void insert(PairKey key, std::span<const float> vector);

    std::optional<std::span<const float>> find(const PairKey& key) const;

    /// Records in (query_id, doc_id) order.
    const Map& records() const noexcept { return records_; }

    /// True iff every vector has unit L2 norm within `tolerance`.
    bool all_unit_norm(double tolerance = 1e-5) const;

    bool operator==(const EmbeddingSet&) const = default;

private:
    friend EmbeddingSet l2_normalize(const EmbeddingSet&);

    std::uint32_t dimension_;
    Map records_;
    // Vacuously true for an empty set.
    bool normalized_ = true;
};

/// Reads a QDV1 stream. The normalized flag is set when every vector is unit-norm.
EmbeddingSet read_qdv(std::istream& in);
EmbeddingSet read_qdv_file(const std::string& path);

/// Returns the number of bytes written.
std::size_t write_qdv(const EmbeddingSet& set, std::ostream& out);
std::size_t write_qdv_file(const EmbeddingSet& set, const std::string& path);

/// Lines of `query_id<TAB>doc_id<TAB>v1,v2,...`. Dimension comes from the first record.
EmbeddingSet parse_qdv_tsv(std::istream& in);
EmbeddingSet read_qdv_tsv_file(const std::string& path);

/// Writes shortest round-trip float text, so parse_qdv_tsv recovers every value exactly.
void write_qdv_tsv(const EmbeddingSet& set, std::ostream& out);

/// Scales every vector to unit L2 norm. Throws DegenerateVectorError on a zero vector.
EmbeddingSet l2_normalize(const EmbeddingSet& set);

/// Keys of the matrix with no vector in the set, in matrix order.
std::vector<PairKey> missing_embeddings(const EmbeddingSet& set, const JudgmentMatrix& matrix);

} // namespace qdbias
