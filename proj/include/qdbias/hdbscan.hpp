/// @file hdbscan.hpp
/// @brief Exact HDBSCAN over dense vectors.
///
/// The pipeline is core distances -> Prim MST over the implicit complete
/// mutual-reachability graph -> single-linkage hierarchy -> condensed tree
/// -> excess-of-mass selection. Every stage is O(n^2) in distance
/// evaluations and deterministic for a fixed input, independent of the
/// number of worker threads.
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "qdbias/types.hpp"

namespace qdbias {

class EmbeddingSet;

/// Row-major float matrix, one point per row.
class Points {
public:
    Points(std::size_t dimension, std::vector<float> data);
    static Points from_rows(const std::vector<std::vector<float>>& rows);

    std::size_t size() const noexcept { return n_; }
    std::size_t dimension() const noexcept { return dim_; }
    std::span<const float> row(std::size_t i) const noexcept { return {data_.data() + i * dim_, dim_}; }

private:
    std::size_t dim_;
    std::size_t n_;
    std::vector<float> data_;
};

/// Points in the set's (query_id, doc_id) order.
Points points_from(const EmbeddingSet& set);
/// Points in the order of `keys`; throws Error if a key has no vector.
Points points_from(const EmbeddingSet& set, const std::vector<PairKey>& keys);

/// Euclidean distance accumulated in double precision.
double euclidean(std::span<const float> a, std::span<const float> b) noexcept;

enum class Metric { euclidean, euclidean_on_normalized };

const char* to_string(Metric m) noexcept;
/// Throws RangeError on an unknown name.
Metric parse_metric(const std::string& name);

struct HdbscanParams {
    int min_cluster_size = 15;
    int min_samples = 5;
    Metric metric = Metric::euclidean_on_normalized;

    /// Throws RangeError on invalid values; returns advisory warnings.
    std::vector<std::string> validate() const;
};

struct MstEdge {
    std::size_t a = 0; ///< smaller endpoint
    std::size_t b = 0; ///< larger endpoint
    double weight = 0.0;

    bool operator==(const MstEdge&) const = default;
};

struct ClusterAssignment {
    /// One label per point; kNoiseCluster for noise. Ids run 0..n_clusters-1
    /// in decreasing cluster size.
    std::vector<int> labels;
    std::size_t n_clusters = 0;
    /// membership[c] lists the point indices of cluster c in ascending order.
    std::vector<std::vector<std::size_t>> membership;
    /// Excess-of-mass stability of each selected cluster.
    std::vector<double> stability;

    std::size_t noise_count() const noexcept;
};

/// Distance from each point to its k-th nearest other point.
/// Throws InsufficientDataError when there are fewer than k+1 points.
std::vector<double> core_distances(const Points& points, std::size_t k, unsigned workers = 1);

inline double mutual_reachability(double distance, double core_i, double core_j) noexcept {
    double m = distance;
    if (core_i > m) m = core_i;
    if (core_j > m) m = core_j;
    return m;
}

double mutual_reachability(const Points& points, std::span<const double> cores, std::size_t i, std::size_t j) noexcept;

/// Minimum spanning tree of the mutual-reachability graph (n-1 edges), sorted
/// by weight then (a, b). Requires at least 2 points.
std::vector<MstEdge> build_mst(const Points& points, std::span<const double> cores, unsigned workers = 1);

/// Condensed-tree construction and excess-of-mass flat cluster extraction.
/// The root is never selected, so a single all-encompassing cluster is reported as noise.
ClusterAssignment condense_and_extract(std::span<const MstEdge> mst, std::size_t n_points, const HdbscanParams& params);

ClusterAssignment cluster(const Points& points, const HdbscanParams& params, unsigned workers = 1);

/// Clusters the set in record order. With the euclidean_on_normalized metric
/// the set must be normalized (throws RangeError otherwise).
ClusterAssignment cluster(const EmbeddingSet& set, const HdbscanParams& params, unsigned workers = 1);

} // namespace qdbias
