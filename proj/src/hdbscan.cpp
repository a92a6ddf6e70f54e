#include "qdbias/hdbscan.hpp"

#include <algorithm>
#include <barrier>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>
#include <tuple>

#include "qdbias/embedding_store.hpp"
#include "qdbias/error.hpp"

namespace qdbias {

Points::Points(std::size_t dimension, std::vector<float> data) : dim_(dimension), data_(std::move(data)) {
    if (dim_ == 0) throw RangeError("point dimension must be positive");
    if (data_.size() % dim_ != 0) throw RangeError("point data is not a whole number of rows");
    n_ = data_.size() / dim_;
}

Points Points::from_rows(const std::vector<std::vector<float>>& rows) {
    if (rows.empty()) throw InsufficientDataError("no points");
    std::size_t dim = rows.front().size();
    std::vector<float> data;
    data.reserve(rows.size() * dim);
    for (const auto& r : rows) {
        if (r.size() != dim) throw RangeError("ragged point rows");
        data.insert(data.end(), r.begin(), r.end());
    }
    return Points(dim, std::move(data));
}

Points points_from(const EmbeddingSet& set) {
    std::vector<float> data;
    data.reserve(set.size() * set.dimension());
    for (const auto& [key, v] : set.records()) data.insert(data.end(), v.begin(), v.end());
    return Points(set.dimension(), std::move(data));
}

Points points_from(const EmbeddingSet& set, const std::vector<PairKey>& keys) {
    std::vector<float> data;
    data.reserve(keys.size() * set.dimension());
    for (const auto& key : keys) {
        auto v = set.find(key);
        if (!v) throw Error("no embedding for (" + key.query_id + ", " + key.doc_id + ")");
        data.insert(data.end(), v->begin(), v->end());
    }
    return Points(set.dimension(), std::move(data));
}

double euclidean(std::span<const float> a, std::span<const float> b) noexcept {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        sum += d * d;
    }
    return std::sqrt(sum);
}

const char* to_string(Metric m) noexcept {
    return m == Metric::euclidean ? "euclidean" : "euclidean_on_normalized";
}

Metric parse_metric(const std::string& name) {
    if (name == "euclidean") return Metric::euclidean;
    if (name == "euclidean_on_normalized") return Metric::euclidean_on_normalized;
    throw RangeError("unknown metric '" + name + "'");
}

std::vector<std::string> HdbscanParams::validate() const {
    if (min_cluster_size < 2) throw RangeError("min_cluster_size must be >= 2");
    if (min_samples < 1) throw RangeError("min_samples must be >= 1");
    std::vector<std::string> warnings;
    if (min_samples > min_cluster_size)
        warnings.push_back("min_samples (" + std::to_string(min_samples) + ") exceeds min_cluster_size (" +
                           std::to_string(min_cluster_size) + ")");
    return warnings;
}

std::size_t ClusterAssignment::noise_count() const noexcept {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kNoiseCluster));
}

namespace {

unsigned clamp_workers(unsigned workers, std::size_t n) {
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1)));
}

std::pair<std::size_t, std::size_t> chunk(std::size_t n, unsigned parts, unsigned index) {
    std::size_t base = n / parts, extra = n % parts;
    std::size_t lo = index * base + std::min<std::size_t>(index, extra);
    return {lo, lo + base + (index < extra ? 1 : 0)};
}

} // namespace

std::vector<double> core_distances(const Points& points, std::size_t k, unsigned workers) {
    const std::size_t n = points.size();
    if (k < 1) throw RangeError("min_samples must be >= 1");
    if (n < k + 1)
        throw InsufficientDataError("core distance with k=" + std::to_string(k) + " needs at least " +
                                    std::to_string(k + 1) + " points, got " + std::to_string(n));
    std::vector<double> cores(n);
    workers = clamp_workers(workers, n);

    auto work = [&](unsigned t) {
        auto [lo, hi] = chunk(n, workers, t);
        std::vector<double> dist;
        dist.reserve(n - 1);
        for (std::size_t i = lo; i < hi; ++i) {
            dist.clear();
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) dist.push_back(euclidean(points.row(i), points.row(j)));
            std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
            cores[i] = dist[k - 1];
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 1; t < workers; ++t) pool.emplace_back(work, t);
        work(0);
    }
    return cores;
}

double mutual_reachability(const Points& points, std::span<const double> cores, std::size_t i, std::size_t j) noexcept {
    return mutual_reachability(euclidean(points.row(i), points.row(j)), cores[i], cores[j]);
}

namespace {

// Edge order: weight, then smaller endpoint, then larger endpoint.
struct Candidate {
    double weight = std::numeric_limits<double>::infinity();
    std::size_t a = std::numeric_limits<std::size_t>::max();
    std::size_t b = std::numeric_limits<std::size_t>::max();
    std::size_t vertex = std::numeric_limits<std::size_t>::max();

    bool operator<(const Candidate& o) const noexcept {
        return std::tie(weight, a, b) < std::tie(o.weight, o.a, o.b);
    }
};

bool edge_less(const MstEdge& x, const MstEdge& y) noexcept {
    return std::tie(x.weight, x.a, x.b) < std::tie(y.weight, y.a, y.b);
}

} // namespace

std::vector<MstEdge> build_mst(const Points& points, std::span<const double> cores, unsigned workers) {
    const std::size_t n = points.size();
    if (n < 2) throw InsufficientDataError("a spanning tree needs at least 2 points");
    if (cores.size() != n) throw RangeError("core distance count does not match point count");
    workers = clamp_workers(workers, n);

    std::vector<char> in_tree(n, 0);
    std::vector<Candidate> best(n);
    std::vector<Candidate> local(workers);
    std::vector<MstEdge> edges;
    edges.reserve(n - 1);
    std::size_t current = 0;
    in_tree[0] = 1;

    auto relax = [&](unsigned t) {
        auto [lo, hi] = chunk(n, workers, t);
        Candidate winner;
        for (std::size_t v = lo; v < hi; ++v) {
            if (in_tree[v]) continue;
            Candidate c{mutual_reachability(points, cores, current, v), std::min(current, v), std::max(current, v), v};
            if (c < best[v]) best[v] = c;
            if (best[v] < winner) winner = best[v];
        }
        local[t] = winner;
    };
    auto commit = [&]() noexcept {
        Candidate winner;
        for (const auto& c : local)
            if (c < winner) winner = c;
        edges.push_back({winner.a, winner.b, winner.weight});
        in_tree[winner.vertex] = 1;
        current = winner.vertex;
    };

    if (workers == 1) {
        for (std::size_t step = 1; step < n; ++step) {
            relax(0);
            commit();
        }
    } else {
        std::barrier sync(static_cast<std::ptrdiff_t>(workers), commit);
        auto loop = [&](unsigned t) {
            for (std::size_t step = 1; step < n; ++step) {
                relax(t);
                sync.arrive_and_wait();
            }
        };
        std::vector<std::jthread> pool;
        for (unsigned t = 1; t < workers; ++t) pool.emplace_back(loop, t);
        loop(0);
    }

    std::sort(edges.begin(), edges.end(), edge_less);
    return edges;
}

namespace {

struct DendrogramNode {
    std::size_t left;
    std::size_t right;
    double distance;
    std::size_t size;
};

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1) { std::iota(parent_.begin(), parent_.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    std::size_t unite(std::size_t a, std::size_t b) {
        if (size_[a] < size_[b]) std::swap(a, b);
        parent_[b] = a;
        size_[a] += size_[b];
        return a;
    }

private:
    std::vector<std::size_t> parent_;
    std::vector<std::size_t> size_;
};

struct CondensedCluster {
    std::size_t parent;
    double birth_lambda;
    std::size_t size;
    double stability = 0.0;
    std::vector<std::size_t> children;
};

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

} // namespace

ClusterAssignment condense_and_extract(std::span<const MstEdge> mst, std::size_t n_points, const HdbscanParams& params) {
    params.validate();
    ClusterAssignment out;
    out.labels.assign(n_points, kNoiseCluster);
    if (n_points < 2) return out;
    if (mst.size() != n_points - 1) throw RangeError("spanning tree must have n-1 edges");
    const auto min_size = static_cast<std::size_t>(params.min_cluster_size);

    std::vector<MstEdge> edges(mst.begin(), mst.end());
    std::sort(edges.begin(), edges.end(), edge_less);

    // Single-linkage hierarchy: leaves are 0..n-1, merge m is node n+m.
    std::vector<DendrogramNode> merges;
    merges.reserve(n_points - 1);
    {
        UnionFind uf(n_points);
        std::vector<std::size_t> node_of(n_points);
        std::iota(node_of.begin(), node_of.end(), 0);
        for (const auto& e : edges) {
            auto ra = uf.find(e.a), rb = uf.find(e.b);
            if (ra == rb) throw RangeError("edge list contains a cycle");
            auto size_of = [&](std::size_t node) { return node < n_points ? 1 : merges[node - n_points].size; };
            std::size_t l = node_of[ra], r = node_of[rb];
            merges.push_back({l, r, e.weight, size_of(l) + size_of(r)});
            node_of[uf.unite(ra, rb)] = n_points + merges.size() - 1;
        }
    }
    auto node_size = [&](std::size_t node) { return node < n_points ? std::size_t{1} : merges[node - n_points].size; };

    // lambda = 1/distance; coincident points get the largest finite lambda in the tree.
    double min_positive = std::numeric_limits<double>::infinity();
    for (const auto& e : edges)
        if (e.weight > 0 && e.weight < min_positive) min_positive = e.weight;
    const double lambda_cap = std::isfinite(min_positive) ? 1.0 / min_positive : 1.0;
    auto lambda_of = [&](double d) { return d > 0 ? 1.0 / d : lambda_cap; };

    std::vector<CondensedCluster> clusters;
    clusters.push_back({kNone, 0.0, n_points, 0.0, {}});
    std::vector<std::size_t> fall_cluster(n_points, 0);

    auto points_fall = [&](std::size_t node, std::size_t c, double lambda) {
        std::vector<std::size_t> stack{node};
        while (!stack.empty()) {
            auto x = stack.back();
            stack.pop_back();
            if (x < n_points) {
                fall_cluster[x] = c;
                clusters[c].stability += lambda - clusters[c].birth_lambda;
            } else {
                stack.push_back(merges[x - n_points].right);
                stack.push_back(merges[x - n_points].left);
            }
        }
    };

    std::vector<std::pair<std::size_t, std::size_t>> work{{n_points + merges.size() - 1, 0}};
    while (!work.empty()) {
        auto [node, c] = work.back();
        work.pop_back();
        const auto& m = merges[node - n_points];
        const double lambda = lambda_of(m.distance);
        const std::size_t ls = node_size(m.left), rs = node_size(m.right);
        const bool left_big = ls >= min_size, right_big = rs >= min_size;
        if (left_big && right_big) {
            for (auto child : {m.left, m.right}) {
                std::size_t id = clusters.size();
                clusters.push_back({c, lambda, node_size(child), 0.0, {}});
                clusters[c].children.push_back(id);
                clusters[c].stability += (lambda - clusters[c].birth_lambda) * static_cast<double>(node_size(child));
                work.emplace_back(child, id);
            }
        } else {
            if (!left_big) points_fall(m.left, c, lambda);
            if (!right_big) points_fall(m.right, c, lambda);
            if (left_big) work.emplace_back(m.left, c);
            if (right_big) work.emplace_back(m.right, c);
        }
    }

    // Excess of mass. Children always carry larger ids than their parent.
    std::vector<char> selected(clusters.size(), 0);
    std::vector<double> subtree(clusters.size(), 0.0);
    for (std::size_t c = clusters.size(); c-- > 1;) {
        double children_sum = 0.0;
        for (auto ch : clusters[c].children) children_sum += subtree[ch];
        if (clusters[c].stability >= children_sum) {
            selected[c] = 1;
            subtree[c] = clusters[c].stability;
            std::vector<std::size_t> stack(clusters[c].children);
            while (!stack.empty()) {
                auto d = stack.back();
                stack.pop_back();
                selected[d] = 0;
                stack.insert(stack.end(), clusters[d].children.begin(), clusters[d].children.end());
            }
        } else {
            subtree[c] = children_sum;
        }
    }

    std::vector<std::size_t> owner(clusters.size(), kNone);
    for (std::size_t c = 1; c < clusters.size(); ++c)
        owner[c] = selected[c] ? c : owner[clusters[c].parent];

    std::vector<std::vector<std::size_t>> members(clusters.size());
    for (std::size_t p = 0; p < n_points; ++p)
        if (auto o = owner[fall_cluster[p]]; o != kNone) members[o].push_back(p);

    std::vector<std::size_t> chosen;
    for (std::size_t c = 1; c < clusters.size(); ++c)
        if (selected[c] && !members[c].empty()) chosen.push_back(c);
    std::sort(chosen.begin(), chosen.end(), [&](std::size_t x, std::size_t y) {
        if (members[x].size() != members[y].size()) return members[x].size() > members[y].size();
        return members[x].front() < members[y].front();
    });

    out.n_clusters = chosen.size();
    for (std::size_t id = 0; id < chosen.size(); ++id) {
        for (auto p : members[chosen[id]]) out.labels[p] = static_cast<int>(id);
        out.membership.push_back(std::move(members[chosen[id]]));
        out.stability.push_back(clusters[chosen[id]].stability);
    }
    return out;
}

ClusterAssignment cluster(const Points& points, const HdbscanParams& params, unsigned workers) {
    params.validate();
    auto cores = core_distances(points, static_cast<std::size_t>(params.min_samples), workers);
    auto mst = build_mst(points, cores, workers);
    return condense_and_extract(mst, points.size(), params);
}

ClusterAssignment cluster(const EmbeddingSet& set, const HdbscanParams& params, unsigned workers) {
    if (set.empty()) throw InsufficientDataError("cannot cluster an empty embedding set");
    if (params.metric == Metric::euclidean_on_normalized && !set.normalized())
        throw RangeError("metric euclidean_on_normalized requires L2-normalized embeddings");
    return cluster(points_from(set), params, workers);
}

} // namespace qdbias
