#pragma once

#include "mapdata.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <stdexcept>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace mapmesh {

inline constexpr double kDefaultRangeM = 100.0;
inline constexpr double kDefaultExponent = 10.0;
inline constexpr double kTouchingEpsilonM = 0.01;
inline constexpr double kTieBreakStepM = 1e-9;
/// Exponents above this are evaluated with the k -> infinity ordering.
inline constexpr double kLimitExponentThreshold = 32.0;
inline constexpr double kInfiniteExponent = std::numeric_limits<double>::infinity();

struct WeightedEdge {
    BuildingId u = 0;
    BuildingId v = 0;
    double d = 0.0;

    friend bool operator==(const WeightedEdge&, const WeightedEdge&) = default;
};

class BuildingGraph {
public:
    struct Neighbor {
        BuildingId id;
        double d;
    };

    BuildingGraph() = default;

    /// Build from an undirected edge list. Zero distances become the
    /// touching epsilon; runs of equal distances are separated by
    /// kTieBreakStepM * rank in (u, v) order so every weight is distinct.
    static BuildingGraph from_edges(std::size_t n, std::vector<WeightedEdge> edges,
                                    double range = std::numeric_limits<double>::infinity())
    {
        for (auto& e : edges) {
            if (e.u == e.v) {
                throw std::invalid_argument("self-loop in building graph");
            }
            if (e.u > e.v) std::swap(e.u, e.v);
            if (e.u >= n || e.v >= n) {
                throw std::out_of_range("edge endpoint out of range");
            }
            if (e.d <= 0.0) e.d = kTouchingEpsilonM;
        }
        std::sort(edges.begin(), edges.end(),
                  [](const WeightedEdge& a, const WeightedEdge& b) { return std::tie(a.d, a.u, a.v) < std::tie(b.d, b.u, b.v); });
        edges.erase(std::unique(edges.begin(), edges.end(),
                                [](const WeightedEdge& a, const WeightedEdge& b) { return a.u == b.u && a.v == b.v; }),
                    edges.end());
        for (std::size_t i = 0; i < edges.size();) {
            std::size_t j = i + 1;
            const double base = edges[i].d;
            while (j < edges.size() && edges[j].d == base) {
                edges[j].d = base + kTieBreakStepM * static_cast<double>(j - i);
                ++j;
            }
            i = j;
        }
        BuildingGraph g;
        g.range_ = range;
        g.adj_.resize(n);
        for (const auto& e : edges) {
            g.adj_[e.u].push_back({e.v, e.d});
            g.adj_[e.v].push_back({e.u, e.d});
        }
        for (auto& list : g.adj_) {
            std::sort(list.begin(), list.end(), [](const Neighbor& a, const Neighbor& b) { return a.id < b.id; });
        }
        g.edge_count_ = edges.size();
        return g;
    }

    std::size_t size() const noexcept { return adj_.size(); }
    std::size_t edge_count() const noexcept { return edge_count_; }
    double range() const noexcept { return range_; }
    std::span<const Neighbor> neighbors(BuildingId u) const { return adj_.at(u); }

    std::optional<double> weight(BuildingId u, BuildingId v) const
    {
        const auto& list = adj_.at(u);
        auto it = std::lower_bound(list.begin(), list.end(), v, [](const Neighbor& n, BuildingId id) { return n.id < id; });
        if (it != list.end() && it->id == v) return it->d;
        return std::nullopt;
    }
    bool adjacent(BuildingId u, BuildingId v) const { return weight(u, v).has_value(); }

    /// Every edge once, u < v, sorted by (u, v).
    std::vector<WeightedEdge> edges() const
    {
        std::vector<WeightedEdge> out;
        out.reserve(edge_count_);
        for (BuildingId u = 0; u < adj_.size(); ++u) {
            for (const auto& nb : adj_[u]) {
                if (u < nb.id) out.push_back({u, nb.id, nb.d});
            }
        }
        return out;
    }

private:
    std::vector<std::vector<Neighbor>> adj_;
    std::size_t edge_count_ = 0;
    double range_ = std::numeric_limits<double>::infinity();
};

/// All building pairs whose footprints are within `range`, with their raw
/// minimum distance. Uses a uniform bucket grid over bounding boxes.
inline std::vector<WeightedEdge> candidate_edges(const BuildingMap& map, double range)
{
    if (!(range > 0.0)) {
        throw std::invalid_argument("range must be positive");
    }
    std::vector<WeightedEdge> out;
    if (map.size() < 2) return out;
    const Rect& bounds = map.bounds();
    const double cell = std::max(range, 1.0);
    const auto nx = static_cast<long>(std::floor(bounds.width() / cell)) + 1;
    const auto ny = static_cast<long>(std::floor(bounds.height() / cell)) + 1;
    auto cx = [&](double x) { return std::clamp(static_cast<long>(std::floor((x - bounds.min.x) / cell)), 0L, nx - 1); };
    auto cy = [&](double y) { return std::clamp(static_cast<long>(std::floor((y - bounds.min.y) / cell)), 0L, ny - 1); };

    std::unordered_map<long, std::vector<BuildingId>> buckets;
    for (const auto& b : map.buildings()) {
        for (long i = cx(b.box.min.x); i <= cx(b.box.max.x); ++i) {
            for (long j = cy(b.box.min.y); j <= cy(b.box.max.y); ++j) {
                buckets[i * ny + j].push_back(b.id);
            }
        }
    }
    std::vector<BuildingId> stamp(map.size(), kNoBuilding);
    for (const auto& a : map.buildings()) {
        for (long i = cx(a.box.min.x - range); i <= cx(a.box.max.x + range); ++i) {
            for (long j = cy(a.box.min.y - range); j <= cy(a.box.max.y + range); ++j) {
                auto it = buckets.find(i * ny + j);
                if (it == buckets.end()) continue;
                for (BuildingId bid : it->second) {
                    if (bid <= a.id || stamp[bid] == a.id) continue;
                    stamp[bid] = a.id;
                    const Building& b = map[bid];
                    if (rect_gap(a.box, b.box) > range) continue;
                    const double d = min_distance(a, b);
                    if (d <= range) out.push_back({a.id, bid, d});
                }
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const WeightedEdge& l, const WeightedEdge& r) { return std::tie(l.u, l.v) < std::tie(r.u, r.v); });
    return out;
}

inline BuildingGraph build_graph(const BuildingMap& map, double range = kDefaultRangeM)
{
    return BuildingGraph::from_edges(map.size(), candidate_edges(map, range), range);
}

// ---------------------------------------------------------------------------
// Paths
// ---------------------------------------------------------------------------

struct BuildingPath {
    std::vector<BuildingId> nodes;
    double bottleneck = 0.0;

    std::size_t size() const noexcept { return nodes.size(); }
    BuildingId source() const { return nodes.front(); }
    BuildingId destination() const { return nodes.back(); }
};

inline double path_bottleneck(const BuildingGraph& g, std::span<const BuildingId> nodes)
{
    double worst = 0.0;
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        const auto w = g.weight(nodes[i - 1], nodes[i]);
        if (!w) {
            throw std::invalid_argument("path uses a non-edge");
        }
        worst = std::max(worst, *w);
    }
    return worst;
}

namespace detail {

inline std::vector<BuildingId> walk_parents(const std::vector<BuildingId>& parent, BuildingId root, BuildingId v)
{
    std::vector<BuildingId> out;
    for (BuildingId x = v; x != root; x = parent[x]) {
        out.push_back(x);
    }
    out.push_back(root);
    std::reverse(out.begin(), out.end());
    return out;
}

} // namespace detail

/// Minimax path grown by Prim's algorithm from s until d is attached.
inline std::optional<BuildingPath> safest_path(const BuildingGraph& g, BuildingId s, BuildingId d)
{
    if (s >= g.size() || d >= g.size()) {
        throw std::out_of_range("vertex id out of range");
    }
    if (s == d) {
        return BuildingPath{{s}, 0.0};
    }
    using Item = std::tuple<double, BuildingId, BuildingId>; // weight, vertex, parent
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    std::vector<BuildingId> parent(g.size(), kNoBuilding);
    std::vector<char> in_tree(g.size(), 0);
    in_tree[s] = 1;
    for (const auto& nb : g.neighbors(s)) pq.emplace(nb.d, nb.id, s);
    while (!pq.empty()) {
        const auto [w, v, u] = pq.top();
        pq.pop();
        if (in_tree[v]) continue;
        in_tree[v] = 1;
        parent[v] = u;
        if (v == d) {
            auto nodes = detail::walk_parents(parent, s, d);
            const double bn = path_bottleneck(g, nodes);
            return BuildingPath{std::move(nodes), bn};
        }
        for (const auto& nb : g.neighbors(v)) {
            if (!in_tree[nb.id]) pq.emplace(nb.d, nb.id, v);
        }
    }
    return std::nullopt;
}

/// Minimum spanning forest via Prim, edges with u < v sorted by (u, v).
inline std::vector<WeightedEdge> mst(const BuildingGraph& g)
{
    std::vector<WeightedEdge> out;
    std::vector<char> in_tree(g.size(), 0);
    using Item = std::tuple<double, BuildingId, BuildingId>;
    for (BuildingId root = 0; root < g.size(); ++root) {
        if (in_tree[root]) continue;
        in_tree[root] = 1;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
        for (const auto& nb : g.neighbors(root)) pq.emplace(nb.d, nb.id, root);
        while (!pq.empty()) {
            const auto [w, v, u] = pq.top();
            pq.pop();
            if (in_tree[v]) continue;
            in_tree[v] = 1;
            out.push_back({std::min(u, v), std::max(u, v), w});
            for (const auto& nb : g.neighbors(v)) {
                if (!in_tree[nb.id]) pq.emplace(nb.d, nb.id, v);
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const WeightedEdge& l, const WeightedEdge& r) { return std::tie(l.u, l.v) < std::tie(r.u, r.v); });
    return out;
}

/// Shortest-path tree rooted at `root` under the d^k edge cost.
struct PathTree {
    BuildingId root = 0;
    std::vector<BuildingId> parent; ///< kNoBuilding when unreached; root maps to itself

    bool reached(BuildingId v) const { return parent.at(v) != kNoBuilding; }

    /// Vertex sequence root -> v.
    std::optional<std::vector<BuildingId>> path_to(BuildingId v) const
    {
        if (!reached(v)) return std::nullopt;
        return detail::walk_parents(parent, root, v);
    }
};

namespace detail {

/// Sum of d^k in extended precision.
struct PowerCost {
    using Label = long double;
    long double k;
    Label zero() const { return 0.0L; }
    Label extend(const Label& l, double d) const { return l + std::pow(static_cast<long double>(d), k); }
};

/// The k -> infinity order: edge weights sorted descending, compared
/// lexicographically, a proper prefix ranking lower.
struct LimitCost {
    using Label = std::vector<double>;
    Label zero() const { return {}; }
    Label extend(const Label& l, double d) const
    {
        Label out;
        out.reserve(l.size() + 1);
        auto pos = std::lower_bound(l.begin(), l.end(), d, std::greater<>());
        out.insert(out.end(), l.begin(), pos);
        out.push_back(d);
        out.insert(out.end(), pos, l.end());
        return out;
    }
};

template <typename Cost>
PathTree dijkstra_tree(const BuildingGraph& g, BuildingId root, const Cost& cost, std::optional<BuildingId> stop_at)
{
    using Label = typename Cost::Label;
    const std::size_t n = g.size();
    std::vector<std::optional<Label>> dist(n);
    std::vector<char> done(n, 0);
    PathTree tree{root, std::vector<BuildingId>(n, kNoBuilding)};
    tree.parent[root] = root;
    dist[root] = cost.zero();

    struct Item {
        Label label;
        BuildingId v;
        bool operator>(const Item& o) const
        {
            if (label != o.label) return o.label < label;
            return v > o.v;
        }
    };
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    pq.push({cost.zero(), root});

    // Equal-cost tie: prefer the lexicographically smaller vertex sequence.
    auto lex_less = [&](BuildingId via_a, BuildingId via_b) {
        const auto pa = walk_parents(tree.parent, root, via_a);
        const auto pb = walk_parents(tree.parent, root, via_b);
        return std::lexicographical_compare(pa.begin(), pa.end(), pb.begin(), pb.end());
    };

    while (!pq.empty()) {
        Item top = pq.top();
        pq.pop();
        const BuildingId u = top.v;
        if (done[u] || top.label != *dist[u]) continue;
        done[u] = 1;
        if (stop_at && u == *stop_at) break;
        for (const auto& nb : g.neighbors(u)) {
            if (done[nb.id]) continue;
            Label cand = cost.extend(*dist[u], nb.d);
            if (!dist[nb.id] || cand < *dist[nb.id]) {
                dist[nb.id] = cand;
                tree.parent[nb.id] = u;
                pq.push({std::move(cand), nb.id});
            } else if (cand == *dist[nb.id] && lex_less(u, tree.parent[nb.id])) {
                tree.parent[nb.id] = u;
            }
        }
    }
    if (stop_at) {
        // Only settled vertices carry final parents.
        for (BuildingId v = 0; v < n; ++v) {
            if (!done[v]) tree.parent[v] = kNoBuilding;
        }
    }
    return tree;
}

inline PathTree exp_tree(const BuildingGraph& g, BuildingId root, double k, std::optional<BuildingId> stop_at)
{
    if (root >= g.size()) {
        throw std::out_of_range("vertex id out of range");
    }
    if (!(k >= 1.0)) {
        throw std::invalid_argument("exponent k must be >= 1");
    }
    if (k > kLimitExponentThreshold) {
        return dijkstra_tree(g, root, LimitCost{}, stop_at);
    }
    return dijkstra_tree(g, root, PowerCost{static_cast<long double>(k)}, stop_at);
}

} // namespace detail

/// Full shortest-path tree under d^k from root.
inline PathTree k_exp_tree(const BuildingGraph& g, BuildingId root, double k = kDefaultExponent)
{
    return detail::exp_tree(g, root, k, std::nullopt);
}

/// Minimum total d^k path from s to d.
inline std::optional<BuildingPath> k_exp_path(const BuildingGraph& g, BuildingId s, BuildingId d,
                                              double k = kDefaultExponent)
{
    if (d >= g.size()) {
        throw std::out_of_range("vertex id out of range");
    }
    const PathTree t = detail::exp_tree(g, s, k, d);
    auto nodes = t.path_to(d);
    if (!nodes) return std::nullopt;
    const double bn = path_bottleneck(g, *nodes);
    return BuildingPath{std::move(*nodes), bn};
}

// ---------------------------------------------------------------------------
// Connectivity
// ---------------------------------------------------------------------------

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n, std::span<const double> weights = {})
        : parent_(n), size_(n, 1), weight_(n, 1.0), components_(n)
    {
        std::iota(parent_.begin(), parent_.end(), std::size_t{0});
        if (!weights.empty()) {
            std::copy(weights.begin(), weights.end(), weight_.begin());
        }
    }
    std::size_t find(std::size_t x)
    {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    bool unite(std::size_t a, std::size_t b)
    {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        if (size_[a] < size_[b]) std::swap(a, b);
        parent_[b] = a;
        size_[a] += size_[b];
        weight_[a] += weight_[b];
        --components_;
        return true;
    }
    std::size_t components() const noexcept { return components_; }
    double weight(std::size_t x) { return weight_[find(x)]; }

private:
    std::vector<std::size_t> parent_;
    std::vector<std::size_t> size_;
    std::vector<double> weight_;
    std::size_t components_;
};

/// Component label per vertex, labels dense in order of first appearance.
inline std::vector<std::uint32_t> component_labels(const BuildingGraph& g)
{
    DisjointSets ds(g.size());
    for (const auto& e : g.edges()) ds.unite(e.u, e.v);
    std::vector<std::uint32_t> label(g.size());
    std::unordered_map<std::size_t, std::uint32_t> ids;
    for (BuildingId v = 0; v < g.size(); ++v) {
        auto [it, fresh] = ids.try_emplace(ds.find(v), static_cast<std::uint32_t>(ids.size()));
        label[v] = it->second;
    }
    return label;
}

struct FeasibilityRow {
    double range_m = 0.0;
    std::size_t components = 0;
    double largest_fraction = 0.0; ///< device-weighted share of the largest component
};

/// Component count and largest-component device share for each range.
/// Edges are computed once at the largest range and merged incrementally.
inline std::vector<FeasibilityRow> feasibility_sweep(const BuildingMap& map, std::span<const double> ranges,
                                                     double density_m2 = kDefaultDensityM2)
{
    if (ranges.empty()) {
        throw std::invalid_argument("feasibility sweep needs at least one range");
    }
    if (!std::is_sorted(ranges.begin(), ranges.end()) || !(ranges.front() > 0.0)) {
        throw std::invalid_argument("feasibility ranges must be positive and ascending");
    }
    std::vector<double> devices(map.size());
    double total = 0.0;
    for (const auto& b : map.buildings()) {
        devices[b.id] = static_cast<double>(devices_for_area(b.area, density_m2));
        total += devices[b.id];
    }
    auto edges = candidate_edges(map, ranges.back());
    std::sort(edges.begin(), edges.end(), [](const WeightedEdge& a, const WeightedEdge& b) { return a.d < b.d; });
    DisjointSets ds(map.size(), devices);
    double largest = 0.0;
    for (double w : devices) largest = std::max(largest, w);
    std::vector<FeasibilityRow> rows;
    std::size_t next = 0;
    for (double r : ranges) {
        for (; next < edges.size() && edges[next].d <= r; ++next) {
            if (ds.unite(edges[next].u, edges[next].v)) {
                largest = std::max(largest, ds.weight(edges[next].u));
            }
        }
        rows.push_back({r, ds.components(), total > 0.0 ? largest / total : 0.0});
    }
    return rows;
}

inline void write_edges_csv(std::ostream& os, const BuildingGraph& g)
{
    os << "u,v,d_m\n";
    for (const auto& e : g.edges()) {
        os << e.u << ',' << e.v << ',' << e.d << '\n';
    }
}

inline void write_feasibility_csv(std::ostream& os, std::span<const FeasibilityRow> rows)
{
    os << "range_m,components,largest_fraction\n";
    for (const auto& r : rows) {
        os << r.range_m << ',' << r.components << ',' << r.largest_fraction << '\n';
    }
}

} // namespace mapmesh
