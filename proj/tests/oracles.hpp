#pragma once

// Brute-force references used by the unit tests and the acceptance binary.
// None of these share code with the library algorithms they check.

#include <mapmesh/mapmesh.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <utility>
#include <vector>

namespace oracle {

using mapmesh::BuildingId;
using mapmesh::WeightedEdge;

/// Random simple graph on n vertices with distinct weights in (1, 100).
/// A random spanning tree is laid first when `connected` is set.
inline std::vector<WeightedEdge> random_graph(std::mt19937_64& rng, std::size_t n, double density, bool connected)
{
    std::set<std::pair<BuildingId, BuildingId>> used;
    std::vector<WeightedEdge> edges;
    std::uniform_real_distribution<double> w(1.0, 100.0);
    auto add = [&](BuildingId a, BuildingId b) {
        if (a > b) std::swap(a, b);
        if (a == b || !used.insert({a, b}).second) return;
        edges.push_back({a, b, 0.0});
    };
    if (connected) {
        for (BuildingId v = 1; v < n; ++v) {
            add(v, static_cast<BuildingId>(std::uniform_int_distribution<std::size_t>(0, v - 1)(rng)));
        }
    }
    std::bernoulli_distribution coin(density);
    for (BuildingId a = 0; a < n; ++a) {
        for (BuildingId b = a + 1; b < n; ++b) {
            if (coin(rng)) add(a, b);
        }
    }
    // Distinct weights: shuffle a strictly increasing ladder.
    std::vector<double> ladder(edges.size());
    for (auto& x : ladder) x = w(rng);
    std::sort(ladder.begin(), ladder.end());
    for (std::size_t i = 1; i < ladder.size(); ++i) {
        if (ladder[i] <= ladder[i - 1]) ladder[i] = std::nextafter(ladder[i - 1], 1e9) + 1e-6;
    }
    std::shuffle(ladder.begin(), ladder.end(), rng);
    for (std::size_t i = 0; i < edges.size(); ++i) edges[i].d = ladder[i];
    return edges;
}

inline std::vector<std::vector<std::pair<BuildingId, double>>> adjacency(std::size_t n,
                                                                          const std::vector<WeightedEdge>& edges)
{
    std::vector<std::vector<std::pair<BuildingId, double>>> adj(n);
    for (const auto& e : edges) {
        adj[e.u].push_back({e.v, e.d});
        adj[e.v].push_back({e.u, e.d});
    }
    return adj;
}

/// Smallest bottleneck over every simple s-d path, by DFS enumeration.
inline std::optional<double> minimax_enumerate(std::size_t n, const std::vector<WeightedEdge>& edges, BuildingId s,
                                               BuildingId d)
{
    if (s == d) return 0.0;
    const auto adj = adjacency(n, edges);
    std::vector<char> on(n, 0);
    std::optional<double> best;
    std::function<void(BuildingId, double)> dfs = [&](BuildingId u, double worst) {
        if (best && worst >= *best) return;
        if (u == d) {
            best = worst;
            return;
        }
        on[u] = 1;
        for (const auto& [v, w] : adj[u]) {
            if (!on[v]) dfs(v, std::max(worst, w));
        }
        on[u] = 0;
    };
    dfs(s, 0.0);
    return best;
}

/// Minimum total sum of d^k over simple s-d paths, by enumeration.
inline std::optional<std::vector<BuildingId>> min_power_enumerate(std::size_t n, const std::vector<WeightedEdge>& edges,
                                                                  BuildingId s, BuildingId d, long double k)
{
    const auto adj = adjacency(n, edges);
    std::vector<char> on(n, 0);
    std::vector<BuildingId> cur{s};
    std::optional<std::pair<long double, std::vector<BuildingId>>> best;
    std::function<void(BuildingId, long double)> dfs = [&](BuildingId u, long double cost) {
        if (u == d) {
            if (!best || cost < best->first) best = {cost, cur};
            return;
        }
        on[u] = 1;
        for (const auto& [v, w] : adj[u]) {
            if (on[v]) continue;
            cur.push_back(v);
            dfs(v, cost + std::pow(static_cast<long double>(w), k));
            cur.pop_back();
        }
        on[u] = 0;
    };
    dfs(s, 0.0L);
    if (!best) return std::nullopt;
    return best->second;
}

/// Kruskal minimum spanning forest as a set of (min, max) vertex pairs.
inline std::set<std::pair<BuildingId, BuildingId>> kruskal(std::size_t n, std::vector<WeightedEdge> edges)
{
    std::sort(edges.begin(), edges.end(), [](const WeightedEdge& a, const WeightedEdge& b) { return a.d < b.d; });
    std::vector<std::size_t> root(n);
    std::iota(root.begin(), root.end(), std::size_t{0});
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) { return root[x] == x ? x : root[x] = find(root[x]); };
    std::set<std::pair<BuildingId, BuildingId>> out;
    for (const auto& e : edges) {
        const auto a = find(e.u), b = find(e.v);
        if (a == b) continue;
        root[a] = b;
        out.insert({std::min(e.u, e.v), std::max(e.u, e.v)});
    }
    return out;
}

/// The unique s-d path inside a forest, by BFS.
inline std::optional<std::vector<BuildingId>> forest_path(std::size_t n,
                                                          const std::set<std::pair<BuildingId, BuildingId>>& forest,
                                                          BuildingId s, BuildingId d)
{
    std::vector<std::vector<BuildingId>> adj(n);
    for (const auto& [a, b] : forest) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    std::vector<BuildingId> parent(n, mapmesh::kNoBuilding);
    parent[s] = s;
    std::queue<BuildingId> q;
    q.push(s);
    while (!q.empty()) {
        const auto u = q.front();
        q.pop();
        for (auto v : adj[u]) {
            if (parent[v] == mapmesh::kNoBuilding) {
                parent[v] = u;
                q.push(v);
            }
        }
    }
    if (parent[d] == mapmesh::kNoBuilding) return std::nullopt;
    std::vector<BuildingId> path;
    for (auto x = d; x != s; x = parent[x]) path.push_back(x);
    path.push_back(s);
    std::reverse(path.begin(), path.end());
    return path;
}

/// Footprint distance by dense boundary sampling; an upper bound that
/// converges from above as `steps` grows. Zero when either ring contains
/// a vertex of the other.
inline double sampled_distance(const std::vector<mapmesh::Point>& a, const std::vector<mapmesh::Point>& b, int steps)
{
    auto inside = [](mapmesh::Point p, const std::vector<mapmesh::Point>& ring) {
        bool in = false;
        for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
            if ((ring[i].y > p.y) != (ring[j].y > p.y) &&
                p.x < (ring[j].x - ring[i].x) * (p.y - ring[i].y) / (ring[j].y - ring[i].y) + ring[i].x) {
                in = !in;
            }
        }
        return in;
    };
    for (const auto& p : a) {
        if (inside(p, b)) return 0.0;
    }
    for (const auto& p : b) {
        if (inside(p, a)) return 0.0;
    }
    auto samples = [&](const std::vector<mapmesh::Point>& ring) {
        std::vector<mapmesh::Point> out;
        for (std::size_t i = 0; i < ring.size(); ++i) {
            const auto p = ring[i], q = ring[(i + 1) % ring.size()];
            for (int t = 0; t < steps; ++t) {
                const double f = static_cast<double>(t) / steps;
                out.push_back({p.x + f * (q.x - p.x), p.y + f * (q.y - p.y)});
            }
        }
        return out;
    };
    const auto sa = samples(a), sb = samples(b);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : sa) {
        for (const auto& q : sb) best = std::min(best, std::hypot(p.x - q.x, p.y - q.y));
    }
    return best;
}

/// Point-to-segment distance via sqrt, no squared shortcuts.
inline double point_segment_distance(mapmesh::Point p, mapmesh::Point a, mapmesh::Point b)
{
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    if (len == 0.0) return std::hypot(p.x - a.x, p.y - a.y);
    double t = ((p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y)) / (len * len);
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(p.x - (a.x + t * (b.x - a.x)), p.y - (a.y + t * (b.y - a.y)));
}

/// Longest matching prefix by linear scan; nullopt for no match or a null route.
inline std::optional<BuildingId> linear_lpm(const std::vector<mapmesh::RoutingEntry>& entries,
                                            const mapmesh::GridAddress& dest)
{
    int best_len = -1;
    std::optional<BuildingId> hop;
    for (const auto& e : entries) {
        if (e.prefix.len > best_len && e.prefix.matches(dest)) {
            best_len = e.prefix.len;
            hop = e.next_waypoint == mapmesh::kNoRoute ? std::nullopt : std::optional<BuildingId>(e.next_waypoint);
        }
    }
    return hop;
}

} // namespace oracle
