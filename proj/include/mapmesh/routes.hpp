#pragma once

#include "addressing.hpp"
#include "corridor.hpp"
#include "graph.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>
#include <exception>
#include <iterator>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

namespace mapmesh {

/// Explicit null route: the destination is known but unreachable.
inline constexpr BuildingId kNoRoute = kNoBuilding;

struct RoutingEntry {
    GridAddress prefix;
    BuildingId next_waypoint = kNoRoute;

    friend bool operator==(const RoutingEntry&, const RoutingEntry&) = default;
};

struct RoutingTable {
    BuildingId owner = 0;
    std::vector<RoutingEntry> entries; ///< sorted by prefix

    std::size_t size() const noexcept { return entries.size(); }

    /// Longest-prefix match. nullopt when nothing matches or the best match
    /// is a null route.
    std::optional<BuildingId> lookup(const GridAddress& dest) const
    {
        const RoutingEntry* best = nullptr;
        for (const auto& e : entries) {
            if (e.prefix.matches(dest) && (!best || e.prefix.len > best->prefix.len)) {
                best = &e;
            }
        }
        if (!best || best->next_waypoint == kNoRoute) return std::nullopt;
        return best->next_waypoint;
    }

    void sort()
    {
        std::sort(entries.begin(), entries.end(),
                  [](const RoutingEntry& a, const RoutingEntry& b) { return a.prefix < b.prefix; });
    }
};

inline std::optional<BuildingId> lookup(const RoutingTable& t, const GridAddress& dest) { return t.lookup(dest); }

/// Addresses whose lookups a table must answer: every other non-empty cell
/// prefix, plus the full address of every other building in the owner's cell.
inline std::vector<GridAddress> query_addresses(const GridIndex& idx, BuildingId owner)
{
    std::vector<GridAddress> out;
    const std::size_t own = idx.cell_of(owner);
    for (std::size_t c = 0; c < idx.cells().size(); ++c) {
        if (c == own) {
            for (BuildingId b : idx.cell(c).buildings) {
                if (b != owner) out.push_back(idx.address_of(b));
            }
        } else {
            out.push_back(idx.cell(c).prefix);
        }
    }
    return out;
}

/// As above, plus every building address of a foreign cell the table routes
/// into at building granularity, so compression cannot let a transit entry
/// capture a cell-mate that should follow the cell route.
inline std::vector<GridAddress> query_addresses(const GridIndex& idx, const RoutingTable& t)
{
    auto out = query_addresses(idx, t.owner);
    const std::size_t own = idx.cell_of(t.owner);
    std::vector<bool> seen(idx.cells().size(), false);
    for (const auto& e : t.entries) {
        if (e.prefix.len <= idx.prefix_bits()) continue;
        const auto* cell = idx.find_cell(e.prefix.prefix(idx.prefix_bits()));
        const std::size_t c = static_cast<std::size_t>(cell - idx.cells().data());
        if (c == own || seen[c]) continue;
        seen[c] = true;
        for (BuildingId b : cell->buildings) out.push_back(idx.address_of(b));
    }
    return out;
}

inline bool lookup_equivalent(const RoutingTable& a, const RoutingTable& b, std::span<const GridAddress> queries)
{
    for (const auto& q : queries) {
        if (a.lookup(q) != b.lookup(q)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Optimal routing table construction
// ---------------------------------------------------------------------------

namespace detail {

/// Candidate next-hop set; `any` marks a region no query can reach.
struct HopSet {
    bool any = true;
    std::vector<BuildingId> hops; // sorted

    bool contains(BuildingId h) const { return any || std::binary_search(hops.begin(), hops.end(), h); }
};

inline HopSet merge_sets(std::span<const HopSet* const> parts)
{
    std::vector<const HopSet*> real;
    for (const HopSet* p : parts) {
        if (!p->any) real.push_back(p);
    }
    if (real.empty()) return {};
    std::vector<BuildingId> inter = real[0]->hops;
    for (std::size_t i = 1; i < real.size(); ++i) {
        std::vector<BuildingId> next;
        std::set_intersection(inter.begin(), inter.end(), real[i]->hops.begin(), real[i]->hops.end(),
                              std::back_inserter(next));
        inter = std::move(next);
    }
    if (!inter.empty()) return {false, std::move(inter)};
    std::vector<BuildingId> uni;
    for (const HopSet* p : real) {
        std::vector<BuildingId> next;
        std::set_union(uni.begin(), uni.end(), p->hops.begin(), p->hops.end(), std::back_inserter(next));
        uni = std::move(next);
    }
    return {false, std::move(uni)};
}

class PrefixTrie {
public:
    struct Node {
        int child[2] = {-1, -1};
        std::optional<BuildingId> hop; // entry stored exactly here
        bool query = false;
        HopSet set;
        GridAddress prefix;
    };

    PrefixTrie() { nodes_.emplace_back(); }

    int insert(const GridAddress& a)
    {
        int n = 0;
        for (int i = 0; i < a.len; ++i) {
            const int b = a.bit(i);
            if (nodes_[n].child[b] < 0) {
                const GridAddress p = nodes_[n].prefix.child(b);
                nodes_[n].child[b] = static_cast<int>(nodes_.size());
                nodes_.emplace_back();
                nodes_.back().prefix = p;
            }
            n = nodes_[n].child[b];
        }
        return n;
    }

    std::vector<Node>& nodes() { return nodes_; }

private:
    std::vector<Node> nodes_;
};

} // namespace detail

/// Minimal prefix table that answers every address in `queries` exactly as
/// `entries` does under longest-prefix match. Addresses outside `queries`
/// are don't-care. Three passes over a binary trie: resolve each query's
/// answer, merge candidate sets upward, then assign hops top-down and emit
/// an entry only where the inherited hop is not a candidate.
inline std::vector<RoutingEntry> ortc(std::span<const RoutingEntry> entries, std::span<const GridAddress> queries)
{
    detail::PrefixTrie trie;
    for (const auto& e : entries) {
        const int n = trie.insert(e.prefix);
        trie.nodes()[n].hop = e.next_waypoint;
    }
    for (const auto& q : queries) {
        const int n = trie.insert(q);
        trie.nodes()[n].query = true;
    }
    auto& nodes = trie.nodes();

    // Pass 1 and 2 together: post-order with the inherited answer.
    struct Frame {
        int node;
        BuildingId inherited;
        bool expanded;
    };
    std::vector<Frame> stack{{0, kNoRoute, false}};
    while (!stack.empty()) {
        Frame f = stack.back();
        stack.pop_back();
        auto& nd = nodes[f.node];
        const BuildingId here = nd.hop.value_or(f.inherited);
        if (!f.expanded) {
            stack.push_back({f.node, f.inherited, true});
            for (int c : nd.child) {
                if (c >= 0) stack.push_back({c, here, false});
            }
            continue;
        }
        // No deeper entry matches a query at this node, so its answer pins
        // the hop chosen here whatever lies below.
        if (nd.query) {
            nd.set = {false, {here}};
            continue;
        }
        std::vector<const detail::HopSet*> parts;
        for (int c : nd.child) {
            if (c >= 0) parts.push_back(&nodes[c].set);
        }
        nd.set = detail::merge_sets(parts);
    }

    // Pass 3.
    std::vector<RoutingEntry> out;
    std::vector<std::pair<int, BuildingId>> todo{{0, kNoRoute}};
    while (!todo.empty()) {
        auto [n, inherited] = todo.back();
        todo.pop_back();
        const auto& nd = nodes[n];
        if (nd.set.any) continue;
        BuildingId hop = inherited;
        if (!nd.set.contains(inherited)) {
            hop = nd.set.hops.front();
            out.push_back({nd.prefix, hop});
        }
        for (int c : nd.child) {
            if (c >= 0) todo.emplace_back(c, hop);
        }
    }
    std::sort(out.begin(), out.end(), [](const RoutingEntry& a, const RoutingEntry& b) { return a.prefix < b.prefix; });
    return out;
}

inline RoutingTable compress_table(const RoutingTable& t, std::span<const GridAddress> queries)
{
    RoutingTable out{t.owner, ortc(t.entries, queries)};
    return out;
}

inline RoutingTable compress_table(const RoutingTable& t, const GridIndex& idx)
{
    const auto queries = query_addresses(idx, t);
    return compress_table(t, queries);
}

// ---------------------------------------------------------------------------
// Precomputation
// ---------------------------------------------------------------------------

struct PrecomputeParams {
    double k = kDefaultExponent;
    double width = kDefaultConduitWidthM;
    std::uint64_t seed = 0;
    unsigned threads = 0; ///< 0 = hardware concurrency
};

struct PrecomputeStats {
    std::size_t cells = 0;             ///< non-empty cells
    std::size_t trees = 0;             ///< shortest-path trees grown
    std::size_t path_computations = 0; ///< representative cell-pair paths
    std::size_t own_cell_paths = 0;    ///< explicit same-cell entries computed
    std::size_t transit_entries = 0;   ///< full addresses recorded outside their cell
    std::size_t filled_entries = 0;    ///< entries copied from a cell-mate
    std::size_t pathology_fixes = 0;   ///< in-cell waypoints given an external hop
};

struct RouteTables {
    std::vector<RoutingTable> tables; ///< indexed by owner building id
    std::vector<BuildingId> representatives; ///< per non-empty cell
    PrecomputeStats stats;
};

inline std::vector<BuildingId> pick_representatives(const GridIndex& idx, std::uint64_t seed)
{
    std::vector<BuildingId> reps;
    for (const auto& cell : idx.cells()) {
        rng::Stream s(seed, rng::Purpose::representative, cell.prefix.value, cell.prefix.len);
        reps.push_back(cell.buildings[s.below(cell.buildings.size())]);
    }
    return reps;
}

namespace detail {

/// Run `job(i)` for i in [0, n) on up to `threads` workers.
template <typename Job>
void parallel_for(std::size_t n, unsigned threads, Job&& job)
{
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mu;
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) {
                try {
                    job(i);
                } catch (...) {
                    std::lock_guard lock(error_mu);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

struct DestJobResult {
    std::vector<std::pair<BuildingId, BuildingId>> entries; // (owner, waypoint)
    std::size_t paths = 0;
    std::size_t filled = 0;
    std::size_t fixes = 0;
};

} // namespace detail

/// Per-building uncompressed tables from representative cell-pair paths.
///
/// For each destination cell one shortest-path tree is grown from its
/// representative; every source representative's path is read off that tree
/// (the metric is symmetric), so all routes into a cell share one in-tree.
inline RouteTables precompute_tables(const BuildingMap& map, const BuildingGraph& g, const GridIndex& idx,
                                     const PrecomputeParams& params = {})
{
    if (map.size() != g.size() || map.size() != idx.building_count()) {
        throw std::invalid_argument("map, graph and grid disagree on building count");
    }
    const auto cells = idx.cells();
    const std::size_t nc = cells.size();
    RouteTables rt;
    rt.representatives = pick_representatives(idx, params.seed);
    rt.stats.cells = nc;
    const auto comp = component_labels(g);
    const auto& reps = rt.representatives;

    std::vector<detail::DestJobResult> dest_results(nc);
    detail::parallel_for(nc, params.threads, [&](std::size_t d) {
        auto& res = dest_results[d];
        const BuildingId rd = reps[d];
        const PathTree tree = k_exp_tree(g, rd, params.k);
        const Point center = idx.cell_center(cells[d].prefix);
        std::map<BuildingId, BuildingId> hop;
        auto closer = [&](BuildingId a, BuildingId b) {
            const double da = distance2(map[a].centroid, center);
            const double db = distance2(map[b].centroid, center);
            return da != db ? da < db : a < b;
        };
        auto offer = [&](BuildingId owner, BuildingId wp) {
            if (idx.cell_of(owner) == d) return;
            auto [it, fresh] = hop.try_emplace(owner, wp);
            if (!fresh && closer(wp, it->second)) it->second = wp;
        };
        // Path from `from` to the representative, read off the in-tree.
        auto route_from = [&](BuildingId from) {
            auto nodes = *tree.path_to(from);
            std::reverse(nodes.begin(), nodes.end());
            auto route = compress_waypoints(std::span<const BuildingId>(nodes), map, params.width);
            return std::pair{std::move(nodes), std::move(route)};
        };

        for (std::size_t a = 0; a < nc; ++a) {
            if (a == d) continue;
            ++res.paths;
            if (!tree.reached(reps[a])) continue;
            const auto [nodes, route] = route_from(reps[a]);
            std::size_t w = 1;
            for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
                if (nodes[i] == route.waypoints[w]) ++w;
                offer(nodes[i], route.waypoints[w]);
            }
        }

        for (std::size_t a = 0; a < nc; ++a) {
            if (a == d) continue;
            std::optional<BuildingId> best;
            for (BuildingId b : cells[a].buildings) {
                auto it = hop.find(b);
                if (it != hop.end() && (!best || closer(it->second, *best))) best = it->second;
            }
            for (BuildingId b : cells[a].buildings) {
                if (hop.count(b) || comp[b] != comp[rd]) continue;
                if (best && *best != b) {
                    hop[b] = *best;
                } else {
                    hop[b] = route_from(b).second.waypoints[1];
                }
                ++res.filled;
            }
            // A waypoint inside the sender's own cell must itself lead out.
            for (BuildingId b : cells[a].buildings) {
                auto it = hop.find(b);
                if (it == hop.end() || idx.cell_of(it->second) != a) continue;
                BuildingId cur = it->second;
                while (idx.cell_of(cur) == a) {
                    const BuildingId nxt = route_from(cur).second.waypoints[1];
                    if (hop[cur] != nxt) {
                        hop[cur] = nxt;
                        ++res.fixes;
                    }
                    cur = nxt;
                }
            }
        }
        res.entries.assign(hop.begin(), hop.end());
    });

    // Same-cell destinations get one in-tree each. A route between two
    // cell-mates may leave the cell, so every building along it records the
    // full address; otherwise an outside waypoint would only know the cell
    // route and send the packet back toward the representative.
    std::vector<std::vector<std::pair<BuildingId, RoutingEntry>>> own_results(nc);
    std::vector<std::size_t> own_paths(nc, 0);
    detail::parallel_for(nc, params.threads, [&](std::size_t c) {
        const auto& members = cells[c].buildings;
        if (members.size() < 2) return;
        for (BuildingId y : members) {
            const PathTree tree = k_exp_tree(g, y, params.k);
            const Point target = map[y].centroid;
            std::map<BuildingId, BuildingId> hop;
            for (BuildingId x : members) {
                if (x == y) continue;
                ++own_paths[c];
                if (!tree.reached(x)) continue;
                auto nodes = *tree.path_to(x);
                std::reverse(nodes.begin(), nodes.end());
                const auto route = compress_waypoints(std::span<const BuildingId>(nodes), map, params.width);
                std::size_t w = 1;
                for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
                    if (nodes[i] == route.waypoints[w]) ++w;
                    const BuildingId wp = route.waypoints[w];
                    auto [it, fresh] = hop.try_emplace(nodes[i], wp);
                    if (fresh) continue;
                    const double dn = distance2(map[wp].centroid, target);
                    const double dc = distance2(map[it->second].centroid, target);
                    if (dn < dc || (dn == dc && wp < it->second)) it->second = wp;
                }
            }
            const GridAddress addr = idx.address_of(y);
            for (const auto& [owner, wp] : hop) own_results[c].push_back({owner, {addr, wp}});
        }
    });

    rt.tables.resize(map.size());
    for (BuildingId b = 0; b < map.size(); ++b) rt.tables[b].owner = b;
    for (std::size_t d = 0; d < nc; ++d) {
        const auto& res = dest_results[d];
        rt.stats.path_computations += res.paths;
        rt.stats.filled_entries += res.filled;
        rt.stats.pathology_fixes += res.fixes;
        ++rt.stats.trees;
        for (const auto& [owner, wp] : res.entries) {
            rt.tables[owner].entries.push_back({cells[d].prefix, wp});
        }
    }
    for (std::size_t c = 0; c < nc; ++c) {
        rt.stats.own_cell_paths += own_paths[c];
        for (const auto& [owner, e] : own_results[c]) {
            rt.stats.transit_entries += idx.cell_of(owner) != c;
            rt.tables[owner].entries.push_back(e);
        }
    }
    for (auto& t : rt.tables) t.sort();
    return rt;
}

inline std::vector<RoutingTable> compress_tables(std::span<const RoutingTable> tables, const GridIndex& idx,
                                                 unsigned threads = 0)
{
    std::vector<RoutingTable> out(tables.size());
    detail::parallel_for(tables.size(), threads, [&](std::size_t i) { out[i] = compress_table(tables[i], idx); });
    return out;
}

// ---------------------------------------------------------------------------
// Table files
// ---------------------------------------------------------------------------

namespace detail {
inline constexpr char kTableMagic[4] = {'M', 'M', 'R', 'T'};
inline constexpr std::uint8_t kTableVersion = 1;
} // namespace detail

/// MMRT, version byte, LE u32 owner, LE u32 entry count, then per entry the
/// prefix length byte, packed prefix bytes, LE u32 waypoint.
inline std::vector<std::uint8_t> serialize_table(const RoutingTable& t)
{
    detail::ByteWriter w;
    w.bytes(detail::kTableMagic, 4);
    w.u8(detail::kTableVersion);
    w.u32(t.owner);
    w.u32(static_cast<std::uint32_t>(t.entries.size()));
    for (const auto& e : t.entries) {
        w.u8(e.prefix.len);
        const auto packed = pack_bits(e.prefix);
        w.bytes(packed.data(), packed.size());
        w.u32(e.next_waypoint);
    }
    return w.take();
}

inline RoutingTable parse_table(std::span<const std::uint8_t> raw)
{
    detail::ByteReader r(raw);
    r.need(5);
    if (std::memcmp(raw.data(), detail::kTableMagic, 4) != 0) {
        throw MapError("not a routing table: bad magic");
    }
    r.str(4);
    if (const auto v = r.u8(); v != detail::kTableVersion) {
        throw MapError("unsupported routing table version " + std::to_string(v));
    }
    RoutingTable t;
    t.owner = static_cast<BuildingId>(r.le(4));
    const auto n = static_cast<std::uint32_t>(r.le(4));
    for (std::uint32_t i = 0; i < n; ++i) {
        const int len = r.u8();
        if (len > kMaxAddressBits) throw MapError("routing prefix longer than 64 bits");
        const std::string bytes = r.str(static_cast<std::size_t>((len + 7) / 8));
        RoutingEntry e;
        try {
            e.prefix = unpack_bits(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()), len);
        } catch (const std::invalid_argument& ex) {
            throw MapError(std::string("bad routing prefix: ") + ex.what());
        }
        e.next_waypoint = static_cast<BuildingId>(r.le(4));
        t.entries.push_back(e);
    }
    if (!r.done()) throw MapError("trailing bytes in routing table");
    return t;
}

inline void write_tables_csv(std::ostream& os, std::span<const RoutingTable> tables)
{
    os << "owner,prefix,len,next_waypoint\n";
    for (const auto& t : tables) {
        for (const auto& e : t.entries) {
            os << t.owner << ',' << to_bits(e.prefix) << ',' << int{e.prefix.len} << ',';
            if (e.next_waypoint == kNoRoute) {
                os << "none";
            } else {
                os << e.next_waypoint;
            }
            os << '\n';
        }
    }
}

/// `entries,tables` rows, one per distinct table size.
inline void write_size_histogram_csv(std::ostream& os, std::span<const RoutingTable> tables)
{
    std::map<std::size_t, std::size_t> hist;
    for (const auto& t : tables) ++hist[t.entries.size()];
    os << "entries,tables\n";
    for (const auto& [n, count] : hist) os << n << ',' << count << '\n';
}

} // namespace mapmesh
