#pragma once

#include "addressing.hpp"
#include "corridor.hpp"
#include "graph.hpp"
#include "routes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace mapmesh {

// ---------------------------------------------------------------------------
// Header codec
// ---------------------------------------------------------------------------

inline constexpr std::uint8_t kHeaderVersion = 1;

struct PacketHeader {
    std::uint8_t version = kHeaderVersion;
    std::uint8_t flags = 0;
    BuildingId source = 0;
    std::uint32_t sequence = 0;
    BuildingId sender = 0; ///< building of the most recent broadcaster
    BuildingId prev_waypoint = 0;
    BuildingId next_waypoint = 0;
    GridAddress dest;
    std::uint16_t hop_budget = 0;

    friend bool operator==(const PacketHeader&, const PacketHeader&) = default;
};

class HeaderError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Encoded size for a destination of `dest_bits` bits.
constexpr std::size_t header_size(int dest_bits) noexcept
{
    return 1 + 1 + 4 * 5 + 1 + static_cast<std::size_t>((dest_bits + 7) / 8) + 2;
}

/// Big-endian, fields in declaration order; dest as a length byte followed by
/// its packed bits.
inline std::vector<std::uint8_t> encode_header(const PacketHeader& h)
{
    if (h.dest.len > kMaxAddressBits) {
        throw HeaderError("destination longer than 64 bits");
    }
    std::vector<std::uint8_t> out;
    out.reserve(header_size(h.dest.len));
    auto be = [&](std::uint64_t v, int width) {
        for (int i = width - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    };
    be(h.version, 1);
    be(h.flags, 1);
    be(h.source, 4);
    be(h.sequence, 4);
    be(h.sender, 4);
    be(h.prev_waypoint, 4);
    be(h.next_waypoint, 4);
    be(h.dest.len, 1);
    const auto packed = pack_bits(h.dest);
    out.insert(out.end(), packed.begin(), packed.end());
    be(h.hop_budget, 2);
    return out;
}

inline PacketHeader decode_header(std::span<const std::uint8_t> in)
{
    std::size_t pos = 0;
    auto be = [&](int width) {
        if (pos + static_cast<std::size_t>(width) > in.size()) throw HeaderError("truncated header");
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) v = (v << 8) | in[pos++];
        return v;
    };
    PacketHeader h;
    h.version = static_cast<std::uint8_t>(be(1));
    if (h.version != kHeaderVersion) {
        throw HeaderError("unsupported header version " + std::to_string(h.version));
    }
    h.flags = static_cast<std::uint8_t>(be(1));
    h.source = static_cast<BuildingId>(be(4));
    h.sequence = static_cast<std::uint32_t>(be(4));
    h.sender = static_cast<BuildingId>(be(4));
    h.prev_waypoint = static_cast<BuildingId>(be(4));
    h.next_waypoint = static_cast<BuildingId>(be(4));
    const int len = static_cast<int>(be(1));
    if (len > kMaxAddressBits) {
        throw HeaderError("destination longer than 64 bits");
    }
    const std::size_t nbytes = static_cast<std::size_t>((len + 7) / 8);
    if (pos + nbytes > in.size()) throw HeaderError("truncated header");
    try {
        h.dest = unpack_bits(in.subspan(pos, nbytes), len);
    } catch (const std::invalid_argument& e) {
        throw HeaderError(e.what());
    }
    pos += nbytes;
    h.hop_budget = static_cast<std::uint16_t>(be(2));
    if (pos != in.size()) throw HeaderError("trailing bytes after header");
    return h;
}

// ---------------------------------------------------------------------------
// Suppression
// ---------------------------------------------------------------------------

enum class RankMode {
    literal,     ///< 2^i for every heard building, minus 1 per farther one
    closer_only, ///< 2^i only for heard buildings closer than our own
};

struct ProtocolParams {
    double conduit_width = kDefaultConduitWidthM;
    double unit_ms = 25.0;     ///< U, inter-building rank unit
    double in_building_ms = 10.0; ///< c
    double jitter_ms = 2.0;    ///< J
    std::uint16_t hop_budget = 1024;
    bool suppression = true;
    RankMode rank_mode = RankMode::literal;
    double heard_window_ms = 60000.0;
    std::size_t dedup_capacity = 4096;

    void validate() const
    {
        if (!(conduit_width > 0.0)) throw std::invalid_argument("conduit width must be positive");
        if (!(in_building_ms >= 0.0) || !(jitter_ms >= 0.0)) {
            throw std::invalid_argument("delays must be non-negative");
        }
        if (!(unit_ms > 2.0 * in_building_ms + jitter_ms)) {
            throw std::invalid_argument("unit delay U must exceed 2c + J");
        }
    }
};

inline double centroid_gap(const BuildingMap& map, BuildingId a, BuildingId b)
{
    return distance(map[a].centroid, map[b].centroid);
}

/// Rank of `own` among the sender's neighbors by centroid distance to the
/// waypoint, times U. nullopt means refuse: `own` is not a neighbor of the
/// sender, or is farther from the waypoint than the sender.
inline std::optional<double> inter_building_delay(const BuildingMap& map, const BuildingGraph& g, BuildingId sender,
                                                  BuildingId own, BuildingId next_wp, double unit_ms)
{
    if (!g.adjacent(sender, own)) return std::nullopt;
    const double mine = centroid_gap(map, own, next_wp);
    if (mine > centroid_gap(map, sender, next_wp)) return std::nullopt;
    std::size_t rank = 1;
    for (const auto& nb : g.neighbors(sender)) {
        if (nb.id == own) continue;
        const double d = centroid_gap(map, nb.id, next_wp);
        if (d < mine || (d == mine && nb.id < own)) ++rank;
    }
    return static_cast<double>(rank) * unit_ms;
}

/// Neighbors of `own` ordered by decreasing distance to the waypoint, so the
/// best next building sits at the end. Ties by ascending id.
inline std::vector<BuildingId> ranked_neighbors(const BuildingMap& map, const BuildingGraph& g, BuildingId own,
                                                BuildingId next_wp)
{
    std::vector<std::pair<double, BuildingId>> v;
    for (const auto& nb : g.neighbors(own)) v.emplace_back(centroid_gap(map, nb.id, next_wp), nb.id);
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::vector<BuildingId> out;
    out.reserve(v.size());
    for (const auto& [d, id] : v) out.push_back(id);
    return out;
}

/// In-building rank R. `heard(b)` says whether this device heard b recently.
template <typename Heard>
long double in_building_rank(const BuildingMap& map, std::span<const BuildingId> nb_sorted, Heard&& heard,
                             BuildingId own, BuildingId next_wp, RankMode mode = RankMode::literal)
{
    const double mine = centroid_gap(map, own, next_wp);
    long double r = 0.0L;
    for (std::size_t i = 0; i < nb_sorted.size(); ++i) {
        const BuildingId b = nb_sorted[i];
        if (!heard(b)) continue;
        const bool farther = centroid_gap(map, b, next_wp) > mine;
        if (mode == RankMode::literal || !farther) r += std::ldexp(1.0L, static_cast<int>(i));
        if (farther) r -= 1.0L;
    }
    return r;
}

/// Sum of 2^i over |Nb| sorted neighbors.
inline long double best_score(std::size_t neighbor_count)
{
    return std::ldexp(1.0L, static_cast<int>(neighbor_count)) - 1.0L;
}

/// c * (1 - log2 R / log2 best), clamped to [0, c]; R <= 0 maps to 2c.
inline double in_building_delay(long double r, long double best, double c_ms)
{
    if (r <= 0.0L) return 2.0 * c_ms;
    if (r >= best || best <= 1.0L) return 0.0;
    const long double frac = std::log2(r) / std::log2(best);
    return std::clamp(static_cast<double>(c_ms * (1.0L - frac)), 0.0, c_ms);
}

// ---------------------------------------------------------------------------
// Device state machine
// ---------------------------------------------------------------------------

struct PacketKey {
    BuildingId source = 0;
    std::uint32_t sequence = 0;

    friend bool operator==(const PacketKey&, const PacketKey&) = default;
};

struct PacketKeyHash {
    std::size_t operator()(const PacketKey& k) const noexcept
    {
        return static_cast<std::size_t>(rng::key(k.source, k.sequence));
    }
};

enum class Disposition { broadcast, suppressed };

/// Bounded LRU of packets this device has finished with.
class DedupCache {
public:
    explicit DedupCache(std::size_t capacity = 4096) : capacity_(capacity) {}

    std::optional<Disposition> find(const PacketKey& k)
    {
        auto it = index_.find(k);
        if (it == index_.end()) return std::nullopt;
        order_.splice(order_.begin(), order_, it->second);
        return it->second->second;
    }

    void put(const PacketKey& k, Disposition d)
    {
        if (auto it = index_.find(k); it != index_.end()) {
            it->second->second = d;
            order_.splice(order_.begin(), order_, it->second);
            return;
        }
        order_.emplace_front(k, d);
        index_[k] = order_.begin();
        if (order_.size() > capacity_) {
            index_.erase(order_.back().first);
            order_.pop_back();
        }
    }

    std::size_t size() const noexcept { return order_.size(); }

private:
    std::size_t capacity_;
    std::list<std::pair<PacketKey, Disposition>> order_;
    std::unordered_map<PacketKey, std::list<std::pair<PacketKey, Disposition>>::iterator, PacketKeyHash> index_;
};

struct PendingTx {
    double fire_at_ms = 0.0;
    PacketHeader outgoing;
    BuildingId reference_wp = 0; ///< waypoint the suppression comparison is made against
};

struct NodeState {
    DeviceId device = 0;
    BuildingId building = 0;
    DedupCache dedup;
    std::unordered_map<BuildingId, double> heard; ///< neighbor building -> last heard ms
    std::unordered_map<PacketKey, PendingTx, PacketKeyHash> pending;

    NodeState(DeviceId d, BuildingId b, std::size_t dedup_capacity = 4096)
        : device(d), building(b), dedup(dedup_capacity)
    {
    }

    bool heard_recently(BuildingId b, double now_ms, double window_ms) const
    {
        auto it = heard.find(b);
        return it != heard.end() && now_ms - it->second <= window_ms;
    }
};

/// Read-only world a device consults.
struct ForwardContext {
    const BuildingMap& map;
    const BuildingGraph& graph;
    const GridIndex& grid;
    std::span<const RoutingTable> tables; ///< per building, compressed
    ProtocolParams params;
};

enum class DropReason { duplicate, no_route, out_of_conduit, expired, backward };

inline const char* to_string(DropReason r)
{
    switch (r) {
    case DropReason::duplicate: return "duplicate";
    case DropReason::no_route: return "no-route";
    case DropReason::out_of_conduit: return "out-of-conduit";
    case DropReason::expired: return "expired";
    case DropReason::backward: return "backward";
    }
    return "?";
}

struct Deliver {};
struct Drop {
    DropReason reason;
};
struct Schedule {
    double delay_ms;
    PacketHeader outgoing;
    BuildingId reference_wp;
};
struct Suppress {};

using ForwardAction = std::variant<Deliver, Drop, Schedule, Suppress>;

inline std::string action_name(const ForwardAction& a)
{
    struct V {
        std::string operator()(const Deliver&) const { return "deliver"; }
        std::string operator()(const Drop& d) const { return std::string("drop:") + to_string(d.reason); }
        std::string operator()(const Schedule&) const { return "schedule"; }
        std::string operator()(const Suppress&) const { return "suppress"; }
    };
    return std::visit(V{}, a);
}

/// Note that this device heard `sender`, if it is a neighbor building.
inline void record_heard(NodeState& s, const ForwardContext& ctx, BuildingId sender, double now_ms)
{
    if (sender != s.building && ctx.graph.adjacent(s.building, sender)) s.heard[sender] = now_ms;
}

/// First reception of a packet at a device without a pending timer for it.
/// `jitter_ms` is the caller's draw in [0, J].
inline ForwardAction handle_receive(NodeState& s, const PacketHeader& h, double now_ms, const ForwardContext& ctx,
                                    double jitter_ms)
{
    const auto& p = ctx.params;
    record_heard(s, ctx, h.sender, now_ms);
    if (ctx.grid.address_of(s.building) == h.dest) return Deliver{};
    const PacketKey key{h.source, h.sequence};
    if (s.dedup.find(key)) return Drop{DropReason::duplicate};

    PacketHeader out = h;
    const BuildingId reference = h.next_waypoint;
    if (s.building == h.next_waypoint) {
        const auto next = ctx.tables[s.building].lookup(h.dest);
        if (!next || *next == s.building) return Drop{DropReason::no_route};
        out.prev_waypoint = h.next_waypoint;
        out.next_waypoint = *next;
    }
    if (!in_conduit(ctx.map[s.building].centroid,
                    conduit_between(ctx.map, out.prev_waypoint, out.next_waypoint, p.conduit_width))) {
        return Drop{DropReason::out_of_conduit};
    }
    if (h.hop_budget == 0) return Drop{DropReason::expired};
    out.hop_budget = static_cast<std::uint16_t>(h.hop_budget - 1);
    out.sender = s.building;

    double delay = jitter_ms;
    if (p.suppression) {
        const auto inter = inter_building_delay(ctx.map, ctx.graph, h.sender, s.building, reference, p.unit_ms);
        if (!inter) return Drop{DropReason::backward};
        const auto nb = ranked_neighbors(ctx.map, ctx.graph, s.building, out.next_waypoint);
        const long double r = in_building_rank(
            ctx.map, nb, [&](BuildingId b) { return s.heard_recently(b, now_ms, p.heard_window_ms); }, s.building,
            out.next_waypoint, p.rank_mode);
        delay += *inter + in_building_delay(r, best_score(nb.size()), p.in_building_ms);
    }
    return Schedule{delay, out, reference};
}

enum class OverhearResult { keep, suppress };

/// A copy of a packet this device holds a timer for. Suppress when the
/// copy's sender building is no farther from the waypoint than our own.
inline OverhearResult handle_overhear(NodeState& s, const PendingTx& pending, BuildingId copy_sender,
                                      double now_ms, const ForwardContext& ctx)
{
    record_heard(s, ctx, copy_sender, now_ms);
    if (!ctx.params.suppression) return OverhearResult::keep;
    const double theirs = centroid_gap(ctx.map, copy_sender, pending.reference_wp);
    const double mine = centroid_gap(ctx.map, s.building, pending.reference_wp);
    return theirs <= mine ? OverhearResult::suppress : OverhearResult::keep;
}

/// `t_ms,event,device,building,src,seq,action`
inline std::string trace_line(double t_ms, std::string_view event, DeviceId device, BuildingId building,
                              BuildingId src, std::uint32_t seq, std::string_view action)
{
    char t[32];
    std::snprintf(t, sizeof t, "%.3f", t_ms);
    std::string s = t;
    s += ',';
    s += event;
    s += ',' + std::to_string(device) + ',' + std::to_string(building) + ',' + std::to_string(src) + ',' +
         std::to_string(seq) + ',';
    s += action;
    return s;
}

} // namespace mapmesh
