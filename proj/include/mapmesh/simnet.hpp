#pragma once

#include "protocol.hpp"
#include "routes.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace mapmesh {

// ---------------------------------------------------------------------------
// Loss model
// ---------------------------------------------------------------------------

struct LossModel {
    double cliff_start_m = 70.0;
    double cliff_end_m = 80.0;
    double ell = 0.0;             ///< maximum stochastic per-link loss
    bool per_packet_rate = false; ///< redraw the link rate for every packet
};

/// 0 up to the cliff, 1 past it, linear in between.
inline double distance_loss(const LossModel& m, double d)
{
    if (d <= m.cliff_start_m) return 0.0;
    if (d >= m.cliff_end_m) return 1.0;
    return (d - m.cliff_start_m) / (m.cliff_end_m - m.cliff_start_m);
}

inline double loss_probability(const LossModel& m, double d, double r)
{
    return 1.0 - (1.0 - distance_loss(m, d)) * (1.0 - r);
}

// ---------------------------------------------------------------------------
// World and scenario
// ---------------------------------------------------------------------------

class ScenarioError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct WorldParams {
    double range_m = kDefaultRangeM;
    double cell_target_m = kDefaultCellTargetM;
    double k = kDefaultExponent;
    double conduit_width_m = kDefaultConduitWidthM;
    std::uint64_t table_seed = 0;
    unsigned threads = 0;
};

/// Everything a scenario shares with its siblings: map, graph, grid and the
/// compressed tables built for one (k, W).
struct World {
    BuildingMap map;
    BuildingGraph graph;
    GridIndex grid;
    std::vector<RoutingTable> tables;
    WorldParams params;
    PrecomputeStats stats;
};

inline World build_world(BuildingMap map, const WorldParams& p = {}, bool with_tables = true)
{
    if (map.empty()) throw ScenarioError("map has no buildings");
    World w;
    w.map = std::move(map);
    w.params = p;
    w.graph = build_graph(w.map, p.range_m);
    w.grid = build_grid(w.map, p.cell_target_m);
    if (with_tables) {
        auto rt = precompute_tables(w.map, w.graph, w.grid, {p.k, p.conduit_width_m, p.table_seed, p.threads});
        w.stats = rt.stats;
        w.tables = compress_tables(rt.tables, w.grid, p.threads);
    }
    return w;
}

enum class Scheme { mapmesh, gpsr };

struct SimScenario {
    std::string name = "scenario";
    std::string map_path;
    Scheme scheme = Scheme::mapmesh;
    double location_error_m = 0.0; ///< GPSR perceived-position error bound
    LossModel loss;
    ProtocolParams protocol;
    double k = kDefaultExponent;
    double range_m = kDefaultRangeM;
    double cell_target_m = kDefaultCellTargetM;
    double density_m2 = kDefaultDensityM2;
    std::size_t pairs = 100;
    std::uint64_t seed = 1;
    std::uint64_t table_seed = 0;
    double packet_interval_ms = 1000.0;
    double packet_wall_ms = 60000.0;
    double propagation_ms = 1.0;
    int gpsr_retransmits = 8;
    int gpsr_ttl = 4096;
};

inline std::string scheme_label(const SimScenario& s)
{
    if (s.scheme == Scheme::mapmesh) return s.protocol.suppression ? "mapmesh" : "mapmesh-flood";
    if (s.location_error_m == 0.0) return "gpsr";
    char buf[32];
    std::snprintf(buf, sizeof buf, "gpsr-%g", s.location_error_m);
    return buf;
}

inline std::string format_number(double v)
{
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

/// One packet: a source device and a destination building (plus a concrete
/// device there for GPSR's position target).
struct PacketSpec {
    DeviceId source = 0;
    BuildingId dest_building = 0;
    DeviceId dest_device = 0;
};

/// Uniform source device; uniform destination building other than the
/// source's; uniform device in it.
inline std::vector<PacketSpec> generate_pairs(const BuildingMap& map, const DeviceSet& devices, std::size_t count,
                                              std::uint64_t seed)
{
    if (map.size() < 2) throw ScenarioError("need at least two buildings for source-destination pairs");
    rng::Stream s(seed, rng::Purpose::pairs);
    std::vector<PacketSpec> out;
    for (std::size_t i = 0; i < count; ++i) {
        PacketSpec p;
        p.source = static_cast<DeviceId>(s.below(devices.size()));
        const BuildingId sb = devices.devices[p.source].building_id;
        auto d = static_cast<BuildingId>(s.below(map.size() - 1));
        p.dest_building = d >= sb ? d + 1 : d;
        const auto& members = devices.by_building[p.dest_building];
        p.dest_device = members[s.below(members.size())];
        out.push_back(p);
    }
    return out;
}

struct SimMetrics {
    std::string scheme;
    std::size_t packets = 0;
    std::size_t delivered = 0;
    std::size_t transmissions = 0;
    std::vector<int> hops;           ///< per packet, -1 when undelivered
    std::vector<double> latency_ms;  ///< per packet, -1 when undelivered

    double delivery_rate() const { return packets ? static_cast<double>(delivered) / packets : 0.0; }

    double mean_hops() const
    {
        double s = 0.0;
        for (int h : hops) s += h >= 0 ? h : 0;
        return delivered ? s / static_cast<double>(delivered) : 0.0;
    }

    double mean_latency_ms() const
    {
        double s = 0.0;
        for (double l : latency_ms) s += l >= 0 ? l : 0.0;
        return delivered ? s / static_cast<double>(delivered) : 0.0;
    }

    std::string serialize() const
    {
        nlohmann::ordered_json j;
        j["scheme"] = scheme;
        j["packets"] = packets;
        j["delivered"] = delivered;
        j["transmissions"] = transmissions;
        j["hops"] = hops;
        j["latency_ms"] = latency_ms;
        return j.dump();
    }
};

/// One row of the optional packet trace. tx/parent tie every transmission to
/// the reception that caused it (parent -1 for source injections).
struct TraceRecord {
    double t_ms = 0.0;
    std::string event;
    DeviceId device = 0;
    BuildingId building = 0;
    BuildingId source = 0;
    std::uint32_t sequence = 0;
    std::string action;
    long long tx = -1;
    long long parent_tx = -1;

    std::string line() const { return trace_line(t_ms, event, device, building, source, sequence, action); }
};

namespace detail {

/// Devices within `radius` of each device, by uniform bucketing.
inline std::vector<std::vector<std::pair<DeviceId, double>>> device_neighbors(std::span<const Point> pos,
                                                                               double radius)
{
    std::vector<std::vector<std::pair<DeviceId, double>>> out(pos.size());
    if (pos.empty()) return out;
    Rect box = bounding_box(pos);
    const double cell = std::max(radius, 1.0);
    const long nx = static_cast<long>(box.width() / cell) + 1;
    auto key = [&](Point p) {
        return std::pair{static_cast<long>((p.x - box.min.x) / cell), static_cast<long>((p.y - box.min.y) / cell)};
    };
    std::unordered_map<long, std::vector<DeviceId>> buckets;
    for (DeviceId i = 0; i < pos.size(); ++i) {
        auto [x, y] = key(pos[i]);
        buckets[y * nx + x].push_back(i);
    }
    const double r2 = radius * radius;
    for (DeviceId i = 0; i < pos.size(); ++i) {
        auto [x, y] = key(pos[i]);
        for (long dy = -1; dy <= 1; ++dy) {
            for (long dx = -1; dx <= 1; ++dx) {
                if (x + dx < 0 || x + dx >= nx) continue;
                auto it = buckets.find((y + dy) * nx + (x + dx));
                if (it == buckets.end()) continue;
                for (DeviceId j : it->second) {
                    if (j == i) continue;
                    const double d2 = distance2(pos[i], pos[j]);
                    if (d2 <= r2) out[i].push_back({j, std::sqrt(d2)});
                }
            }
        }
        std::sort(out[i].begin(), out[i].end());
    }
    return out;
}

inline double link_rate(const SimScenario& s, DeviceId u, DeviceId v, std::size_t packet)
{
    if (s.loss.ell == 0.0) return 0.0;
    if (s.loss.per_packet_rate) return s.loss.ell * rng::draw(s.seed, rng::Purpose::link_rate, u, v, packet + 1);
    return s.loss.ell * rng::draw(s.seed, rng::Purpose::link_rate, u, v);
}

inline void validate(const World& w, const DeviceSet& devices, const SimScenario& s)
{
    if (w.map.empty()) throw ScenarioError("map has no buildings");
    if (devices.size() == 0) throw ScenarioError("no devices placed");
    if (!(s.loss.cliff_end_m > s.loss.cliff_start_m) || s.loss.cliff_start_m < 0.0) {
        throw ScenarioError("loss cliff must satisfy 0 <= cliff_start < cliff_end");
    }
    if (s.loss.ell < 0.0 || s.loss.ell > 1.0) throw ScenarioError("ell must lie in [0, 1]");
    if (s.scheme == Scheme::mapmesh) {
        if (w.tables.size() != w.map.size()) throw ScenarioError("MapMesh scenario needs routing tables");
        try {
            s.protocol.validate();
        } catch (const std::invalid_argument& e) {
            throw ScenarioError(e.what());
        }
    }
    if (s.location_error_m < 0.0) throw ScenarioError("location error must be non-negative");
}

} // namespace detail

// ---------------------------------------------------------------------------
// MapMesh
// ---------------------------------------------------------------------------

/// Event-driven broadcast simulation of the MapMesh forwarding protocol.
inline SimMetrics run_simulation(const World& w, const DeviceSet& devices, std::span<const PacketSpec> packets,
                                 const SimScenario& s, std::vector<TraceRecord>* trace = nullptr)
{
    detail::validate(w, devices, s);
    if (s.scheme != Scheme::mapmesh) throw ScenarioError("run_simulation expects a MapMesh scenario");

    std::vector<Point> pos;
    for (const auto& d : devices.devices) pos.push_back(d.position);
    const auto reach = detail::device_neighbors(pos, s.loss.cliff_end_m);

    ProtocolParams pp = s.protocol;
    const ForwardContext ctx{w.map, w.graph, w.grid, w.tables, pp};
    std::vector<NodeState> nodes;
    nodes.reserve(devices.size());
    for (const auto& d : devices.devices) nodes.emplace_back(d.id, d.building_id, pp.dedup_capacity);

    SimMetrics m;
    m.scheme = scheme_label(s);
    m.packets = packets.size();
    m.hops.assign(packets.size(), -1);
    m.latency_ms.assign(packets.size(), -1.0);

    struct Tx {
        DeviceId from;
        PacketHeader header;
    };
    std::vector<Tx> txs;

    enum class Kind { receive, fire };
    struct Event {
        double t;
        std::uint64_t order;
        Kind kind;
        DeviceId device;
        std::uint32_t packet;
        std::size_t tx; // receive: carrying transmission
        bool operator>(const Event& o) const { return t != o.t ? t > o.t : order > o.order; }
    };
    std::priority_queue<Event, std::vector<Event>, std::greater<>> queue;
    std::uint64_t order = 0;
    std::vector<double> injected(packets.size());
    std::vector<BuildingId> source_building(packets.size());

    auto log = [&](double t, const char* ev, DeviceId dev, const PacketHeader& h, std::string action, long long tx,
                   long long parent) {
        if (trace) {
            trace->push_back({t, ev, dev, devices.devices[dev].building_id, h.source, h.sequence, std::move(action),
                              tx, parent});
        }
    };

    auto broadcast = [&](double t, DeviceId u, const PacketHeader& h, long long parent) {
        const std::size_t id = txs.size();
        txs.push_back({u, h});
        ++m.transmissions;
        log(t, "tx", u, h, "broadcast", static_cast<long long>(id), parent);
        for (const auto& [v, d] : reach[u]) {
            const double p = loss_probability(s.loss, d, detail::link_rate(s, u, v, h.sequence));
            if (p >= 1.0) continue;
            if (p > 0.0 && rng::draw(s.seed, rng::Purpose::packet_loss, id, v) < p) continue;
            queue.push({t + s.propagation_ms, order++, Kind::receive, v, h.sequence, id});
        }
    };

    for (std::size_t i = 0; i < packets.size(); ++i) {
        const double t = static_cast<double>(i) * s.packet_interval_ms;
        injected[i] = t;
        const auto& spec = packets[i];
        const DeviceId src = spec.source;
        const BuildingId sb = devices.devices[src].building_id;
        source_building[i] = sb;
        PacketHeader h;
        h.source = sb;
        h.sequence = static_cast<std::uint32_t>(i);
        h.sender = sb;
        h.prev_waypoint = sb;
        h.dest = w.grid.address_of(spec.dest_building);
        h.hop_budget = pp.hop_budget;
        if (spec.dest_building == sb) {
            h.next_waypoint = sb;
        } else {
            const auto next = w.tables[sb].lookup(h.dest);
            if (!next) {
                log(t, "inject", src, h, "drop:no-route", -1, -1);
                continue;
            }
            h.next_waypoint = *next;
        }
        // Injection is scheduled as a timer so packets interleave in time order.
        nodes[src].pending[{h.source, h.sequence}] = {t, h, h.next_waypoint};
        queue.push({t, order++, Kind::fire, src, h.sequence, std::numeric_limits<std::size_t>::max()});
    }

    while (!queue.empty()) {
        const Event e = queue.top();
        queue.pop();
        if (e.t > injected[e.packet] + s.packet_wall_ms) continue;
        NodeState& node = nodes[e.device];
        if (e.kind == Kind::fire) {
            auto it = node.pending.find({source_building[e.packet], e.packet});
            if (it == node.pending.end() || it->second.fire_at_ms != e.t) continue;
            const PacketHeader out = it->second.outgoing;
            const long long parent = e.tx == std::numeric_limits<std::size_t>::max() ? -1 : static_cast<long long>(e.tx);
            node.pending.erase(it);
            node.dedup.put({out.source, out.sequence}, Disposition::broadcast);
            broadcast(e.t, e.device, out, parent);
            continue;
        }

        const Tx& tx = txs[e.tx];
        const PacketHeader& h = tx.header;
        const PacketKey key{h.source, h.sequence};
        if (auto it = node.pending.find(key); it != node.pending.end()) {
            const auto r = handle_overhear(node, it->second, h.sender, e.t, ctx);
            if (r == OverhearResult::suppress) {
                node.pending.erase(it);
                node.dedup.put(key, Disposition::suppressed);
                log(e.t, "rx", e.device, h, "suppress", static_cast<long long>(e.tx), -1);
            } else {
                log(e.t, "rx", e.device, h, "keep", static_cast<long long>(e.tx), -1);
            }
            continue;
        }
        const double jitter = pp.jitter_ms * rng::draw(s.seed, rng::Purpose::jitter, e.device, e.tx);
        const ForwardAction a = handle_receive(node, h, e.t, ctx, jitter);
        log(e.t, "rx", e.device, h, action_name(a), static_cast<long long>(e.tx), -1);
        if (std::holds_alternative<Deliver>(a)) {
            const std::size_t i = e.packet;
            if (m.hops[i] < 0) {
                ++m.delivered;
                m.hops[i] = pp.hop_budget - h.hop_budget + 1;
                m.latency_ms[i] = e.t - injected[i];
            }
        } else if (const auto* sch = std::get_if<Schedule>(&a)) {
            const double at = e.t + sch->delay_ms;
            node.pending[key] = {at, sch->outgoing, sch->reference_wp};
            queue.push({at, order++, Kind::fire, e.device, h.sequence, e.tx});
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// GPSR
// ---------------------------------------------------------------------------

namespace detail {

inline double ccw_angle(Point from_dir, Point to_dir)
{
    double a = std::atan2(to_dir.y, to_dir.x) - std::atan2(from_dir.y, from_dir.x);
    while (a <= 0.0) a += 2.0 * std::numbers::pi;
    while (a > 2.0 * std::numbers::pi) a -= 2.0 * std::numbers::pi;
    return a;
}

inline std::optional<Point> segment_intersection(Point p1, Point p2, Point q1, Point q2)
{
    const Point r = p2 - p1;
    const Point s = q2 - q1;
    const double den = cross(r, s);
    if (den == 0.0) return std::nullopt;
    const double t = cross(q1 - p1, s) / den;
    const double u = cross(q1 - p1, r) / den;
    if (t < 0.0 || t > 1.0 || u < 0.0 || u > 1.0) return std::nullopt;
    return p1 + t * r;
}

} // namespace detail

/// Greedy perimeter stateless routing over perceived positions, with
/// per-hop link retransmissions and the Gabriel-graph perimeter mode.
inline SimMetrics run_gpsr(const World& w, const DeviceSet& devices, std::span<const PacketSpec> packets,
                           const SimScenario& s, std::vector<TraceRecord>* trace = nullptr)
{
    detail::validate(w, devices, s);
    if (s.scheme != Scheme::gpsr) throw ScenarioError("run_gpsr expects a GPSR scenario");
    const std::size_t n = devices.size();
    std::vector<Point> real(n), seen(n);
    for (DeviceId i = 0; i < n; ++i) {
        real[i] = devices.devices[i].position;
        rng::Stream st(s.seed, rng::Purpose::location_error, i);
        const double ex = st.uniform(-s.location_error_m, s.location_error_m);
        const double ey = st.uniform(-s.location_error_m, s.location_error_m);
        seen[i] = real[i] + Point{ex, ey};
    }
    // Neighbor tables are built from perceived positions, so a listed
    // neighbor may really sit past the loss cliff.
    const auto nbr = detail::device_neighbors(seen, s.loss.cliff_start_m);

    // Gabriel planarization on perceived positions.
    std::vector<std::vector<DeviceId>> planar(n);
    for (DeviceId u = 0; u < n; ++u) {
        for (const auto& [v, duv] : nbr[u]) {
            const Point mid = 0.5 * (seen[u] + seen[v]);
            const double r2 = 0.25 * duv * duv;
            bool keep = true;
            for (const auto& [x, dux] : nbr[u]) {
                if (x != v && distance2(seen[x], mid) < r2) {
                    keep = false;
                    break;
                }
            }
            if (keep) planar[u].push_back(v);
        }
    }

    SimMetrics m;
    m.scheme = scheme_label(s);
    m.packets = packets.size();
    m.hops.assign(packets.size(), -1);
    m.latency_ms.assign(packets.size(), -1.0);

    auto log = [&](double t, const char* ev, DeviceId dev, std::uint32_t seq, std::string action, long long tx,
                   long long parent) {
        if (trace) {
            trace->push_back({t, ev, dev, devices.devices[dev].building_id, devices.devices[packets[seq].source].building_id,
                              seq, std::move(action), tx, parent});
        }
    };
    long long tx_id = 0;

    // First planar neighbor counter-clockwise from direction `dir` at u.
    auto rotate = [&](DeviceId u, Point dir) {
        std::optional<DeviceId> best;
        double best_a = 0.0;
        for (DeviceId v : planar[u]) {
            const double a = detail::ccw_angle(dir, seen[v] - seen[u]);
            if (!best || a < best_a || (a == best_a && v < *best)) {
                best = v;
                best_a = a;
            }
        }
        return best;
    };

    for (std::size_t i = 0; i < packets.size(); ++i) {
        const auto& spec = packets[i];
        const auto seq = static_cast<std::uint32_t>(i);
        const Point dest = seen[spec.dest_device];
        DeviceId cur = spec.source;
        DeviceId prev = cur;
        bool perimeter = false;
        Point lp, lf;
        std::pair<DeviceId, DeviceId> e0{0, 0};
        int ttl = s.gpsr_ttl;
        int hops = 0;
        double t = static_cast<double>(i) * s.packet_interval_ms;
        const double t0 = t;
        long long parent = -1;
        for (;;) {
            if (devices.devices[cur].building_id == spec.dest_building) {
                ++m.delivered;
                m.hops[i] = hops;
                m.latency_ms[i] = t - t0;
                log(t, "rx", cur, seq, "deliver", parent, -1);
                break;
            }
            if (ttl <= 0) {
                log(t, "rx", cur, seq, "drop:expired", parent, -1);
                break;
            }
            const double here = distance(seen[cur], dest);
            if (perimeter && here < distance(lp, dest)) perimeter = false;
            std::optional<DeviceId> next;
            if (!perimeter) {
                double best = here;
                for (const auto& [v, d] : nbr[cur]) {
                    const double dv = distance(seen[v], dest);
                    if (dv < best || (next && dv == best && v < *next)) {
                        best = dv;
                        next = v;
                    }
                }
                if (!next) {
                    perimeter = true;
                    lp = seen[cur];
                    lf = lp;
                    next = rotate(cur, dest - seen[cur]);
                    if (!next) {
                        log(t, "rx", cur, seq, "drop:isolated", parent, -1);
                        break;
                    }
                    e0 = {cur, *next};
                }
            } else {
                next = rotate(cur, seen[prev] - seen[cur]);
                if (!next) {
                    log(t, "rx", cur, seq, "drop:isolated", parent, -1);
                    break;
                }
                // Face change: the candidate edge crosses the Lp-D line closer to D.
                for (std::size_t guard = 0; guard < planar[cur].size(); ++guard) {
                    const auto x = detail::segment_intersection(seen[cur], seen[*next], lp, dest);
                    if (!x || distance(*x, dest) >= distance(lf, dest) - 1e-9) break;
                    lf = *x;
                    next = rotate(cur, seen[*next] - seen[cur]);
                }
                if (!next) {
                    log(t, "rx", cur, seq, "drop:isolated", parent, -1);
                    break;
                }
                if (std::pair{cur, *next} == e0) {
                    log(t, "rx", cur, seq, "drop:perimeter-loop", parent, -1);
                    break;
                }
            }
            bool ok = false;
            const double dreal = distance(real[cur], real[*next]);
            const double rate = detail::link_rate(s, cur, *next, i);
            const double p = loss_probability(s.loss, dreal, rate);
            for (int attempt = 0; attempt <= s.gpsr_retransmits; ++attempt) {
                ++m.transmissions;
                t += s.propagation_ms;
                log(t, "tx", cur, seq, "unicast", tx_id, parent);
                const long long this_tx = tx_id++;
                if (p < 1.0 && (p <= 0.0 || rng::draw(s.seed, rng::Purpose::packet_loss, i, hops, attempt) >= p)) {
                    ok = true;
                    parent = this_tx;
                    break;
                }
            }
            if (!ok) {
                log(t, "rx", *next, seq, "drop:link", parent, -1);
                break;
            }
            --ttl;
            ++hops;
            prev = cur;
            cur = *next;
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Scenario driver
// ---------------------------------------------------------------------------

inline SimMetrics run_scenario(const World& w, const SimScenario& s, std::vector<TraceRecord>* trace = nullptr)
{
    if (w.map.empty()) throw ScenarioError("map has no buildings");
    if (s.scheme == Scheme::mapmesh &&
        (w.params.k != s.k || w.params.conduit_width_m != s.protocol.conduit_width)) {
        throw ScenarioError("routing tables were built for different k or conduit width");
    }
    const DeviceSet devices = place_devices(w.map, s.density_m2, s.seed);
    const auto packets = generate_pairs(w.map, devices, s.pairs, s.seed);
    if (s.scheme == Scheme::mapmesh) return run_simulation(w, devices, packets, s, trace);
    return run_gpsr(w, devices, packets, s, trace);
}

inline void write_metrics_csv_header(std::ostream& os)
{
    os << "scenario,scheme,ell,W,k,seed,delivery_rate,transmissions,mean_hops,mean_latency_ms\n";
}

inline void write_metrics_csv_row(std::ostream& os, const SimScenario& s, const SimMetrics& m)
{
    os << s.name << ',' << m.scheme << ',' << format_number(s.loss.ell) << ','
       << format_number(s.protocol.conduit_width) << ',' << format_number(s.k) << ',' << s.seed << ','
       << format_number(m.delivery_rate()) << ',' << m.transmissions << ',' << format_number(m.mean_hops()) << ','
       << format_number(m.mean_latency_ms()) << '\n';
}

inline void write_trace_csv(std::ostream& os, std::span<const TraceRecord> trace)
{
    os << "t_ms,event,device,building,src,seq,action\n";
    for (const auto& r : trace) os << r.line() << '\n';
}

// ---------------------------------------------------------------------------
// Scenario files
// ---------------------------------------------------------------------------

inline double parse_double_value(const std::string& key, const std::string& v)
{
    if (v == "inf" || v == "infinity" || v == "mst") return kInfiniteExponent;
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ScenarioError("key '" + key + "': expected a number, got '" + v + "'");
    }
}

inline bool parse_bool_value(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    throw ScenarioError("key '" + key + "': expected true or false, got '" + v + "'");
}

/// Apply one `key = value` setting.
inline void apply_setting(SimScenario& s, const std::string& key, const std::string& v)
{
    auto num = [&] { return parse_double_value(key, v); };
    auto whole = [&] {
        const double d = num();
        if (d < 0 || d != std::floor(d) || std::isinf(d)) {
            throw ScenarioError("key '" + key + "': expected a non-negative integer");
        }
        return d;
    };
    if (key == "name") s.name = v;
    else if (key == "map") s.map_path = v;
    else if (key == "scheme") {
        if (v == "mapmesh") s.scheme = Scheme::mapmesh;
        else if (v == "gpsr") s.scheme = Scheme::gpsr;
        else throw ScenarioError("key 'scheme': expected mapmesh or gpsr, got '" + v + "'");
    }
    else if (key == "location_error") s.location_error_m = num();
    else if (key == "ell") s.loss.ell = num();
    else if (key == "cliff_start") s.loss.cliff_start_m = num();
    else if (key == "cliff_end") s.loss.cliff_end_m = num();
    else if (key == "link_rate") {
        if (v == "per_link") s.loss.per_packet_rate = false;
        else if (v == "per_packet") s.loss.per_packet_rate = true;
        else throw ScenarioError("key 'link_rate': expected per_link or per_packet");
    }
    else if (key == "conduit_width") s.protocol.conduit_width = num();
    else if (key == "k") s.k = num();
    else if (key == "range") s.range_m = num();
    else if (key == "cell_target") s.cell_target_m = num();
    else if (key == "density") s.density_m2 = num();
    else if (key == "pairs") s.pairs = static_cast<std::size_t>(whole());
    else if (key == "seed") s.seed = static_cast<std::uint64_t>(whole());
    else if (key == "table_seed") s.table_seed = static_cast<std::uint64_t>(whole());
    else if (key == "unit_ms") s.protocol.unit_ms = num();
    else if (key == "in_building_ms") s.protocol.in_building_ms = num();
    else if (key == "jitter_ms") s.protocol.jitter_ms = num();
    else if (key == "hop_budget") s.protocol.hop_budget = static_cast<std::uint16_t>(std::min(65535.0, whole()));
    else if (key == "suppression") s.protocol.suppression = parse_bool_value(key, v);
    else if (key == "rank_mode") {
        if (v == "literal") s.protocol.rank_mode = RankMode::literal;
        else if (v == "closer_only") s.protocol.rank_mode = RankMode::closer_only;
        else throw ScenarioError("key 'rank_mode': expected literal or closer_only");
    }
    else if (key == "heard_window_ms") s.protocol.heard_window_ms = num();
    else if (key == "packet_interval_ms") s.packet_interval_ms = num();
    else if (key == "packet_wall_ms") s.packet_wall_ms = num();
    else if (key == "gpsr_retransmits") s.gpsr_retransmits = static_cast<int>(whole());
    else if (key == "gpsr_ttl") s.gpsr_ttl = static_cast<int>(whole());
    else throw ScenarioError("unknown scenario key '" + key + "'");
}

/// `key = value` lines; `#` starts a comment.
inline SimScenario parse_scenario(std::string_view text, SimScenario base = {})
{
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    auto trim = [](std::string x) {
        const auto a = x.find_first_not_of(" \t\r");
        if (a == std::string::npos) return std::string();
        const auto b = x.find_last_not_of(" \t\r");
        return x.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ScenarioError("line " + std::to_string(lineno) + ": expected key = value");
        }
        apply_setting(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return base;
}

/// Serialized form that parse_scenario reads back to the same scenario.
inline std::string serialize_scenario(const SimScenario& s)
{
    std::ostringstream o;
    o << "name = " << s.name << '\n';
    if (!s.map_path.empty()) o << "map = " << s.map_path << '\n';
    o << "scheme = " << (s.scheme == Scheme::mapmesh ? "mapmesh" : "gpsr") << '\n'
      << "location_error = " << format_number(s.location_error_m) << '\n'
      << "ell = " << format_number(s.loss.ell) << '\n'
      << "cliff_start = " << format_number(s.loss.cliff_start_m) << '\n'
      << "cliff_end = " << format_number(s.loss.cliff_end_m) << '\n'
      << "link_rate = " << (s.loss.per_packet_rate ? "per_packet" : "per_link") << '\n'
      << "conduit_width = " << format_number(s.protocol.conduit_width) << '\n'
      << "k = " << format_number(s.k) << '\n'
      << "range = " << format_number(s.range_m) << '\n'
      << "cell_target = " << format_number(s.cell_target_m) << '\n'
      << "density = " << format_number(s.density_m2) << '\n'
      << "pairs = " << s.pairs << '\n'
      << "seed = " << s.seed << '\n'
      << "table_seed = " << s.table_seed << '\n'
      << "unit_ms = " << format_number(s.protocol.unit_ms) << '\n'
      << "in_building_ms = " << format_number(s.protocol.in_building_ms) << '\n'
      << "jitter_ms = " << format_number(s.protocol.jitter_ms) << '\n'
      << "hop_budget = " << s.protocol.hop_budget << '\n'
      << "suppression = " << (s.protocol.suppression ? "true" : "false") << '\n'
      << "rank_mode = " << (s.protocol.rank_mode == RankMode::literal ? "literal" : "closer_only") << '\n'
      << "heard_window_ms = " << format_number(s.protocol.heard_window_ms) << '\n'
      << "packet_interval_ms = " << format_number(s.packet_interval_ms) << '\n'
      << "packet_wall_ms = " << format_number(s.packet_wall_ms) << '\n'
      << "gpsr_retransmits = " << s.gpsr_retransmits << '\n'
      << "gpsr_ttl = " << s.gpsr_ttl << '\n';
    return o.str();
}

inline WorldParams world_params_for(const SimScenario& s, unsigned threads = 0)
{
    return {s.range_m, s.cell_target_m, s.k, s.protocol.conduit_width, s.table_seed, threads};
}

/// Run independent scenarios over one world on up to `threads` workers.
/// Results come back in input order.
inline std::vector<SimMetrics> run_many(const World& w, std::span<const SimScenario> scenarios, unsigned threads = 0)
{
    std::vector<SimMetrics> out(scenarios.size());
    detail::parallel_for(scenarios.size(), threads, [&](std::size_t i) { out[i] = run_scenario(w, scenarios[i]); });
    return out;
}

} // namespace mapmesh
