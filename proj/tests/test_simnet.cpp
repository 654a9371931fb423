#include <mapmesh/mapmesh.hpp>

#include <gtest/gtest.h>

#include <map>
#include <numbers>
#include <set>

using namespace mapmesh;

namespace {

/// A 2 m building around every point, with one device at each centroid.
struct Placed {
    World world;
    DeviceSet devices;
};

Placed one_device_each(const std::vector<Point>& pts, bool tables = true)
{
    Placed p{build_world(synth::squares(pts, 2), {}, tables), {}};
    p.devices.by_building.resize(p.world.map.size());
    for (const auto& b : p.world.map.buildings()) {
        const DeviceId id = static_cast<DeviceId>(p.devices.devices.size());
        p.devices.devices.push_back({id, b.id, b.centroid});
        p.devices.by_building[b.id].push_back(id);
    }
    return p;
}

DeviceId device_at(const Placed& p, Point at)
{
    for (const auto& d : p.devices.devices) {
        if (distance(d.position, at) < 1e-6) return d.id;
    }
    throw std::runtime_error("no device there");
}

PacketSpec to_point(const Placed& p, Point from, Point to)
{
    const DeviceId dst = device_at(p, to);
    return {device_at(p, from), p.devices.devices[dst].building_id, dst};
}

SimScenario gpsr()
{
    SimScenario s;
    s.scheme = Scheme::gpsr;
    return s;
}

const World& city8()
{
    static const World w = build_world(synth::grid_city({.rows = 8, .cols = 8, .voids = 1}, 21));
    return w;
}

SimScenario on_city(double ell, std::uint64_t seed = 1)
{
    SimScenario s;
    s.loss.ell = ell;
    s.seed = seed;
    s.pairs = 40;
    return s;
}

} // namespace

TEST(Loss, CliffExamples)
{
    const LossModel m;
    EXPECT_EQ(loss_probability(m, 50, 0), 0.0);
    EXPECT_EQ(loss_probability(m, 70, 0), 0.0);
    EXPECT_EQ(loss_probability(m, 85, 0), 1.0);
    EXPECT_NEAR(loss_probability(m, 75, 0.2), 0.6, 1e-12);
    EXPECT_NEAR(loss_probability(m, 10, 0.3), 0.3, 1e-12);
}

TEST(MapMeshSim, SameBuildingDelivers)
{
    auto p = one_device_each({{0, 0}, {40, 0}});
    p.devices.devices.push_back({2, 0, {0.5, 0.5}});
    p.devices.by_building[0].push_back(2);
    const std::vector<PacketSpec> pk{{0, 0, 2}};
    const auto m = run_simulation(p.world, p.devices, pk, SimScenario{});
    EXPECT_EQ(m.delivered, 1u);
    EXPECT_EQ(m.hops[0], 1);
}

TEST(MapMeshSim, RelaysAcrossThreeBuildings)
{
    const auto p = one_device_each({{0, 0}, {50, 0}, {100, 0}});
    const std::vector<PacketSpec> pk{to_point(p, {0, 0}, {100, 0})};
    std::vector<TraceRecord> trace;
    const auto m = run_simulation(p.world, p.devices, pk, SimScenario{}, &trace);
    EXPECT_EQ(m.delivered, 1u);
    EXPECT_EQ(m.hops[0], 2);
    EXPECT_EQ(m.transmissions, 2u);
    // The middle building shares a cell with the destination and is that
    // cell's representative, so it is the waypoint: rank 1 at U, then 2c
    // for having heard nothing closer, plus jitter and two propagations.
    EXPECT_GE(m.latency_ms[0], 25.0 + 2 * 10.0 + 2 * 1.0);
    EXPECT_LE(m.latency_ms[0], 25.0 + 2 * 10.0 + 2.0 + 2 * 1.0);
}

TEST(MapMeshSim, UnreachableDestinationIsNotDelivered)
{
    const auto p = one_device_each({{0, 0}, {50, 0}, {600, 0}});
    const std::vector<PacketSpec> pk{to_point(p, {0, 0}, {600, 0})};
    std::vector<TraceRecord> trace;
    const auto m = run_simulation(p.world, p.devices, pk, SimScenario{}, &trace);
    EXPECT_EQ(m.delivered, 0u);
    EXPECT_EQ(m.transmissions, 0u);
    ASSERT_EQ(trace.size(), 1u);
    EXPECT_EQ(trace[0].action, "drop:no-route");
}

TEST(MapMeshSim, Deterministic)
{
    const auto a = run_scenario(city8(), on_city(0.4, 5));
    const auto b = run_scenario(city8(), on_city(0.4, 5));
    EXPECT_EQ(a.serialize(), b.serialize());
    const auto c = run_scenario(city8(), on_city(0.4, 6));
    EXPECT_NE(a.serialize(), c.serialize());
}

TEST(MapMeshSim, RunManyMatchesSequentialRuns)
{
    std::vector<SimScenario> batch{on_city(0.2, 1), on_city(0.5, 2), on_city(0.0, 3)};
    const auto par = run_many(city8(), batch, 3);
    for (std::size_t i = 0; i < batch.size(); ++i) EXPECT_EQ(par[i].serialize(), run_scenario(city8(), batch[i]).serialize());
}

TEST(MapMeshSim, TraceIsCausalAndBroadcastsAtMostOnce)
{
    std::vector<TraceRecord> trace;
    const auto m = run_scenario(city8(), on_city(0.4, 7), &trace);
    std::map<long long, double> tx_time;
    std::set<std::tuple<DeviceId, BuildingId, std::uint32_t>> sent;
    std::size_t tx_count = 0;
    for (const auto& r : trace) {
        if (r.event != "tx") continue;
        ++tx_count;
        tx_time[r.tx] = r.t_ms;
        EXPECT_TRUE(sent.insert({r.device, r.source, r.sequence}).second);
        if (r.parent_tx >= 0) {
            ASSERT_TRUE(tx_time.count(r.parent_tx));
            EXPECT_LT(tx_time[r.parent_tx], r.t_ms);
        }
    }
    EXPECT_EQ(tx_count, m.transmissions);
    for (const auto& r : trace) {
        if (r.event == "rx") {
            EXPECT_TRUE(tx_time.count(r.tx));
        }
    }
}

TEST(MapMeshSim, LosslessCityDeliversNearlyEverything)
{
    EXPECT_GE(run_scenario(city8(), on_city(0.0, 2)).delivery_rate(), 0.95);
}

TEST(MapMeshSim, SuppressionHalvesTransmissions)
{
    auto flood = on_city(0.4, 3);
    flood.protocol.suppression = false;
    const auto f = run_scenario(city8(), flood);
    const auto s = run_scenario(city8(), on_city(0.4, 3));
    EXPECT_GE(static_cast<double>(f.transmissions), 2.0 * static_cast<double>(s.transmissions));
}

TEST(MapMeshSim, DeliveryDegradesWithLoss)
{
    double low = 0, high = 0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        low += run_scenario(city8(), on_city(0.0, seed)).delivery_rate();
        high += run_scenario(city8(), on_city(0.95, seed)).delivery_rate();
    }
    EXPECT_GT(low, high);
}

TEST(MapMeshSim, RejectsTablesBuiltForOtherParameters)
{
    auto s = on_city(0.0);
    s.k = 3;
    EXPECT_THROW(run_scenario(city8(), s), ScenarioError);
    auto bad = on_city(0.0);
    bad.loss.ell = 1.5;
    EXPECT_THROW(run_scenario(city8(), bad), ScenarioError);
}

TEST(Gpsr, DirectNeighbor)
{
    const auto p = one_device_each({{0, 0}, {50, 0}}, false);
    const std::vector<PacketSpec> pk{to_point(p, {0, 0}, {50, 0})};
    const auto m = run_gpsr(p.world, p.devices, pk, gpsr());
    EXPECT_EQ(m.delivered, 1u);
    EXPECT_EQ(m.hops[0], 1);
    EXPECT_EQ(m.transmissions, 1u);
}

TEST(Gpsr, PerimeterModeRoundsAVoid)
{
    // Greedy is stuck at the source: its only neighbor is farther from the
    // destination. The right-hand walk climbs the left column.
    std::vector<Point> pts{{0, 0}, {-60, 0}, {-120, 0}};
    for (int i = 1; i <= 5; ++i) pts.push_back({-120, 60.0 * i});
    pts.push_back({-60, 300});
    pts.push_back({0, 300});
    const auto p = one_device_each(pts, false);
    const std::vector<PacketSpec> pk{to_point(p, {0, 0}, {0, 300})};
    std::vector<TraceRecord> trace;
    const auto m = run_gpsr(p.world, p.devices, pk, gpsr(), &trace);
    EXPECT_EQ(m.delivered, 1u);
    EXPECT_EQ(m.hops[0], 9);
}

TEST(Gpsr, RingAroundUnreachableDestination)
{
    std::vector<Point> pts;
    const double radius = 30.0 / std::sin(std::numbers::pi / 8);
    for (int i = 0; i < 8; ++i) {
        const double a = 2 * std::numbers::pi * i / 8;
        pts.push_back({radius * std::cos(a), radius * std::sin(a)});
    }
    pts.push_back({1000, 0});
    const auto p = one_device_each(pts, false);
    const std::vector<PacketSpec> pk{to_point(p, pts[0], {1000, 0})};

    auto short_ttl = gpsr();
    short_ttl.gpsr_ttl = 4;
    std::vector<TraceRecord> trace;
    const auto a = run_gpsr(p.world, p.devices, pk, short_ttl, &trace);
    EXPECT_EQ(a.delivered, 0u);
    EXPECT_EQ(a.transmissions, 4u);
    EXPECT_EQ(trace.back().action, "drop:expired");

    trace.clear();
    const auto b = run_gpsr(p.world, p.devices, pk, gpsr(), &trace);
    EXPECT_EQ(b.delivered, 0u);
    EXPECT_EQ(b.transmissions, 8u);
    EXPECT_EQ(trace.back().action, "drop:perimeter-loop");
}

TEST(Gpsr, LinkPastTheCliffFailsAfterRetransmits)
{
    // 90 m apart: past the cliff for real, but location error sometimes
    // pulls the perceived positions inside neighbor range.
    const auto p = one_device_each({{0, 0}, {90, 0}}, false);
    const std::vector<PacketSpec> pk{to_point(p, {0, 0}, {90, 0})};
    auto s = gpsr();
    s.location_error_m = 30;
    int listed = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        s.seed = seed;
        const auto m = run_gpsr(p.world, p.devices, pk, s);
        EXPECT_EQ(m.delivered, 0u);
        if (m.transmissions == 0) continue;
        ++listed;
        EXPECT_EQ(m.transmissions, 1u + static_cast<std::size_t>(s.gpsr_retransmits));
    }
    EXPECT_GT(listed, 0);
}

TEST(Scenario, RoundTrip)
{
    SimScenario s;
    s.name = "w100";
    s.map_path = "samples/grid8.geojson";
    s.scheme = Scheme::gpsr;
    s.location_error_m = 15;
    s.loss.ell = 0.4;
    s.loss.per_packet_rate = true;
    s.k = kInfiniteExponent;
    s.protocol.conduit_width = 100;
    s.protocol.rank_mode = RankMode::closer_only;
    s.protocol.suppression = false;
    s.pairs = 12;
    s.seed = 99;
    const auto text = serialize_scenario(s);
    const auto back = parse_scenario(text);
    EXPECT_EQ(serialize_scenario(back), text);
    EXPECT_EQ(back.k, kInfiniteExponent);
    EXPECT_EQ(scheme_label(back), "gpsr-15");
}

TEST(Scenario, ParseErrors)
{
    EXPECT_THROW(parse_scenario("colour = blue\n"), ScenarioError);
    EXPECT_THROW(parse_scenario("ell = lots\n"), ScenarioError);
    EXPECT_THROW(parse_scenario("pairs = 2.5\n"), ScenarioError);
    EXPECT_THROW(parse_scenario("just words\n"), ScenarioError);
    EXPECT_THROW(parse_scenario("scheme = aodv\n"), ScenarioError);
    const auto s = parse_scenario("# comment\n\n  ell = 0.6  # trailing\nk = mst\n");
    EXPECT_EQ(s.loss.ell, 0.6);
    EXPECT_EQ(s.k, kInfiniteExponent);
}

TEST(Scenario, Labels)
{
    SimScenario s;
    EXPECT_EQ(scheme_label(s), "mapmesh");
    s.protocol.suppression = false;
    EXPECT_EQ(scheme_label(s), "mapmesh-flood");
    s.scheme = Scheme::gpsr;
    EXPECT_EQ(scheme_label(s), "gpsr");
}

TEST(Metrics, CsvRow)
{
    SimScenario s;
    s.name = "x";
    SimMetrics m;
    m.scheme = "mapmesh";
    m.packets = 2;
    m.delivered = 1;
    m.transmissions = 9;
    m.hops = {3, -1};
    m.latency_ms = {40.5, -1};
    std::ostringstream os;
    write_metrics_csv_header(os);
    write_metrics_csv_row(os, s, m);
    EXPECT_EQ(os.str(), "scenario,scheme,ell,W,k,seed,delivery_rate,transmissions,mean_hops,mean_latency_ms\n"
                        "x,mapmesh,0,150,10,1,0.5,9,3,40.5\n");
}
