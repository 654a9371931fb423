#include <mapmesh/mapmesh.hpp>

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace mapmesh;

namespace {

/// Tiny buildings at the given points plus two corner markers pinning the
/// bounds to [0, side]^2.
BuildingMap pinned(const std::vector<Point>& pts, double side)
{
    std::vector<Footprint> fps;
    fps.push_back(synth::rectangle(0, 0, 0.5, 0.5, "lo"));
    fps.push_back(synth::rectangle(side - 0.5, side - 0.5, 0.5, 0.5, "hi"));
    for (std::size_t i = 0; i < pts.size(); ++i) fps.push_back(synth::square_at(pts[i], 0.2, "p" + std::to_string(i)));
    return BuildingMap::from_footprints(fps);
}

BuildingId by_name(const BuildingMap& m, const std::string& id)
{
    for (const auto& b : m.buildings()) {
        if (b.external_id == id) return b.id;
    }
    throw std::runtime_error("no building " + id);
}

} // namespace

TEST(GridAddress, BitsRoundTrip)
{
    const auto a = parse_bits("0011010");
    EXPECT_EQ(a.len, 7);
    EXPECT_EQ(to_bits(a), "0011010");
    EXPECT_EQ(to_bits(a.prefix(4)), "0011");
    EXPECT_TRUE(a.prefix(4).matches(a));
    EXPECT_FALSE(parse_bits("0111").matches(a));
    EXPECT_TRUE(GridAddress{}.matches(a));
    EXPECT_THROW(parse_bits("012"), std::invalid_argument);
    EXPECT_THROW(parse_bits(std::string(65, '1')), std::invalid_argument);
}

TEST(GridAddress, OrderIsLexicographic)
{
    EXPECT_LT(parse_bits("0"), parse_bits("00"));
    EXPECT_LT(parse_bits("01"), parse_bits("1"));
    EXPECT_LT(parse_bits("0011"), parse_bits("0100"));
    EXPECT_FALSE(parse_bits("1") < parse_bits("1"));
}

TEST(GridAddress, PackedBitsAreLeftAligned)
{
    const auto a = parse_bits("101");
    EXPECT_EQ(pack_bits(a), std::vector<std::uint8_t>{0xA0});
    const std::vector<std::uint8_t> two{0xFF, 0x80};
    EXPECT_EQ(to_bits(unpack_bits(two, 9)), "111111111");
    const std::vector<std::uint8_t> dirty{0xA1};
    EXPECT_THROW(unpack_bits(dirty, 3), std::invalid_argument);
    EXPECT_THROW(unpack_bits(two, 3), std::invalid_argument);
    std::mt19937_64 rng(41);
    for (int i = 0; i < 500; ++i) {
        const int len = static_cast<int>(rng() % 65);
        GridAddress x;
        for (int b = 0; b < len; ++b) x = x.child(rng() & 1);
        EXPECT_EQ(unpack_bits(pack_bits(x), len), x);
    }
}

TEST(BuildGrid, SmallMapHasDepthZero)
{
    const auto m = BuildingMap::from_footprints({synth::rectangle(0, 0, 80, 60)});
    const auto idx = build_grid(m, 100);
    EXPECT_EQ(idx.depth(), 0);
    ASSERT_EQ(idx.cells().size(), 1u);
    EXPECT_EQ(idx.cells()[0].prefix.len, 0);
    EXPECT_EQ(idx.address_of(0).len, 0);
}

TEST(BuildGrid, BitConventionXThenY)
{
    const auto m = pinned({{40, 40}, {360, 360}, {360, 40}, {40, 360}}, 400);
    const auto idx = build_grid(m, 100);
    ASSERT_EQ(idx.depth(), 2);
    EXPECT_EQ(to_bits(idx.address_of(by_name(m, "p0")).prefix(4)), "0000");
    EXPECT_EQ(to_bits(idx.address_of(by_name(m, "p1")).prefix(4)), "1111");
    EXPECT_EQ(to_bits(idx.address_of(by_name(m, "p2")).prefix(4)), "1010");
    EXPECT_EQ(to_bits(idx.address_of(by_name(m, "p3")).prefix(4)), "0101");
}

TEST(BuildGrid, SplitLineGoesUp)
{
    const auto m = pinned({{200, 200}, {100, 40}}, 400);
    const auto idx = build_grid(m, 100);
    // (200, 200) sits on both level-1 splits; (100, 40) on a level-2 x split.
    EXPECT_EQ(to_bits(idx.prefix_of({200, 200})), "1100");
    EXPECT_EQ(to_bits(idx.prefix_of({100, 40})), "0010");
}

TEST(BuildGrid, PadsToSquare)
{
    const auto m = BuildingMap::from_footprints({synth::rectangle(0, 0, 10, 10), synth::rectangle(390, 90, 10, 10)});
    const auto idx = build_grid(m, 100);
    EXPECT_DOUBLE_EQ(idx.side(), 400.0);
    EXPECT_EQ(idx.depth(), 2);
    EXPECT_DOUBLE_EQ(idx.cell_side(), 100.0);
}

TEST(BuildGrid, RejectsNonPositiveTarget)
{
    const auto m = synth::squares({{0, 0}}, 10);
    EXPECT_THROW(build_grid(m, 0.0), std::invalid_argument);
}

TEST(AddressOf, SingletonCellIsBarePrefix)
{
    const auto m = pinned({{360, 40}}, 400);
    const auto idx = build_grid(m, 100);
    const auto id = by_name(m, "p0");
    ASSERT_EQ(idx.cell(idx.cell_of(id)).buildings.size(), 1u);
    EXPECT_EQ(idx.address_of(id), idx.cell(idx.cell_of(id)).prefix);
}

TEST(AddressOf, SuffixIsRankWithinCell)
{
    const auto m = pinned({{20, 20}, {50, 50}, {80, 20}}, 400);
    const auto idx = build_grid(m, 100);
    std::vector<BuildingId> ids{by_name(m, "p0"), by_name(m, "p1"), by_name(m, "p2")};
    std::sort(ids.begin(), ids.end());
    // The lower marker shares this cell, so it holds four buildings.
    const auto& cell = idx.cell(idx.cell_of(ids[0]));
    ASSERT_EQ(cell.buildings.size(), 4u);
    for (std::size_t r = 0; r < cell.buildings.size(); ++r) {
        const auto a = idx.address_of(cell.buildings[r]);
        EXPECT_EQ(a.len, 6);
        EXPECT_EQ(a.value & 3u, r);
    }
}

TEST(AddressOf, SuffixWidths)
{
    EXPECT_EQ(GridIndex::suffix_width(1), 0);
    EXPECT_EQ(GridIndex::suffix_width(2), 1);
    EXPECT_EQ(GridIndex::suffix_width(3), 2);
    EXPECT_EQ(GridIndex::suffix_width(4), 2);
    EXPECT_EQ(GridIndex::suffix_width(5), 3);
}

TEST(AddressOf, ThreeBuildingsGetSuffixes00To10)
{
    // Cell (0,0) of a 400 m square holds exactly three buildings.
    std::vector<Footprint> fps{synth::rectangle(0, 0, 1, 1), synth::rectangle(399, 399, 1, 1)};
    fps.push_back(synth::square_at({30, 60}, 1));
    fps.push_back(synth::square_at({60, 30}, 1));
    const auto m = BuildingMap::from_footprints(fps);
    const auto idx = build_grid(m, 100);
    const auto& cell = idx.cell(idx.cell_of(0));
    ASSERT_EQ(cell.buildings.size(), 3u);
    EXPECT_EQ(idx.render(idx.address_of(cell.buildings[0])), "0000/00");
    EXPECT_EQ(idx.render(idx.address_of(cell.buildings[1])), "0000/01");
    EXPECT_EQ(idx.render(idx.address_of(cell.buildings[2])), "0000/10");
}

TEST(AddressOf, UnknownBuildingThrows)
{
    const auto m = pinned({}, 400);
    const auto idx = build_grid(m, 100);
    EXPECT_THROW(idx.address_of(99), std::out_of_range);
}

TEST(AddressOf, PropertiesOnRandomMaps)
{
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> pos(0, 1500);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Footprint> fps;
        for (int i = 0; i < 300; ++i) fps.push_back(synth::square_at({pos(rng), pos(rng)}, 6));
        const auto m = BuildingMap::from_footprints(fps);
        const auto idx = build_grid(m, 100);
        const auto again = build_grid(m, 100);
        std::size_t max_pop = 0;
        for (const auto& c : idx.cells()) max_pop = std::max(max_pop, c.buildings.size());
        std::set<std::pair<std::uint64_t, int>> seen;
        for (BuildingId b = 0; b < m.size(); ++b) {
            const auto a = idx.address_of(b);
            EXPECT_TRUE(seen.insert({a.value, a.len}).second);
            EXPECT_EQ(again.address_of(b), a);
            EXPECT_LE(a.len, idx.prefix_bits() + GridIndex::suffix_width(max_pop));
            EXPECT_EQ(a.prefix(idx.prefix_bits()), idx.prefix_of(m[b].centroid));
        }
        // Prefix locality at every level.
        for (int level = 1; level <= idx.depth(); ++level) {
            const double side = idx.side() / std::ldexp(1.0, level);
            for (int q = 0; q < 200; ++q) {
                const BuildingId a = static_cast<BuildingId>(rng() % m.size());
                const BuildingId b = static_cast<BuildingId>(rng() % m.size());
                auto square = [&](Point p) {
                    return std::pair{std::floor((p.x - idx.origin().x) / side), std::floor((p.y - idx.origin().y) / side)};
                };
                const bool same_square = square(m[a].centroid) == square(m[b].centroid);
                const bool same_prefix = idx.address_of(a).prefix(2 * level) == idx.address_of(b).prefix(2 * level);
                EXPECT_EQ(same_prefix, same_square);
            }
        }
    }
}

TEST(AddressOf, CellCenterInvertsPrefix)
{
    const auto m = synth::grid_city({.rows = 10, .cols = 10}, 1);
    const auto idx = build_grid(m);
    for (const auto& c : idx.cells()) EXPECT_EQ(idx.prefix_of(idx.cell_center(c.prefix)), c.prefix);
}
