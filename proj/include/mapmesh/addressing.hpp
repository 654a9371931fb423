#pragma once

#include "mapdata.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <span>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mapmesh {

inline constexpr double kDefaultCellTargetM = 100.0;
inline constexpr int kMaxAddressBits = 64;

/// Bitstring of up to 64 bits. The value holds the bits MSB-first in its low
/// `len` bits, so the first emitted bit is bit len-1.
struct GridAddress {
    std::uint64_t value = 0;
    std::uint8_t len = 0;

    /// The leading n bits.
    constexpr GridAddress prefix(int n) const
    {
        if (n <= 0) return {};
        if (n >= len) return *this;
        return {value >> (len - n), static_cast<std::uint8_t>(n)};
    }
    constexpr bool bit(int i) const { return (value >> (len - 1 - i)) & 1u; }

    /// Whether this address, read as a prefix, matches `a`.
    constexpr bool matches(const GridAddress& a) const
    {
        return len <= a.len && a.prefix(len).value == value;
    }

    constexpr GridAddress child(bool b) const
    {
        return {(value << 1) | (b ? 1u : 0u), static_cast<std::uint8_t>(len + 1)};
    }

    friend constexpr bool operator==(const GridAddress&, const GridAddress&) = default;
    /// MSB-first lexicographic order, shorter first on a shared prefix.
    friend constexpr bool operator<(const GridAddress& a, const GridAddress& b)
    {
        const int n = std::min(a.len, b.len);
        const auto pa = a.prefix(n).value;
        const auto pb = b.prefix(n).value;
        if (pa != pb) return pa < pb;
        return a.len < b.len;
    }
};

inline std::string to_bits(const GridAddress& a)
{
    std::string s;
    s.reserve(a.len);
    for (int i = 0; i < a.len; ++i) s.push_back(a.bit(i) ? '1' : '0');
    return s;
}

inline GridAddress parse_bits(std::string_view s)
{
    if (s.size() > kMaxAddressBits) {
        throw std::invalid_argument("address longer than 64 bits");
    }
    GridAddress a;
    for (char c : s) {
        if (c != '0' && c != '1') throw std::invalid_argument("address must be a binary string");
        a = a.child(c == '1');
    }
    return a;
}

/// ceil(len / 8) bytes, bits left-aligned MSB-first, zero padded.
inline std::vector<std::uint8_t> pack_bits(const GridAddress& a)
{
    std::vector<std::uint8_t> out((a.len + 7) / 8, 0);
    for (int i = 0; i < a.len; ++i) {
        if (a.bit(i)) out[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
    }
    return out;
}

/// Inverse of pack_bits; padding bits must be zero.
inline GridAddress unpack_bits(std::span<const std::uint8_t> bytes, int len)
{
    if (len < 0 || len > kMaxAddressBits || bytes.size() != static_cast<std::size_t>((len + 7) / 8)) {
        throw std::invalid_argument("bad packed address length");
    }
    GridAddress a;
    for (int i = 0; i < len; ++i) {
        a = a.child((bytes[i / 8] >> (7 - i % 8)) & 1u);
    }
    for (int i = len; i < static_cast<int>(bytes.size()) * 8; ++i) {
        if ((bytes[i / 8] >> (7 - i % 8)) & 1u) throw std::invalid_argument("nonzero address padding");
    }
    return a;
}

struct GridAddressHash {
    std::size_t operator()(const GridAddress& a) const noexcept
    {
        return static_cast<std::size_t>(rng::mix(a.value ^ (static_cast<std::uint64_t>(a.len) << 58)));
    }
};

/// Recursive quadrant decomposition of the map, padded to a square.
class GridIndex {
public:
    struct Cell {
        GridAddress prefix;
        std::vector<BuildingId> buildings; ///< ascending id
    };

    GridIndex() = default;

    static GridIndex build(const BuildingMap& map, double cell_target = kDefaultCellTargetM)
    {
        if (!(cell_target > 0.0)) {
            throw std::invalid_argument("cell target must be positive");
        }
        GridIndex g;
        g.origin_ = map.bounds().min;
        g.side_ = std::max(map.bounds().width(), map.bounds().height());
        while (g.side_ / std::ldexp(1.0, g.depth_) > cell_target) {
            ++g.depth_;
        }
        if (2 * g.depth_ > kMaxAddressBits) {
            throw std::invalid_argument("grid too deep for 64-bit addresses");
        }
        g.building_cell_.resize(map.size());
        g.addresses_.resize(map.size());
        std::unordered_map<GridAddress, std::size_t, GridAddressHash> slot;
        for (const auto& b : map.buildings()) {
            const GridAddress p = g.prefix_of(b.centroid);
            auto [it, fresh] = slot.try_emplace(p, g.cells_.size());
            if (fresh) g.cells_.push_back({p, {}});
            g.cells_[it->second].buildings.push_back(b.id);
        }
        std::sort(g.cells_.begin(), g.cells_.end(), [](const Cell& a, const Cell& b) { return a.prefix < b.prefix; });
        for (std::size_t c = 0; c < g.cells_.size(); ++c) {
            const auto& cell = g.cells_[c];
            g.index_.emplace(cell.prefix, c);
            const int width = suffix_width(cell.buildings.size());
            if (2 * g.depth_ + width > kMaxAddressBits) {
                throw std::invalid_argument("address exceeds 64 bits");
            }
            for (std::size_t r = 0; r < cell.buildings.size(); ++r) {
                const BuildingId id = cell.buildings[r];
                g.building_cell_[id] = c;
                GridAddress a = cell.prefix;
                a.value = (a.value << width) | r;
                a.len = static_cast<std::uint8_t>(a.len + width);
                g.addresses_[id] = a;
            }
        }
        return g;
    }

    /// Bits needed to rank `population` buildings.
    static int suffix_width(std::size_t population)
    {
        return population <= 1 ? 0 : static_cast<int>(std::bit_width(population - 1));
    }

    int depth() const noexcept { return depth_; }
    int prefix_bits() const noexcept { return 2 * depth_; }
    Point origin() const noexcept { return origin_; }
    double side() const noexcept { return side_; }
    double cell_side() const noexcept { return side_ / std::ldexp(1.0, depth_); }
    std::size_t building_count() const noexcept { return addresses_.size(); }

    /// Non-empty cells in prefix order.
    std::span<const Cell> cells() const noexcept { return cells_; }
    std::size_t total_cells() const noexcept { return std::size_t{1} << (2 * depth_); }

    const Cell* find_cell(const GridAddress& prefix) const
    {
        auto it = index_.find(prefix);
        return it == index_.end() ? nullptr : &cells_[it->second];
    }
    std::size_t cell_population(const GridAddress& prefix) const
    {
        const Cell* c = find_cell(prefix);
        return c ? c->buildings.size() : 0;
    }
    std::size_t cell_of(BuildingId b) const { return building_cell_.at(b); }
    const Cell& cell(std::size_t i) const { return cells_.at(i); }

    const GridAddress& address_of(BuildingId b) const
    {
        if (b >= addresses_.size()) {
            throw std::out_of_range("unknown building id " + std::to_string(b));
        }
        return addresses_[b];
    }

    /// Cell prefix for a point; split-line ties go to the upper half.
    GridAddress prefix_of(Point p) const
    {
        GridAddress a;
        double x0 = origin_.x, x1 = origin_.x + side_;
        double y0 = origin_.y, y1 = origin_.y + side_;
        for (int l = 0; l < depth_; ++l) {
            const double mx = x0 + 0.5 * (x1 - x0);
            const double my = y0 + 0.5 * (y1 - y0);
            const bool bx = p.x >= mx;
            const bool by = p.y >= my;
            a = a.child(bx).child(by);
            (bx ? x0 : x1) = mx;
            (by ? y0 : y1) = my;
        }
        return a;
    }

    /// Geometric center of the cell named by a full-depth prefix.
    Point cell_center(const GridAddress& prefix) const
    {
        double x0 = origin_.x, x1 = origin_.x + side_;
        double y0 = origin_.y, y1 = origin_.y + side_;
        for (int l = 0; l < prefix.len / 2; ++l) {
            const double mx = x0 + 0.5 * (x1 - x0);
            const double my = y0 + 0.5 * (y1 - y0);
            (prefix.bit(2 * l) ? x0 : x1) = mx;
            (prefix.bit(2 * l + 1) ? y0 : y1) = my;
        }
        return {0.5 * (x0 + x1), 0.5 * (y0 + y1)};
    }

    /// `prefix/suffix` rendering, e.g. 0011/10.
    std::string render(const GridAddress& a) const
    {
        const std::string s = to_bits(a);
        const std::size_t cut = std::min<std::size_t>(s.size(), static_cast<std::size_t>(prefix_bits()));
        return s.substr(0, cut) + "/" + s.substr(cut);
    }

private:
    Point origin_;
    double side_ = 0.0;
    int depth_ = 0;
    std::vector<Cell> cells_;
    std::unordered_map<GridAddress, std::size_t, GridAddressHash> index_;
    std::vector<std::size_t> building_cell_;
    std::vector<GridAddress> addresses_;
};

inline GridIndex build_grid(const BuildingMap& map, double cell_target = kDefaultCellTargetM)
{
    return GridIndex::build(map, cell_target);
}

inline GridAddress address_of(const GridIndex& idx, BuildingId b) { return idx.address_of(b); }

} // namespace mapmesh
