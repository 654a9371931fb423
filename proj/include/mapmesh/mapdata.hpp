#pragma once

#include "geometry.hpp"
#include "rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace mapmesh {

using BuildingId = std::uint32_t;
using DeviceId = std::uint32_t;

inline constexpr BuildingId kNoBuilding = 0xFFFFFFFFu;

/// Raised for any ingestion or validation failure. feature_index is set when
/// the problem can be pinned to one input feature.
class MapError : public std::runtime_error {
public:
    explicit MapError(const std::string& what, std::optional<std::size_t> feature = std::nullopt)
        : std::runtime_error(feature ? what + " (feature " + std::to_string(*feature) + ")" : what),
          feature_index(feature)
    {
    }
    std::optional<std::size_t> feature_index;
};

/// Raw polygon as read from input, before id assignment.
struct Footprint {
    std::vector<Point> ring;
    std::string external_id;
};

struct Building {
    BuildingId id = 0;
    std::vector<Point> footprint; // counter-clockwise, not closed
    Point centroid;
    double area = 0.0;
    Rect box;
    std::string external_id;
};

class BuildingMap {
public:
    BuildingMap() = default;

    /// Validate footprints, normalize orientation, and assign dense ids by
    /// the (centroid.x, centroid.y, area) sort.
    static BuildingMap from_footprints(std::vector<Footprint> input)
    {
        struct Staged {
            Building b;
            std::size_t index;
        };
        std::vector<Staged> staged;
        staged.reserve(input.size());
        for (std::size_t i = 0; i < input.size(); ++i) {
            auto& ring = input[i].ring;
            normalize_ring(ring);
            if (ring.size() < 3) {
                throw MapError("footprint has fewer than 3 distinct vertices", i);
            }
            if (first_self_intersection(ring) >= 0) {
                throw MapError("self-intersecting footprint", i);
            }
            double a = signed_area(ring);
            if (a == 0.0) {
                throw MapError("footprint has zero area", i);
            }
            if (a < 0.0) {
                std::reverse(ring.begin(), ring.end());
                a = -a;
            }
            Building b;
            b.centroid = polygon_centroid(ring);
            b.area = a;
            b.box = bounding_box(ring);
            b.footprint = std::move(ring);
            b.external_id = std::move(input[i].external_id);
            staged.push_back({std::move(b), i});
        }
        std::sort(staged.begin(), staged.end(), [](const Staged& l, const Staged& r) {
            const auto& a = l.b;
            const auto& b = r.b;
            if (a.centroid.x != b.centroid.x) return a.centroid.x < b.centroid.x;
            if (a.centroid.y != b.centroid.y) return a.centroid.y < b.centroid.y;
            if (a.area != b.area) return a.area < b.area;
            // Full tie: fall back to geometry so the order never depends on
            // input position.
            return std::lexicographical_compare(
                a.footprint.begin(), a.footprint.end(), b.footprint.begin(), b.footprint.end(),
                [](Point p, Point q) { return std::tie(p.x, p.y) < std::tie(q.x, q.y); });
        });
        BuildingMap m;
        m.buildings_.reserve(staged.size());
        for (auto& s : staged) {
            s.b.id = static_cast<BuildingId>(m.buildings_.size());
            m.bounds_.expand(s.b.box);
            m.buildings_.push_back(std::move(s.b));
        }
        return m;
    }

    std::span<const Building> buildings() const noexcept { return buildings_; }
    const Building& operator[](BuildingId id) const { return buildings_.at(id); }
    std::size_t size() const noexcept { return buildings_.size(); }
    bool empty() const noexcept { return buildings_.empty(); }
    const Rect& bounds() const noexcept { return bounds_; }

private:
    static void normalize_ring(std::vector<Point>& ring)
    {
        // Drop the GeoJSON closing vertex and consecutive duplicates.
        ring.erase(std::unique(ring.begin(), ring.end()), ring.end());
        while (ring.size() > 1 && ring.front() == ring.back()) {
            ring.pop_back();
        }
    }

    std::vector<Building> buildings_;
    Rect bounds_;
};

inline double min_distance(const Building& a, const Building& b) noexcept
{
    if (&a == &b) {
        return 0.0;
    }
    return polygon_distance(a.footprint, b.footprint);
}

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

enum class MapFormat { detect, geojson, native };

enum class Projection {
    none,            ///< coordinates are already planar meters
    equirectangular, ///< lon/lat degrees, projected around the map centroid
};

struct LoadOptions {
    MapFormat format = MapFormat::detect;
    Projection projection = Projection::none;
};

namespace detail {

inline constexpr char kMapMagic[4] = {'M', 'M', 'A', 'P'};
inline constexpr std::uint8_t kMapVersion = 1;
inline constexpr double kEarthRadiusM = 6371008.8;

class ByteWriter {
public:
    void bytes(const void* p, std::size_t n)
    {
        const auto* c = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), c, c + n);
    }
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v)
    {
        for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double d)
    {
        std::uint64_t v;
        std::memcpy(&v, &d, sizeof v);
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

    void need(std::size_t n) const
    {
        if (pos_ + n > in_.size()) throw MapError("truncated map cache");
    }
    std::uint8_t u8()
    {
        need(1);
        return in_[pos_++];
    }
    std::uint64_t le(int width)
    {
        need(static_cast<std::size_t>(width));
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
        return v;
    }
    double f64()
    {
        const std::uint64_t v = le(8);
        double d;
        std::memcpy(&d, &v, sizeof d);
        return d;
    }
    std::string str(std::size_t n)
    {
        need(n);
        std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    bool done() const noexcept { return pos_ == in_.size(); }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

inline bool looks_geographic(const std::vector<Footprint>& fps)
{
    Rect r;
    bool fractional = false;
    for (const auto& f : fps) {
        for (Point p : f.ring) {
            r.expand(p);
            fractional = fractional || p.x != std::floor(p.x) || p.y != std::floor(p.y);
        }
    }
    if (r.empty()) return false;
    const bool in_range = r.min.x >= -180.0 && r.max.x <= 180.0 && r.min.y >= -90.0 && r.max.y <= 90.0;
    return in_range && fractional && r.width() < 1.0 && r.height() < 1.0;
}

inline void project_equirectangular(std::vector<Footprint>& fps)
{
    Rect r;
    for (const auto& f : fps) {
        for (Point p : f.ring) r.expand(p);
    }
    const double lon0 = 0.5 * (r.min.x + r.max.x);
    const double lat0 = 0.5 * (r.min.y + r.max.y);
    const double k = kEarthRadiusM * std::numbers::pi / 180.0;
    const double coslat = std::cos(lat0 * std::numbers::pi / 180.0);
    for (auto& f : fps) {
        for (Point& p : f.ring) {
            p = {k * (p.x - lon0) * coslat, k * (p.y - lat0)};
        }
    }
}

inline std::string id_to_string(const nlohmann::json& v)
{
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
    return v.dump();
}

inline BuildingMap parse_geojson(std::string_view text, Projection projection)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw MapError(std::string("malformed GeoJSON: ") + e.what());
    }
    if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
        !doc["features"].is_array()) {
        throw MapError("malformed GeoJSON: expected a FeatureCollection with a features array");
    }
    if (auto crs = doc.find("mapmesh:crs"); crs != doc.end() && crs->is_string() && *crs == "lonlat") {
        projection = Projection::equirectangular;
    }
    const bool planar_declared = doc.value("mapmesh:crs", "") == "planar";

    const auto& features = doc["features"];
    std::vector<Footprint> fps;
    std::vector<std::optional<std::string>> ids;
    fps.reserve(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        const auto& f = features[i];
        if (!f.is_object() || f.value("type", "") != "Feature") {
            throw MapError("malformed GeoJSON: not a Feature", i);
        }
        const auto g = f.find("geometry");
        if (g == f.end() || !g->is_object()) {
            throw MapError("feature has no geometry", i);
        }
        if (g->value("type", "") != "Polygon") {
            throw MapError("non-polygon feature of type '" + g->value("type", std::string("?")) + "'", i);
        }
        const auto c = g->find("coordinates");
        if (c == g->end() || !c->is_array() || c->empty() || !(*c)[0].is_array()) {
            throw MapError("malformed polygon coordinates", i);
        }
        Footprint fp;
        for (const auto& pos : (*c)[0]) { // outer ring only; holes ignored
            if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number()) {
                throw MapError("malformed polygon position", i);
            }
            fp.ring.push_back({pos[0].get<double>(), pos[1].get<double>()});
        }
        std::optional<std::string> id;
        if (auto p = f.find("properties"); p != f.end() && p->is_object() && p->contains("id")) {
            id = id_to_string((*p)["id"]);
        } else if (f.contains("id")) {
            id = id_to_string(f["id"]);
        }
        ids.push_back(std::move(id));
        fps.push_back(std::move(fp));
    }
    std::map<std::string, int> seen;
    for (const auto& id : ids) {
        if (id) ++seen[*id];
    }
    for (std::size_t i = 0; i < fps.size(); ++i) {
        fps[i].external_id = (ids[i] && seen[*ids[i]] == 1) ? *ids[i] : "#" + std::to_string(i);
    }

    if (projection == Projection::none && !planar_declared && looks_geographic(fps)) {
        throw MapError("coordinates look like longitude/latitude degrees; pass an equirectangular "
                       "projection directive");
    }
    if (projection == Projection::equirectangular) {
        project_equirectangular(fps);
    }
    return BuildingMap::from_footprints(std::move(fps));
}

inline BuildingMap parse_native(std::span<const std::uint8_t> raw)
{
    ByteReader r(raw);
    r.need(5);
    if (std::memcmp(raw.data(), kMapMagic, 4) != 0) {
        throw MapError("not a map cache: bad magic");
    }
    r.str(4);
    const auto version = r.u8();
    if (version != kMapVersion) {
        throw MapError("unsupported map cache version " + std::to_string(version));
    }
    const auto n = static_cast<std::uint32_t>(r.le(4));
    std::vector<Footprint> fps;
    fps.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        r.le(4); // stored id; re-derived by the sort rule
        Footprint fp;
        fp.external_id = r.str(static_cast<std::size_t>(r.le(2)));
        const auto nv = static_cast<std::uint32_t>(r.le(4));
        fp.ring.reserve(nv);
        for (std::uint32_t v = 0; v < nv; ++v) {
            const double x = r.f64();
            const double y = r.f64();
            fp.ring.push_back({x, y});
        }
        fps.push_back(std::move(fp));
    }
    if (!r.done()) {
        throw MapError("trailing bytes in map cache");
    }
    return BuildingMap::from_footprints(std::move(fps));
}

} // namespace detail

inline BuildingMap load_map(std::span<const std::uint8_t> raw, const LoadOptions& opts = {})
{
    MapFormat fmt = opts.format;
    if (fmt == MapFormat::detect) {
        fmt = (raw.size() >= 4 && std::memcmp(raw.data(), detail::kMapMagic, 4) == 0) ? MapFormat::native
                                                                                       : MapFormat::geojson;
    }
    if (fmt == MapFormat::native) {
        return detail::parse_native(raw);
    }
    return detail::parse_geojson(
        std::string_view(reinterpret_cast<const char*>(raw.data()), raw.size()), opts.projection);
}

inline BuildingMap load_map(std::string_view text, const LoadOptions& opts = {})
{
    return load_map(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()), opts);
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw MapError("cannot open '" + path + "'");
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline BuildingMap load_map_file(const std::string& path, const LoadOptions& opts = {})
{
    const auto bytes = read_file_bytes(path);
    return load_map(std::span<const std::uint8_t>(bytes), opts);
}

/// Native cache: magic MMAP, version byte, little-endian u32 count, then per
/// building u32 id, u16-prefixed external id, u32 vertex count, f64 pairs.
inline std::vector<std::uint8_t> serialize_map(const BuildingMap& m)
{
    detail::ByteWriter w;
    w.bytes(detail::kMapMagic, 4);
    w.u8(detail::kMapVersion);
    w.u32(static_cast<std::uint32_t>(m.size()));
    for (const auto& b : m.buildings()) {
        w.u32(b.id);
        const auto len = static_cast<std::uint16_t>(std::min<std::size_t>(b.external_id.size(), 0xFFFF));
        w.u16(len);
        w.bytes(b.external_id.data(), len);
        w.u32(static_cast<std::uint32_t>(b.footprint.size()));
        for (Point p : b.footprint) {
            w.f64(p.x);
            w.f64(p.y);
        }
    }
    return w.take();
}

/// GeoJSON rendering in planar meters, tagged so it reloads without the
/// degree heuristic firing.
inline std::string to_geojson(const BuildingMap& m)
{
    nlohmann::json features = nlohmann::json::array();
    for (const auto& b : m.buildings()) {
        nlohmann::json ring = nlohmann::json::array();
        for (Point p : b.footprint) ring.push_back({p.x, p.y});
        ring.push_back({b.footprint.front().x, b.footprint.front().y});
        features.push_back({{"type", "Feature"},
                            {"properties", {{"id", b.external_id}}},
                            {"geometry", {{"type", "Polygon"}, {"coordinates", {ring}}}}});
    }
    nlohmann::json doc = {{"type", "FeatureCollection"}, {"mapmesh:crs", "planar"}, {"features", features}};
    return doc.dump();
}

// ---------------------------------------------------------------------------
// Devices
// ---------------------------------------------------------------------------

struct Device {
    DeviceId id = 0;
    BuildingId building_id = 0;
    Point position;
};

struct DeviceSet {
    std::vector<Device> devices;
    std::vector<std::vector<DeviceId>> by_building;

    std::size_t size() const noexcept { return devices.size(); }
};

inline constexpr double kDefaultDensityM2 = 200.0;
inline constexpr int kMaxPlacementAttempts = 10000;

inline std::size_t devices_for_area(double area, double density_m2)
{
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(area / density_m2)));
}

/// Uniform device placement: max(1, floor(area / density)) per building,
/// rejection-sampled within the footprint bounding box from a per-building
/// stream of `seed`.
inline DeviceSet place_devices(const BuildingMap& map, double density_m2, std::uint64_t seed)
{
    if (!(density_m2 > 0.0)) {
        throw std::invalid_argument("device density must be positive");
    }
    DeviceSet set;
    set.by_building.resize(map.size());
    for (const auto& b : map.buildings()) {
        rng::Stream s(seed, rng::Purpose::placement, b.id);
        const std::size_t count = devices_for_area(b.area, density_m2);
        for (std::size_t k = 0; k < count; ++k) {
            Point p = b.centroid;
            for (int attempt = 0; attempt < kMaxPlacementAttempts; ++attempt) {
                const Point q{s.uniform(b.box.min.x, b.box.max.x), s.uniform(b.box.min.y, b.box.max.y)};
                if (point_in_polygon(q, b.footprint)) {
                    p = q;
                    break;
                }
            }
            const auto id = static_cast<DeviceId>(set.devices.size());
            set.devices.push_back({id, b.id, p});
            set.by_building[b.id].push_back(id);
        }
    }
    return set;
}

} // namespace mapmesh
