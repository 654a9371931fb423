#pragma once

#include "graph.hpp"

#include <stdexcept>
#include <vector>

namespace mapmesh {

inline constexpr double kDefaultConduitWidthM = 150.0;

/// Closed region within W/2 of segment [a, b]. a == b gives a disc.
struct Conduit {
    Point a;
    Point b;
    double width = kDefaultConduitWidthM;
};

/// Projection, clamp, squared compare.
constexpr bool in_conduit(Point p, const Conduit& c) noexcept
{
    const double half = 0.5 * c.width;
    return segment_distance2(p, c.a, c.b) <= half * half;
}

inline Conduit conduit_between(const BuildingMap& map, BuildingId a, BuildingId b, double width)
{
    return {map[a].centroid, map[b].centroid, width};
}

struct WaypointRoute {
    std::vector<BuildingId> waypoints;

    std::size_t size() const noexcept { return waypoints.size(); }
    friend bool operator==(const WaypointRoute&, const WaypointRoute&) = default;
};

namespace detail {

inline bool segment_covers(const BuildingMap& map, std::span<const BuildingId> nodes, std::size_t from,
                           std::size_t to, double width)
{
    const Conduit c = conduit_between(map, nodes[from], nodes[to], width);
    for (std::size_t i = from + 1; i < to; ++i) {
        if (!in_conduit(map[nodes[i]].centroid, c)) return false;
    }
    return true;
}

} // namespace detail

/// Greedy scan: keep extending the conduit from the current anchor while it
/// holds every centroid since the anchor; on failure the last passing
/// building becomes a waypoint and the new anchor.
inline WaypointRoute compress_waypoints(std::span<const BuildingId> path, const BuildingMap& map,
                                        double width = kDefaultConduitWidthM)
{
    if (path.empty()) {
        throw std::invalid_argument("cannot compress an empty path");
    }
    if (!(width > 0.0)) {
        throw std::invalid_argument("conduit width must be positive");
    }
    WaypointRoute out;
    out.waypoints.push_back(path.front());
    std::size_t anchor = 0;
    for (std::size_t i = anchor + 2; i < path.size(); ++i) {
        if (!detail::segment_covers(map, path, anchor, i, width)) {
            anchor = i - 1;
            out.waypoints.push_back(path[anchor]);
        }
    }
    if (path.size() > 1) out.waypoints.push_back(path.back());
    return out;
}

inline WaypointRoute compress_waypoints(const BuildingPath& path, const BuildingMap& map,
                                        double width = kDefaultConduitWidthM)
{
    return compress_waypoints(std::span<const BuildingId>(path.nodes), map, width);
}

/// Whether every centroid of `path` lies in some conduit between
/// consecutive waypoints of `route`.
inline bool covers_path(const WaypointRoute& route, std::span<const BuildingId> path, const BuildingMap& map,
                        double width)
{
    std::vector<Conduit> conduits;
    if (route.waypoints.size() == 1) {
        const Point p = map[route.waypoints[0]].centroid;
        conduits.push_back({p, p, width});
    }
    for (std::size_t i = 1; i < route.waypoints.size(); ++i) {
        conduits.push_back(conduit_between(map, route.waypoints[i - 1], route.waypoints[i], width));
    }
    for (BuildingId b : path) {
        const Point p = map[b].centroid;
        bool inside = false;
        for (const auto& c : conduits) {
            if (in_conduit(p, c)) {
                inside = true;
                break;
            }
        }
        if (!inside) return false;
    }
    return true;
}

} // namespace mapmesh
