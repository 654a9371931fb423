#pragma once

// Synthetic city generators for tests, benchmarks and the acceptance suite.

#include "mapdata.hpp"

#include <vector>

namespace mapmesh::synth {

inline Footprint rectangle(double x0, double y0, double w, double h, std::string id = {})
{
    return {{{x0, y0}, {x0 + w, y0}, {x0 + w, y0 + h}, {x0, y0 + h}}, std::move(id)};
}

inline Footprint square_at(Point center, double side, std::string id = {})
{
    return rectangle(center.x - side / 2, center.y - side / 2, side, side, std::move(id));
}

struct GridCityParams {
    int rows = 30;
    int cols = 30;
    double pitch_m = 40.0;    ///< block spacing between building origins
    double min_side_m = 20.0; ///< footprint side lengths drawn uniformly in [min, max]
    double max_side_m = 30.0;
    double jitter_m = 3.0;    ///< uniform offset of each footprint inside its block
    int voids = 0;            ///< rectangular empty areas (parks, water)
    int void_min_blocks = 3;
    int void_max_blocks = 5;
    double drop_fraction = 0.0; ///< independent per-block vacancy probability
};

/// Rows x cols blocks, one rectangular building per occupied block.
inline BuildingMap grid_city(const GridCityParams& p, std::uint64_t seed)
{
    rng::Stream s(seed, rng::Purpose::synth, 0);
    std::vector<char> vacant(static_cast<std::size_t>(p.rows) * p.cols, 0);
    for (int v = 0; v < p.voids; ++v) {
        const int h = p.void_min_blocks + static_cast<int>(s.below(p.void_max_blocks - p.void_min_blocks + 1));
        const int w = p.void_min_blocks + static_cast<int>(s.below(p.void_max_blocks - p.void_min_blocks + 1));
        // Keep voids off the outer ring so the city stays connected around them.
        const int r0 = 1 + static_cast<int>(s.below(static_cast<std::uint64_t>(std::max(1, p.rows - h - 1))));
        const int c0 = 1 + static_cast<int>(s.below(static_cast<std::uint64_t>(std::max(1, p.cols - w - 1))));
        for (int r = r0; r < std::min(p.rows - 1, r0 + h); ++r) {
            for (int c = c0; c < std::min(p.cols - 1, c0 + w); ++c) {
                vacant[static_cast<std::size_t>(r) * p.cols + c] = 1;
            }
        }
    }
    std::vector<Footprint> fps;
    fps.reserve(vacant.size());
    for (int r = 0; r < p.rows; ++r) {
        for (int c = 0; c < p.cols; ++c) {
            rng::Stream b(seed, rng::Purpose::synth, 1 + static_cast<std::uint64_t>(r) * p.cols + c);
            const bool dropped = b.bernoulli(p.drop_fraction);
            if (vacant[static_cast<std::size_t>(r) * p.cols + c] || dropped) {
                continue;
            }
            const double w = b.uniform(p.min_side_m, p.max_side_m);
            const double h = b.uniform(p.min_side_m, p.max_side_m);
            const double slack_x = std::max(0.0, p.pitch_m - w) / 2;
            const double slack_y = std::max(0.0, p.pitch_m - h) / 2;
            const double jx = b.uniform(-1.0, 1.0) * std::min(p.jitter_m, slack_x);
            const double jy = b.uniform(-1.0, 1.0) * std::min(p.jitter_m, slack_y);
            const double x0 = c * p.pitch_m + (p.pitch_m - w) / 2 + jx;
            const double y0 = r * p.pitch_m + (p.pitch_m - h) / 2 + jy;
            fps.push_back(rectangle(x0, y0, w, h, "g" + std::to_string(r) + "_" + std::to_string(c)));
        }
    }
    return BuildingMap::from_footprints(std::move(fps));
}

/// Squares of the given side centered on the given points.
inline BuildingMap squares(const std::vector<Point>& centers, double side)
{
    std::vector<Footprint> fps;
    for (std::size_t i = 0; i < centers.size(); ++i) {
        fps.push_back(square_at(centers[i], side, "s" + std::to_string(i)));
    }
    return BuildingMap::from_footprints(std::move(fps));
}

} // namespace mapmesh::synth
