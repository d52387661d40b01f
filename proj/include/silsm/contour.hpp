#pragma once

#include <vector>

#include "json.hpp"

#include "silsm/grid.hpp"
#include "silsm/image_io.hpp"
#include "silsm/interaction.hpp"

namespace silsm {

struct Polyline {
    std::vector<Point2> points;
    bool closed = true;
};

/**
 * @brief Zero level set of phi by marching squares.
 *
 * Vertices are linearly interpolated zero crossings between pixel centres,
 * in the same continuous coordinates as Shape (centre of pixel x is x + 0.5).
 * The grid is padded with a background ring so every polyline is closed.
 * Saddle cells are resolved by the cell-centre average.
 */
std::vector<Polyline> extract_contours(const LevelSetField& phi);

/// Shoelace area of a closed polyline (absolute value).
double enclosed_area(const Polyline& line);

nlohmann::json contours_to_json(const std::vector<Polyline>& lines);

/// Grayscale image with the foreground boundary in red and the interest boundary in green.
RgbImage render_overlay(const GrayImage& image, const RegionMask& foreground, const RegionMask& interested);

}  // namespace silsm
