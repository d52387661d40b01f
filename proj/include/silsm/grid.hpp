#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "silsm/errors.hpp"

namespace silsm {

/**
 * @brief Dense row-major 2D grid. Index (x, y) maps to y * width + x.
 */
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(int width, int height, T fill = T{})
        : width_(width), height_(height), data_(checked_size(width, height), fill) {}

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T& operator()(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    const T& operator()(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    /// Replicate-edge access: coordinates are clamped into the grid.
    const T& clamped(int x, int y) const {
        x = x < 0 ? 0 : (x >= width_ ? width_ - 1 : x);
        y = y < 0 ? 0 : (y >= height_ ? height_ - 1 : y);
        return (*this)(x, y);
    }

    bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

    template <typename U>
    bool same_shape(const Grid<U>& other) const {
        return width_ == other.width() && height_ == other.height();
    }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

    bool operator==(const Grid& other) const = default;

private:
    static std::size_t checked_size(int width, int height) {
        if (width < 0 || height < 0) throw ParameterError("grid dimensions must be non-negative");
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

using ScalarGrid = Grid<double>;
/// Intensity raster in raw [0, 255] units.
using GrayImage = Grid<double>;
/// The evolving level set function; foreground is phi > 0.
using LevelSetField = Grid<double>;
/// Per-pixel interaction speed F.
using VelocityField = Grid<double>;
/// Boolean membership stored as 0/1 bytes.
using RegionMask = Grid<std::uint8_t>;
using SegmentationMask = RegionMask;

std::size_t area(const RegionMask& mask);
RegionMask mask_union(const RegionMask& a, const RegionMask& b);
RegionMask foreground_mask(const LevelSetField& phi);

/// Throws ParameterError unless the image is at least 3x3 with finite values in [0, 255].
void validate_image(const GrayImage& image);

/// FNV-1a over the little-endian bytes of each value.
std::uint64_t checksum(const ScalarGrid& grid);
std::uint64_t checksum(const RegionMask& mask);

}  // namespace silsm
