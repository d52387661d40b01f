#include "silsm/grid.hpp"

#include <cmath>
#include <cstring>

namespace silsm {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

inline std::uint64_t fnv_byte(std::uint64_t h, std::uint8_t b) {
    return (h ^ b) * kFnvPrime;
}

}  // namespace

std::size_t area(const RegionMask& mask) {
    std::size_t n = 0;
    for (auto v : mask.data()) n += v ? 1 : 0;
    return n;
}

RegionMask mask_union(const RegionMask& a, const RegionMask& b) {
    if (!a.same_shape(b)) throw ParameterError("mask_union: dimension mismatch");
    RegionMask out(a.width(), a.height());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] || b[i]) ? 1 : 0;
    return out;
}

RegionMask foreground_mask(const LevelSetField& phi) {
    RegionMask out(phi.width(), phi.height());
    for (std::size_t i = 0; i < phi.size(); ++i) out[i] = phi[i] > 0.0 ? 1 : 0;
    return out;
}

void validate_image(const GrayImage& image) {
    if (image.width() < 3 || image.height() < 3) {
        throw ParameterError("image must be at least 3x3, got " + std::to_string(image.width()) + "x" +
                             std::to_string(image.height()));
    }
    for (double v : image.data()) {
        if (!std::isfinite(v) || v < 0.0 || v > 255.0) {
            throw ParameterError("image intensities must be finite and within [0, 255]");
        }
    }
}

std::uint64_t checksum(const ScalarGrid& grid) {
    std::uint64_t h = kFnvOffset;
    auto mix32 = [&h](std::uint32_t v) {
        for (int k = 0; k < 4; ++k) h = fnv_byte(h, static_cast<std::uint8_t>(v >> (8 * k)));
    };
    mix32(static_cast<std::uint32_t>(grid.width()));
    mix32(static_cast<std::uint32_t>(grid.height()));
    for (double v : grid.data()) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        for (int k = 0; k < 8; ++k) h = fnv_byte(h, static_cast<std::uint8_t>(bits >> (8 * k)));
    }
    return h;
}

std::uint64_t checksum(const RegionMask& mask) {
    std::uint64_t h = kFnvOffset;
    for (auto v : mask.data()) h = fnv_byte(h, v);
    return h;
}

}  // namespace silsm
