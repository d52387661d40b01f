#pragma once

#include <cstdint>
#include <random>

#include "silsm/grid.hpp"

namespace silsm::test {

inline ScalarGrid random_grid(int w, int h, std::uint64_t seed, double lo = -5.0, double hi = 5.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    ScalarGrid g(w, h);
    for (auto& v : g.data()) v = u(rng);
    return g;
}

template <typename F>
ScalarGrid make_grid(int w, int h, F f) {
    ScalarGrid g(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) g(x, y) = f(x, y);
    return g;
}

inline double max_abs_diff(const ScalarGrid& a, const ScalarGrid& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace silsm::test
