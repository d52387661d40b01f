#include "silsm/contour.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_map>

namespace silsm {

namespace {

constexpr double kPadValue = -1.0;

struct Padded {
    const LevelSetField& phi;
    double at(int x, int y) const {  // padded coordinates: (0,0) is outside
        const int ix = x - 1, iy = y - 1;
        return phi.contains(ix, iy) ? phi(ix, iy) : kPadValue;
    }
};

// Edge ids on the padded lattice of W x H nodes.
struct EdgeIndex {
    long long W;
    long long horizontal(int x, int y) const { return 2 * (static_cast<long long>(y) * W + x); }
    long long vertical(int x, int y) const { return 2 * (static_cast<long long>(y) * W + x) + 1; }
};

}  // namespace

std::vector<Polyline> extract_contours(const LevelSetField& phi) {
    const int W = phi.width() + 2, H = phi.height() + 2;
    const Padded p{phi};
    const EdgeIndex ei{W};
    std::unordered_map<long long, Point2> vertex;
    std::vector<std::array<long long, 2>> segments;

    auto crossing = [&](long long id, int ax, int ay, int bx, int by) {
        if (vertex.count(id)) return;
        const double va = p.at(ax, ay), vb = p.at(bx, by);
        const double t = va / (va - vb);
        // Padded node (x, y) sits at continuous coordinate (x - 0.5, y - 0.5).
        vertex[id] = Point2{ax - 0.5 + t * (bx - ax), ay - 0.5 + t * (by - ay)};
    };

    for (int y = 0; y + 1 < H; ++y) {
        for (int x = 0; x + 1 < W; ++x) {
            const double v00 = p.at(x, y), v10 = p.at(x + 1, y), v11 = p.at(x + 1, y + 1), v01 = p.at(x, y + 1);
            const int code = (v00 > 0) | ((v10 > 0) << 1) | ((v11 > 0) << 2) | ((v01 > 0) << 3);
            if (code == 0 || code == 15) continue;
            const long long top = ei.horizontal(x, y), bottom = ei.horizontal(x, y + 1);
            const long long left = ei.vertical(x, y), right = ei.vertical(x + 1, y);
            auto edge_vertex = [&](long long e) {
                if (e == top) crossing(e, x, y, x + 1, y);
                else if (e == bottom) crossing(e, x, y + 1, x + 1, y + 1);
                else if (e == left) crossing(e, x, y, x, y + 1);
                else crossing(e, x + 1, y, x + 1, y + 1);
            };
            auto seg = [&](long long a, long long b) {
                edge_vertex(a);
                edge_vertex(b);
                segments.push_back({a, b});
            };
            switch (code) {
                case 1: case 14: seg(left, top); break;
                case 2: case 13: seg(top, right); break;
                case 3: case 12: seg(left, right); break;
                case 4: case 11: seg(right, bottom); break;
                case 6: case 9: seg(top, bottom); break;
                case 7: case 8: seg(left, bottom); break;
                case 5: case 10: {
                    const bool centre_in = (v00 + v10 + v11 + v01) / 4.0 > 0;
                    // code 5: corners 00 and 11 inside.
                    const bool joined = (code == 5) == centre_in;
                    if (joined) {
                        seg(left, bottom);
                        seg(top, right);
                    } else {
                        seg(left, top);
                        seg(right, bottom);
                    }
                    break;
                }
                default: break;
            }
        }
    }

    std::unordered_map<long long, std::vector<std::size_t>> incident;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        incident[segments[i][0]].push_back(i);
        incident[segments[i][1]].push_back(i);
    }
    std::vector<char> used(segments.size(), 0);
    std::vector<Polyline> lines;
    for (std::size_t s = 0; s < segments.size(); ++s) {
        if (used[s]) continue;
        used[s] = 1;
        Polyline line;
        const long long start = segments[s][0];
        long long cur = segments[s][1];
        line.points.push_back(vertex[start]);
        line.closed = false;
        while (true) {
            if (cur == start) {
                line.closed = true;
                break;
            }
            line.points.push_back(vertex[cur]);
            std::size_t next = segments.size();
            for (std::size_t cand : incident[cur])
                if (!used[cand]) {
                    next = cand;
                    break;
                }
            if (next == segments.size()) break;
            used[next] = 1;
            cur = segments[next][0] == cur ? segments[next][1] : segments[next][0];
        }
        lines.push_back(std::move(line));
    }
    return lines;
}

double enclosed_area(const Polyline& line) {
    double a = 0.0;
    const std::size_t n = line.points.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point2& p = line.points[i];
        const Point2& q = line.points[(i + 1) % n];
        a += p.x * q.y - q.x * p.y;
    }
    return std::abs(a) / 2.0;
}

nlohmann::json contours_to_json(const std::vector<Polyline>& lines) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& l : lines) {
        nlohmann::json pts = nlohmann::json::array();
        for (const auto& p : l.points) pts.push_back({p.x, p.y});
        arr.push_back({{"closed", l.closed}, {"points", std::move(pts)}});
    }
    return arr;
}

RgbImage render_overlay(const GrayImage& image, const RegionMask& foreground, const RegionMask& interested) {
    RgbImage out{image.width(), image.height(), {}};
    out.pixels.resize(static_cast<std::size_t>(image.width()) * image.height() * 3);
    auto boundary = [](const RegionMask& m, int x, int y) {
        if (m.empty() || !m(x, y)) return false;
        return !m.clamped(x - 1, y) || !m.clamped(x + 1, y) || !m.clamped(x, y - 1) || !m.clamped(x, y + 1) ||
               x == 0 || y == 0 || x == m.width() - 1 || y == m.height() - 1;
    };
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            const auto g = static_cast<std::uint8_t>(std::lround(std::clamp(image(x, y), 0.0, 255.0)));
            std::uint8_t rgb[3] = {g, g, g};
            if (boundary(interested, x, y)) {
                rgb[0] = 0;
                rgb[1] = 200;
                rgb[2] = 0;
            }
            if (boundary(foreground, x, y)) {
                rgb[0] = 255;
                rgb[1] = 0;
                rgb[2] = 0;
            }
            std::copy(rgb, rgb + 3, out.pixels.begin() + (static_cast<std::size_t>(y) * image.width() + x) * 3);
        }
    }
    return out;
}

}  // namespace silsm
