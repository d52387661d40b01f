#include "silsm/field_core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace silsm {

ScalarGrid dx(const ScalarGrid& f) {
    ScalarGrid out(f.width(), f.height());
    for (int y = 0; y < f.height(); ++y)
        for (int x = 0; x < f.width(); ++x) out(x, y) = (f.clamped(x + 1, y) - f.clamped(x - 1, y)) / 2.0;
    return out;
}

ScalarGrid dy(const ScalarGrid& f) {
    ScalarGrid out(f.width(), f.height());
    for (int y = 0; y < f.height(); ++y)
        for (int x = 0; x < f.width(); ++x) out(x, y) = (f.clamped(x, y + 1) - f.clamped(x, y - 1)) / 2.0;
    return out;
}

ScalarGrid grad_mag(const ScalarGrid& f) {
    ScalarGrid gx = dx(f);
    ScalarGrid gy = dy(f);
    ScalarGrid out(f.width(), f.height());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(gx[i] * gx[i] + gy[i] * gy[i]);
    return out;
}

ScalarGrid laplacian(const ScalarGrid& f) {
    ScalarGrid out(f.width(), f.height());
    for (int y = 0; y < f.height(); ++y)
        for (int x = 0; x < f.width(); ++x)
            out(x, y) = f.clamped(x + 1, y) + f.clamped(x - 1, y) + f.clamped(x, y + 1) + f.clamped(x, y - 1) -
                        4.0 * f(x, y);
    return out;
}

ScalarGrid biharmonic(const ScalarGrid& f) { return laplacian(laplacian(f)); }

ScalarGrid div_flux(const ScalarGrid& f) {
    ScalarGrid g1 = dx(f);
    ScalarGrid g2 = dy(f);
    for (std::size_t i = 0; i < g1.size(); ++i) {
        const double s = g1[i] * g1[i] + g2[i] * g2[i] - 1.0;
        g1[i] *= s;
        g2[i] *= s;
    }
    ScalarGrid out = dx(g1);
    ScalarGrid t = dy(g2);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += t[i];
    return out;
}

const char* to_string(GradientScheme scheme) {
    return scheme == GradientScheme::kUpwind ? "upwind" : "central";
}

ScalarGrid grad_mag_upwind(const ScalarGrid& f, const ScalarGrid& speed) {
    if (!f.same_shape(speed)) throw ParameterError("grad_mag_upwind: dimension mismatch");
    ScalarGrid out(f.width(), f.height());
    for (int y = 0; y < f.height(); ++y) {
        for (int x = 0; x < f.width(); ++x) {
            const double c = f(x, y);
            const double dxm = c - f.clamped(x - 1, y);
            const double dxp = f.clamped(x + 1, y) - c;
            const double dym = c - f.clamped(x, y - 1);
            const double dyp = f.clamped(x, y + 1) - c;
            double s;
            // f_t = F|grad f| is f_t + a|grad f| = 0 with a = -F.
            if (speed(x, y) < 0.0) {
                s = std::pow(std::max(dxm, 0.0), 2) + std::pow(std::min(dxp, 0.0), 2) +
                    std::pow(std::max(dym, 0.0), 2) + std::pow(std::min(dyp, 0.0), 2);
            } else {
                s = std::pow(std::max(dxp, 0.0), 2) + std::pow(std::min(dxm, 0.0), 2) +
                    std::pow(std::max(dyp, 0.0), 2) + std::pow(std::min(dym, 0.0), 2);
            }
            out(x, y) = std::sqrt(s);
        }
    }
    return out;
}

double heaviside_eps(double phi, double eps) {
    if (!(eps > 0.0)) throw ParameterError("heaviside_eps: eps must be > 0");
    return 0.5 * (1.0 + (2.0 / std::numbers::pi) * std::atan(phi / eps));
}

double dirac_eps(double phi, double eps) {
    if (!(eps > 0.0)) throw ParameterError("dirac_eps: eps must be > 0");
    return (eps / std::numbers::pi) / (eps * eps + phi * phi);
}

ScalarGrid heaviside_eps(const ScalarGrid& phi, double eps) {
    ScalarGrid out(phi.width(), phi.height());
    for (std::size_t i = 0; i < phi.size(); ++i) out[i] = heaviside_eps(phi[i], eps);
    return out;
}

ScalarGrid dirac_eps(const ScalarGrid& phi, double eps) {
    ScalarGrid out(phi.width(), phi.height());
    for (std::size_t i = 0; i < phi.size(); ++i) out[i] = dirac_eps(phi[i], eps);
    return out;
}

double max_abs(const ScalarGrid& f) {
    double m = 0.0;
    for (double v : f.data()) m = std::max(m, std::abs(v));
    return m;
}

bool all_finite(const ScalarGrid& f) {
    return std::all_of(f.data().begin(), f.data().end(), [](double v) { return std::isfinite(v); });
}

}  // namespace silsm
