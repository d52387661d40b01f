#pragma once

#include "silsm/grid.hpp"

namespace silsm {

// Discrete operators on a unit-spaced grid. Every stencil reads neighbours
// through replicate-edge clamping, and every operator returns a fresh grid.

ScalarGrid dx(const ScalarGrid& f);
ScalarGrid dy(const ScalarGrid& f);
ScalarGrid grad_mag(const ScalarGrid& f);
ScalarGrid laplacian(const ScalarGrid& f);
ScalarGrid biharmonic(const ScalarGrid& f);

/// dx(g1) + dy(g2) with g = (|grad f|^2 - 1) grad f.
ScalarGrid div_flux(const ScalarGrid& f);

enum class GradientScheme { kCentral, kUpwind };

const char* to_string(GradientScheme scheme);

/**
 * @brief Godunov upwind |grad f| for the motion f_t = speed * |grad f|.
 *
 * The one-sided differences are selected per pixel from the sign of speed.
 */
ScalarGrid grad_mag_upwind(const ScalarGrid& f, const ScalarGrid& speed);

double heaviside_eps(double phi, double eps);
double dirac_eps(double phi, double eps);

ScalarGrid heaviside_eps(const ScalarGrid& phi, double eps);
ScalarGrid dirac_eps(const ScalarGrid& phi, double eps);

double max_abs(const ScalarGrid& f);
bool all_finite(const ScalarGrid& f);

}  // namespace silsm
