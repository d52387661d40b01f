#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"

#include "silsm/field_core.hpp"
#include "silsm/grid.hpp"

namespace silsm {

/// Which pixels contribute to the foreground mean c1.
enum class MeanScope { kInterested, kWholeDomain };

const char* to_string(MeanScope scope);
MeanScope mean_scope_from_string(const std::string& s);

struct SolverParams {
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    double mu = 1.0;
    double alpha = 5.0;
    double dt = 0.1;
    int steps_per_round = 200;
    double eps = 1.0;
    double blowup_bound = 1e8;
    MeanScope c1_scope = MeanScope::kInterested;
    GradientScheme scheme = GradientScheme::kCentral;

    /// Throws ParameterError on any invalid field.
    void validate() const;
};

void to_json(nlohmann::json& j, const SolverParams& p);
/// Missing keys keep the values already present in p.
void from_json(const nlohmann::json& j, SolverParams& p);

enum class MeanFallback { kNone, kWholeComplement, kForegroundMean };

struct RegionMeans {
    double c1 = 0.0;
    double c2 = 0.0;
    MeanFallback fallback = MeanFallback::kNone;
};

RegionMeans compute_region_means(const GrayImage& image, const LevelSetField& phi, const RegionMask& interested,
                                 double eps, MeanScope c1_scope = MeanScope::kInterested);

ScalarGrid segmentation_velocity(const GrayImage& image, const LevelSetField& phi, const RegionMeans& means,
                                 const SolverParams& params);
ScalarGrid mbe_velocity(const LevelSetField& phi, const SolverParams& params);
ScalarGrid interaction_velocity(const LevelSetField& phi, const VelocityField& velocity,
                                GradientScheme scheme = GradientScheme::kCentral);

/// Mean of ||grad phi| - 1| over pixels with |phi| < band; NaN when the band is empty.
double signed_distance_drift(const LevelSetField& phi, double band = 3.0);

struct StepDiagnostics {
    int step = 0;
    double max_delta = 0.0;
    double drift = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    MeanFallback fallback = MeanFallback::kNone;
};

nlohmann::json to_json(const StepDiagnostics& d);
std::string to_json_line(const StepDiagnostics& d);

struct StepInputs {
    const GrayImage& image;
    const LevelSetField& phi;
    const VelocityField& velocity;
    const RegionMask& interested;
    const SolverParams& params;
};

/// Replaces F|grad phi| in the update; used by comparators in the validation suite.
using InteractionTerm = std::function<ScalarGrid(const LevelSetField&)>;

/**
 * @brief One forward Euler update of phi from the three velocity terms.
 *
 * Throws DivergenceError (step index 0) when the result is non-finite or
 * exceeds params.blowup_bound, ProtocolError when interested is empty.
 */
LevelSetField step(const StepInputs& in, StepDiagnostics* diag = nullptr, const InteractionTerm& term = {});

struct RunResult {
    LevelSetField phi;
    std::vector<StepDiagnostics> diagnostics;
};

using ProgressFn = std::function<void(const StepDiagnostics&)>;

/// n sequential steps; a divergence is rethrown carrying the 1-based step index.
RunResult run(const StepInputs& in, int n, const ProgressFn& progress = {}, const InteractionTerm& term = {});

}  // namespace silsm
