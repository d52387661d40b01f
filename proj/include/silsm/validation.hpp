#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "silsm/evolution.hpp"
#include "silsm/field_core.hpp"
#include "silsm/grid.hpp"
#include "silsm/interaction.hpp"
#include "silsm/metrics.hpp"

namespace silsm {

/// An experiment could not produce its measurement (e.g. no collapse in time).
class ExperimentFailure : public Error {
public:
    using Error::Error;
};

// ============================================================================
// Nested synthetic image
// ============================================================================

constexpr int kNestedSize = 50;

/// 50x50, background 240, centred 30x30 square at 0, centred radius-10 circle at 128.
GrayImage make_nested_image();
RegionMask nested_square_mask();
RegionMask nested_circle_mask();
RegionMask nested_square_minus_circle_mask();

/// Closed-form CV energy when the foreground is the square minus a centred disc of radius r.
double analytic_cv_energy(double r);

/// CV energy with H_eps(phi) weights and whole-domain means.
double discrete_cv_energy(const GrayImage& image, const LevelSetField& phi, double eps);

/// +magnitude inside mask, -magnitude outside.
LevelSetField sharp_field(const RegionMask& mask, double magnitude = 1e6);

// ============================================================================
// Collapse under constant inward speed
// ============================================================================

struct CollapseExperimentSpec {
    double r_in = 15.0;
    double c = -1.0;
    int size = 64;
    double dt = 0.1;
    GradientScheme scheme = GradientScheme::kUpwind;

    void validate() const;
};

struct CollapseResult {
    double time = 0.0;
    int steps = 0;
};

/// Evolves phi_t = c|grad phi| from the signed distance to a centred circle until no pixel is positive.
CollapseResult run_collapse_experiment(const CollapseExperimentSpec& spec);

// ============================================================================
// Length energy versus Laplacian energy
// ============================================================================

struct InequalitySample {
    std::string label;
    int n = 0;                  // grid points per unit length
    double eps = 0.1;
    double gradient_floor = 0.1;
    LevelSetField phi;          // sampled on the unit square
    RegionMask domain;          // disc on which the energies are summed
    double length_energy = 0.0;
    double laplacian_energy = 0.0;
    double ratio = 0.0;
    double boundary_min_gradient = 0.0;
};

/// Smoothed radial bump sigma * (1 - rho(|x - x0|) / rho(R)), rho(r) = sqrt(r^2 + (R/4)^2), on an n x n grid.
InequalitySample make_bump_sample(int n, double sigma, double eps = 0.1);
/// Affine field on the same disc, for which the Laplacian energy vanishes.
InequalitySample make_affine_sample(int n);

/// Fills the energies and ratio of a sample (h = 1/n scaling).
void measure_inequality_sample(InequalitySample& s);

struct InequalityReport {
    struct Entry {
        std::string label;
        int n = 0;
        double length_energy = 0.0;
        double laplacian_energy = 0.0;
        double ratio = 0.0;
        bool skipped = false;
        std::string warning;
    };
    std::vector<Entry> entries;
    int coarse_n = 0;
    int fine_n = 0;
    double coarse_max_ratio = 0.0;
    double fine_max_ratio = 0.0;
    double growth = 0.0;
    bool pass = false;
};

InequalityReport check_inequality(std::vector<InequalitySample> samples, double allowed_growth = 1.5);

// ============================================================================
// Ablation
// ============================================================================

/**
 * @brief gain * div(grad phi / (|grad phi| + 1e-8)) * |grad phi|.
 *
 * The speed gain * kappa is saturated at +-speed_limit and the product at
 * +-product_limit.
 */
ScalarGrid curvature_velocity(const LevelSetField& phi, double gain, double product_limit = 1e6,
                              double speed_limit = std::numeric_limits<double>::infinity());

struct Blob {
    double cx, cy, r;
};

struct AblationSpec {
    int size = 128;
    std::uint64_t seed = 7;
    double background = 30.0;
    double foreground = 200.0;
    double noise_sigma = 5.0;
    std::vector<Blob> blobs{{40.0, 40.0, 12.0}, {96.0, 64.0, 13.0}, {36.0, 96.0, 11.0}};
    double roi_cx = 40.0, roi_cy = 40.0, roi_r = 22.0;
    int iterations = 300;
    double dt = 3e-4;
    double eps = 1.0;
    double a1 = 500.0;
    double curvature_gain = 1e20;
    double curvature_product_limit = 1e6;
    double curvature_speed_limit = 500.0;
};

struct AblationScene {
    GrayImage image;
    RegionMask roi;
    RegionMask target;     // blob inside the ROI
    RegionMask all_blobs;
};

AblationScene make_ablation_scene(const AblationSpec& spec);

struct AblationRun {
    std::string name;
    SolverParams params;
    LevelSetField phi;          // final field, or last finite field on divergence
    RegionMask mask;
    bool diverged = false;
    int divergence_step = 0;
    int steps_completed = 0;
    double drift = 0.0;              // +inf when diverged
    double last_finite_drift = 0.0;  // drift of phi as stored
    std::size_t outside_roi = 0;     // foreground pixels outside the ROI
    bool contained = false;
    double dice = 0.0;
};

struct AblationReport {
    AblationSpec spec;
    AblationRun proposed;   // mu=1, alpha=5, F=-a1 outside the ROI
    AblationRun curvature;  // mu=1, alpha=5, curvature force outside the ROI
    AblationRun unregularized;  // mu=0, F=-a1 outside the ROI
};

AblationReport run_ablation(const AblationSpec& spec = {});

// ============================================================================
// Experiment reports
// ============================================================================

struct Check {
    std::string id;
    std::string description;
    nlohmann::json measured;
    nlohmann::json expected;
    std::string tolerance;
    bool pass = false;
};

struct ExperimentReport {
    std::string name;
    nlohmann::json inputs;
    std::vector<Check> checks;
    nlohmann::json details;
    bool pass() const;
};

nlohmann::json to_json(const ExperimentReport& r);

ExperimentReport experiment_energy();
ExperimentReport experiment_collapse();
ExperimentReport experiment_reconstitution();
ExperimentReport experiment_ablation();
ExperimentReport experiment_inequality();
ExperimentReport experiment_metrics();
ExperimentReport experiment_heaviside();

/// Selector names accepted by run_experiments, excluding "all".
const std::vector<std::string>& experiment_names();
/// Throws ParameterError on an unknown selector.
std::vector<ExperimentReport> run_experiments(const std::string& selector);

/// Settings of the two-round nested-image run.
struct NestedScenario {
    SolverParams params;
    std::vector<ScriptEntry> script;
};

NestedScenario nested_scenario();

}  // namespace silsm
