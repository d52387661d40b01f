#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "silsm/evolution.hpp"
#include "silsm/grid.hpp"

namespace silsm {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Point2&) const = default;
};

struct Pixel {
    int x = 0;
    int y = 0;
    bool operator==(const Pixel&) const = default;
};

/**
 * @brief User-drawn region in continuous image coordinates.
 *
 * Pixel (x, y) covers [x, x+1) x [y, y+1); membership is tested at its
 * centre (x + 0.5, y + 0.5).
 */
struct Shape {
    enum class Type { kRect, kPolygon, kScribble };
    Type type = Type::kRect;
    double x = 0.0, y = 0.0, width = 0.0, height = 0.0;  // rect
    std::vector<Point2> points;                          // polygon vertices or scribble path
    double radius = 3.0;                                 // scribble dilation
    bool operator==(const Shape&) const = default;
};

RegionMask rasterize(const Shape& shape, int width, int height);

struct InteractionEvent {
    int round = 1;
    Shape shape;
    std::optional<Pixel> point;
    double speed = 0.0;
    std::optional<int> steps;  // overrides params.steps_per_round
    bool operator==(const InteractionEvent&) const = default;
};

/// Extra evolution without a new round; dt, when set, overrides params.dt for this run only.
struct StepsRequest {
    int n = 0;
    std::optional<double> dt;
    bool operator==(const StepsRequest&) const = default;
};

using ScriptEntry = std::variant<InteractionEvent, StepsRequest>;

struct RoundRecord {
    InteractionEvent event;
    std::uint64_t pre_checksum = 0;   // phi before the round (0 before round 1)
    std::uint64_t post_checksum = 0;
    int point_sign = 0;               // sign of phi(P_i) before reconstitution
    double k = 0.0;                   // init constant c or reconstitution constant k
    bool overlaps_interest = false;   // Omega_i intersects the previous Omega_interested
    std::vector<StepDiagnostics> diagnostics;
};

struct SessionState {
    GrayImage image;
    LevelSetField phi;       // empty until round 1
    VelocityField velocity;  // empty until round 1
    RegionMask interested;   // empty until round 1
    SolverParams params;
    std::vector<RoundRecord> history;

    explicit SessionState(GrayImage img, SolverParams p = {});
    bool started() const { return !history.empty(); }
};

LevelSetField init_lsf(const RegionMask& region);
VelocityField build_first_velocity(const RegionMask& region, double a1);
LevelSetField reconstitute(const LevelSetField& phi, const RegionMask& region, Pixel point);
VelocityField patch_velocity(const VelocityField& velocity, const RegionMask& region, int phi_at_point_sign,
                             double a_i);

/// Validates the event, resets phi and the speed field on its region, then evolves.
SessionState apply_interaction(SessionState session, const InteractionEvent& event, const ProgressFn& progress = {});

/// Additional evolution steps on a started session.
SessionState run_more_steps(SessionState session, const StepsRequest& req, const ProgressFn& progress = {},
                            std::vector<StepDiagnostics>* diagnostics = nullptr);

SessionState apply_entry(SessionState session, const ScriptEntry& entry, const ProgressFn& progress = {},
                         std::vector<StepDiagnostics>* diagnostics = nullptr);

// Script JSON: an array of entries. Interaction entries carry "round"; extra
// evolution entries are {"type": "steps", "n": N, "dt": optional}.
Shape shape_from_json(const nlohmann::json& j);
nlohmann::json shape_to_json(const Shape& s);
InteractionEvent event_from_json(const nlohmann::json& j);
nlohmann::json event_to_json(const InteractionEvent& e);
ScriptEntry entry_from_json(const nlohmann::json& j);
nlohmann::json entry_to_json(const ScriptEntry& e);
std::vector<ScriptEntry> script_from_json(const nlohmann::json& j);
nlohmann::json script_to_json(const std::vector<ScriptEntry>& script);

nlohmann::json round_summary_json(const RoundRecord& r);

std::string checksum_hex(std::uint64_t v);

}  // namespace silsm
