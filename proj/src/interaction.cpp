#include "silsm/interaction.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace silsm {

namespace {

bool inside_polygon(const std::vector<Point2>& poly, double px, double py) {
    bool in = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const Point2& a = poly[i];
        const Point2& b = poly[j];
        if ((a.y > py) != (b.y > py)) {
            const double xc = a.x + (py - a.y) * (b.x - a.x) / (b.y - a.y);
            if (px < xc) in = !in;
        }
    }
    return in;
}

double dist2_to_segment(const Point2& a, const Point2& b, double px, double py) {
    const double vx = b.x - a.x, vy = b.y - a.y;
    const double len2 = vx * vx + vy * vy;
    double t = 0.0;
    if (len2 > 0.0) t = std::clamp(((px - a.x) * vx + (py - a.y) * vy) / len2, 0.0, 1.0);
    const double qx = a.x + t * vx - px, qy = a.y + t * vy - py;
    return qx * qx + qy * qy;
}

void require_region(const RegionMask& region, const char* what) {
    const std::size_t a = area(region);
    if (a == 0) throw ProtocolError(std::string(what) + ": region is empty");
    if (a == region.size()) throw ProtocolError(std::string(what) + ": region covers the whole image");
}

Point2 point_from_json(const nlohmann::json& p) {
    if (!p.is_array() || p.size() != 2) throw ProtocolError("points must be [x, y] pairs");
    return {p[0].get<double>(), p[1].get<double>()};
}

std::vector<Point2> points_from_json(const nlohmann::json& j) {
    if (!j.contains("points") || !j["points"].is_array()) throw ProtocolError("shape needs a 'points' array");
    std::vector<Point2> pts;
    for (const auto& p : j["points"]) pts.push_back(point_from_json(p));
    return pts;
}

nlohmann::json points_to_json(const std::vector<Point2>& pts) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& p : pts) a.push_back({p.x, p.y});
    return a;
}

void validate_shape(const Shape& s) {
    auto finite = [](double v) { return std::isfinite(v); };
    switch (s.type) {
        case Shape::Type::kRect:
            if (!finite(s.x) || !finite(s.y) || !(s.width > 0.0) || !(s.height > 0.0) || !finite(s.width) ||
                !finite(s.height))
                throw ProtocolError("rect needs finite x, y and positive width, height");
            break;
        case Shape::Type::kPolygon:
            if (s.points.size() < 3) throw ProtocolError("polygon needs at least 3 points");
            break;
        case Shape::Type::kScribble:
            if (s.points.empty()) throw ProtocolError("scribble needs at least 1 point");
            if (!(s.radius > 0.0) || !finite(s.radius)) throw ProtocolError("scribble radius must be > 0");
            break;
    }
    for (const auto& p : s.points)
        if (!finite(p.x) || !finite(p.y)) throw ProtocolError("shape coordinates must be finite");
}

}  // namespace

RegionMask rasterize(const Shape& shape, int width, int height) {
    validate_shape(shape);
    RegionMask m(width, height);
    for (int y = 0; y < height; ++y) {
        const double py = y + 0.5;
        for (int x = 0; x < width; ++x) {
            const double px = x + 0.5;
            bool in = false;
            switch (shape.type) {
                case Shape::Type::kRect:
                    in = px >= shape.x && px < shape.x + shape.width && py >= shape.y && py < shape.y + shape.height;
                    break;
                case Shape::Type::kPolygon:
                    in = inside_polygon(shape.points, px, py);
                    break;
                case Shape::Type::kScribble: {
                    const double r2 = shape.radius * shape.radius;
                    if (shape.points.size() == 1) {
                        in = dist2_to_segment(shape.points[0], shape.points[0], px, py) <= r2;
                    } else {
                        for (std::size_t i = 0; i + 1 < shape.points.size() && !in; ++i)
                            in = dist2_to_segment(shape.points[i], shape.points[i + 1], px, py) <= r2;
                    }
                    break;
                }
            }
            m(x, y) = in ? 1 : 0;
        }
    }
    return m;
}

SessionState::SessionState(GrayImage img, SolverParams p) : image(std::move(img)), params(p) {
    validate_image(image);
    params.validate();
}

LevelSetField init_lsf(const RegionMask& region) {
    require_region(region, "init_lsf");
    const double in = static_cast<double>(area(region));
    const double c = (static_cast<double>(region.size()) - in) / in;
    LevelSetField phi(region.width(), region.height());
    for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = region[i] ? c : -1.0;
    return phi;
}

VelocityField build_first_velocity(const RegionMask& region, double a1) {
    if (!(a1 > 0.0) || !std::isfinite(a1)) throw ParameterError("first-round speed a1 must be finite and > 0");
    VelocityField f(region.width(), region.height());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = region[i] ? 0.0 : -a1;
    return f;
}

LevelSetField reconstitute(const LevelSetField& phi, const RegionMask& region, Pixel point) {
    if (!phi.same_shape(region)) throw ParameterError("reconstitute: dimension mismatch");
    if (!phi.contains(point.x, point.y)) throw ProtocolError("reconstitute: point lies outside the image");
    require_region(region, "reconstitute");
    const double v = phi(point.x, point.y);
    if (v == 0.0) {
        throw AmbiguityError("ambiguous point: phi is exactly 0 at (" + std::to_string(point.x) + ", " +
                                 std::to_string(point.y) + ")",
                             point.x, point.y);
    }
    const double in = static_cast<double>(area(region));
    const double k = (static_cast<double>(region.size()) - in) / in;
    const double value = v < 0.0 ? k : -k;
    LevelSetField out = phi;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (region[i]) out[i] = value;
    return out;
}

VelocityField patch_velocity(const VelocityField& velocity, const RegionMask& region, int phi_at_point_sign,
                             double a_i) {
    if (!velocity.same_shape(region)) throw ParameterError("patch_velocity: dimension mismatch");
    if (phi_at_point_sign == 0) throw AmbiguityError("ambiguous point: phi sign is 0", -1, -1);
    if (!(a_i >= 0.0) || !std::isfinite(a_i)) throw ParameterError("round speed a_i must be finite and >= 0");
    const double value = phi_at_point_sign < 0 ? a_i : -a_i;
    VelocityField out = velocity;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (region[i]) out[i] = value;
    return out;
}

SessionState apply_interaction(SessionState session, const InteractionEvent& event, const ProgressFn& progress) {
    const int expected = static_cast<int>(session.history.size()) + 1;
    if (event.round != expected) {
        throw RoundOrderError("round " + std::to_string(event.round) + " submitted but round " +
                              std::to_string(expected) + " is next");
    }
    if (event.steps && *event.steps < 0) throw ProtocolError("steps override must be >= 0");
    const int w = session.image.width(), h = session.image.height();
    const RegionMask region = rasterize(event.shape, w, h);

    RoundRecord rec;
    rec.event = event;
    if (event.round == 1) {
        if (event.point) throw ProtocolError("round 1 takes no point");
        if (!(event.speed > 0.0)) throw ParameterError("round 1 speed a1 must be > 0");
        require_region(region, "round 1");
        session.phi = init_lsf(region);
        session.velocity = build_first_velocity(region, event.speed);
        session.interested = region;
        const double in = static_cast<double>(area(region));
        rec.k = (static_cast<double>(region.size()) - in) / in;
    } else {
        if (!event.point) throw ProtocolError("round " + std::to_string(event.round) + " needs a point");
        if (!(event.speed >= 0.0) || !std::isfinite(event.speed)) throw ParameterError("round speed must be >= 0");
        const Pixel p = *event.point;
        if (!session.phi.contains(p.x, p.y)) throw ProtocolError("point lies outside the image");
        rec.pre_checksum = checksum(session.phi);
        const double v = session.phi(p.x, p.y);
        if (v == 0.0) {
            throw AmbiguityError("ambiguous point: phi is exactly 0 at (" + std::to_string(p.x) + ", " +
                                     std::to_string(p.y) + ")",
                                 p.x, p.y);
        }
        rec.point_sign = v < 0.0 ? -1 : 1;
        for (std::size_t i = 0; i < region.size() && !rec.overlaps_interest; ++i)
            rec.overlaps_interest = region[i] && session.interested[i];
        session.phi = reconstitute(session.phi, region, p);
        session.velocity = patch_velocity(session.velocity, region, rec.point_sign, event.speed);
        session.interested = mask_union(session.interested, region);
        const double in = static_cast<double>(area(region));
        rec.k = (static_cast<double>(region.size()) - in) / in;
    }

    const int n = event.steps.value_or(session.params.steps_per_round);
    RunResult r = run(StepInputs{session.image, session.phi, session.velocity, session.interested, session.params}, n,
                      progress);
    session.phi = std::move(r.phi);
    rec.diagnostics = std::move(r.diagnostics);
    rec.post_checksum = checksum(session.phi);
    session.history.push_back(std::move(rec));
    return session;
}

SessionState run_more_steps(SessionState session, const StepsRequest& req, const ProgressFn& progress,
                            std::vector<StepDiagnostics>* diagnostics) {
    if (!session.started()) throw ProtocolError("no round applied yet; submit round 1 first");
    if (req.n < 0) throw ProtocolError("step count must be >= 0");
    SolverParams params = session.params;
    if (req.dt) {
        params.dt = *req.dt;
        params.validate();
    }
    RunResult r = run(StepInputs{session.image, session.phi, session.velocity, session.interested, params}, req.n,
                      progress);
    session.phi = std::move(r.phi);
    if (diagnostics) *diagnostics = std::move(r.diagnostics);
    return session;
}

SessionState apply_entry(SessionState session, const ScriptEntry& entry, const ProgressFn& progress,
                         std::vector<StepDiagnostics>* diagnostics) {
    if (const auto* ev = std::get_if<InteractionEvent>(&entry)) {
        session = apply_interaction(std::move(session), *ev, progress);
        if (diagnostics) *diagnostics = session.history.back().diagnostics;
        return session;
    }
    return run_more_steps(std::move(session), std::get<StepsRequest>(entry), progress, diagnostics);
}

// ============================================================================
// JSON
// ============================================================================

Shape shape_from_json(const nlohmann::json& j) {
    try {
        if (!j.is_object()) throw ProtocolError("shape must be an object");
        Shape s;
        const std::string type = j.at("type").get<std::string>();
        if (type == "rect") {
            s.type = Shape::Type::kRect;
            s.x = j.at("x").get<double>();
            s.y = j.at("y").get<double>();
            s.width = j.at("width").get<double>();
            s.height = j.at("height").get<double>();
        } else if (type == "polygon") {
            s.type = Shape::Type::kPolygon;
            s.points = points_from_json(j);
        } else if (type == "scribble") {
            s.type = Shape::Type::kScribble;
            s.points = points_from_json(j);
            s.radius = j.value("radius", 3.0);
        } else {
            throw ProtocolError("unknown shape type '" + type + "' (expected rect|polygon|scribble)");
        }
        validate_shape(s);
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("malformed shape: ") + e.what());
    }
}

nlohmann::json shape_to_json(const Shape& s) {
    switch (s.type) {
        case Shape::Type::kRect:
            return {{"type", "rect"}, {"x", s.x}, {"y", s.y}, {"width", s.width}, {"height", s.height}};
        case Shape::Type::kPolygon:
            return {{"type", "polygon"}, {"points", points_to_json(s.points)}};
        case Shape::Type::kScribble:
            return {{"type", "scribble"}, {"points", points_to_json(s.points)}, {"radius", s.radius}};
    }
    return {};
}

InteractionEvent event_from_json(const nlohmann::json& j) {
    try {
        if (!j.is_object()) throw ProtocolError("event must be an object");
        InteractionEvent e;
        e.round = j.at("round").get<int>();
        e.shape = shape_from_json(j.at("shape"));
        if (j.contains("point") && !j["point"].is_null()) {
            const auto& p = j["point"];
            if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number_integer())
                throw ProtocolError("point must be an integer pixel [x, y]");
            e.point = Pixel{p[0].get<int>(), p[1].get<int>()};
        }
        e.speed = j.at("speed").get<double>();
        if (j.contains("steps") && !j["steps"].is_null()) e.steps = j["steps"].get<int>();
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw ProtocolError(std::string("malformed event: ") + ex.what());
    }
}

nlohmann::json event_to_json(const InteractionEvent& e) {
    nlohmann::json j{{"round", e.round}, {"shape", shape_to_json(e.shape)}, {"speed", e.speed}};
    if (e.point) j["point"] = {e.point->x, e.point->y};
    if (e.steps) j["steps"] = *e.steps;
    return j;
}

ScriptEntry entry_from_json(const nlohmann::json& j) {
    if (j.is_object() && j.value("type", std::string()) == "steps") {
        try {
            StepsRequest r;
            r.n = j.at("n").get<int>();
            if (j.contains("dt") && !j["dt"].is_null()) r.dt = j["dt"].get<double>();
            return r;
        } catch (const nlohmann::json::exception& ex) {
            throw ProtocolError(std::string("malformed steps entry: ") + ex.what());
        }
    }
    return event_from_json(j);
}

nlohmann::json entry_to_json(const ScriptEntry& e) {
    if (const auto* ev = std::get_if<InteractionEvent>(&e)) return event_to_json(*ev);
    const auto& r = std::get<StepsRequest>(e);
    nlohmann::json j{{"type", "steps"}, {"n", r.n}};
    if (r.dt) j["dt"] = *r.dt;
    return j;
}

std::vector<ScriptEntry> script_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw ProtocolError("script must be a JSON array");
    std::vector<ScriptEntry> out;
    for (const auto& e : j) out.push_back(entry_from_json(e));
    return out;
}

nlohmann::json script_to_json(const std::vector<ScriptEntry>& script) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& e : script) a.push_back(entry_to_json(e));
    return a;
}

std::string checksum_hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

nlohmann::json round_summary_json(const RoundRecord& r) {
    nlohmann::json j{{"round", r.event.round},
                     {"event", event_to_json(r.event)},
                     {"pre_checksum", checksum_hex(r.pre_checksum)},
                     {"post_checksum", checksum_hex(r.post_checksum)},
                     {"k", r.k},
                     {"steps", r.diagnostics.size()}};
    if (r.event.round > 1) {
        j["point_sign"] = r.point_sign;
        j["overlaps_interest"] = r.overlaps_interest;
    }
    if (!r.diagnostics.empty()) j["final"] = to_json(r.diagnostics.back());
    return j;
}

}  // namespace silsm
