#include "silsm/evolution.hpp"

#include <cmath>
#include <sstream>

namespace silsm {

namespace {

constexpr double kTinyWeight = 1e-9;

void require_finite_nonneg(double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0) throw ParameterError(std::string(name) + " must be finite and >= 0");
}

void require_shape(const ScalarGrid& a, const ScalarGrid& b, const char* what) {
    if (!a.same_shape(b)) throw ParameterError(std::string(what) + ": dimension mismatch");
}

const char* to_string(MeanFallback f) {
    switch (f) {
        case MeanFallback::kWholeComplement: return "whole_complement";
        case MeanFallback::kForegroundMean: return "foreground_mean";
        default: return "none";
    }
}

}  // namespace

const char* to_string(MeanScope scope) {
    return scope == MeanScope::kWholeDomain ? "whole" : "interested";
}

MeanScope mean_scope_from_string(const std::string& s) {
    if (s == "interested") return MeanScope::kInterested;
    if (s == "whole") return MeanScope::kWholeDomain;
    throw ParameterError("unknown c1_scope '" + s + "' (expected interested|whole)");
}

void SolverParams::validate() const {
    require_finite_nonneg(lambda1, "lambda1");
    require_finite_nonneg(lambda2, "lambda2");
    require_finite_nonneg(mu, "mu");
    require_finite_nonneg(alpha, "alpha");
    if (!std::isfinite(dt) || dt <= 0.0) throw ParameterError("dt must be finite and > 0");
    if (!std::isfinite(eps) || eps <= 0.0) throw ParameterError("eps must be finite and > 0");
    if (steps_per_round < 1) throw ParameterError("steps_per_round must be >= 1");
    if (!(blowup_bound > 0.0)) throw ParameterError("blowup_bound must be > 0");
}

void to_json(nlohmann::json& j, const SolverParams& p) {
    j = nlohmann::json{{"lambda1", p.lambda1},
                       {"lambda2", p.lambda2},
                       {"mu", p.mu},
                       {"alpha", p.alpha},
                       {"dt", p.dt},
                       {"steps_per_round", p.steps_per_round},
                       {"eps", p.eps},
                       {"blowup_bound", p.blowup_bound},
                       {"c1_scope", to_string(p.c1_scope)},
                       {"scheme", to_string(p.scheme)}};
}

void from_json(const nlohmann::json& j, SolverParams& p) {
    if (!j.is_object()) throw ParameterError("solver params must be a JSON object");
    try {
        for (auto it = j.begin(); it != j.end(); ++it) {
            const std::string& k = it.key();
            const auto& v = it.value();
            if (k == "lambda1") p.lambda1 = v.get<double>();
            else if (k == "lambda2") p.lambda2 = v.get<double>();
            else if (k == "mu") p.mu = v.get<double>();
            else if (k == "alpha") p.alpha = v.get<double>();
            else if (k == "dt") p.dt = v.get<double>();
            else if (k == "steps_per_round") p.steps_per_round = v.get<int>();
            else if (k == "eps") p.eps = v.get<double>();
            else if (k == "blowup_bound") p.blowup_bound = v.get<double>();
            else if (k == "c1_scope") p.c1_scope = mean_scope_from_string(v.get<std::string>());
            else if (k == "scheme") {
                const auto s = v.get<std::string>();
                if (s == "central") p.scheme = GradientScheme::kCentral;
                else if (s == "upwind") p.scheme = GradientScheme::kUpwind;
                else throw ParameterError("unknown scheme '" + s + "'");
            } else {
                throw ParameterError("unknown solver parameter '" + k + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("bad solver parameter: ") + e.what());
    }
}

RegionMeans compute_region_means(const GrayImage& image, const LevelSetField& phi, const RegionMask& interested,
                                 double eps, MeanScope c1_scope) {
    require_shape(image, phi, "compute_region_means");
    if (!interested.same_shape(image)) throw ParameterError("compute_region_means: mask dimension mismatch");
    if (area(interested) == 0) throw ProtocolError("region of interest is empty; apply a first round before evolving");

    double fg_num = 0.0, fg_den = 0.0;          // H-weighted over the c1 scope
    double fg_all_num = 0.0, fg_all_den = 0.0;  // H-weighted over the whole domain
    double bg_num = 0.0, bg_den = 0.0;          // (1-H)-weighted over interested
    double bg_all_num = 0.0, bg_all_den = 0.0;  // (1-H)-weighted over the whole domain
    for (std::size_t i = 0; i < phi.size(); ++i) {
        const double h = heaviside_eps(phi[i], eps);
        const double v = image[i];
        fg_all_num += h * v;
        fg_all_den += h;
        bg_all_num += (1.0 - h) * v;
        bg_all_den += 1.0 - h;
        if (interested[i]) {
            bg_num += (1.0 - h) * v;
            bg_den += 1.0 - h;
            if (c1_scope == MeanScope::kInterested) {
                fg_num += h * v;
                fg_den += h;
            }
        }
    }
    if (c1_scope == MeanScope::kWholeDomain) {
        fg_num = fg_all_num;
        fg_den = fg_all_den;
    }

    RegionMeans m;
    if (fg_den >= kTinyWeight) m.c1 = fg_num / fg_den;
    else if (fg_all_den >= kTinyWeight) m.c1 = fg_all_num / fg_all_den;
    else m.c1 = bg_all_num / bg_all_den;

    if (bg_den >= kTinyWeight) {
        m.c2 = bg_num / bg_den;
    } else if (bg_all_den >= kTinyWeight) {
        m.c2 = bg_all_num / bg_all_den;
        m.fallback = MeanFallback::kWholeComplement;
    } else {
        m.c2 = m.c1;
        m.fallback = MeanFallback::kForegroundMean;
    }
    return m;
}

ScalarGrid segmentation_velocity(const GrayImage& image, const LevelSetField& phi, const RegionMeans& means,
                                 const SolverParams& params) {
    require_shape(image, phi, "segmentation_velocity");
    ScalarGrid out(phi.width(), phi.height());
    for (std::size_t i = 0; i < phi.size(); ++i) {
        const double r1 = image[i] - means.c1;
        const double r2 = image[i] - means.c2;
        out[i] = -dirac_eps(phi[i], params.eps) * (params.lambda1 * r1 * r1 - params.lambda2 * r2 * r2);
    }
    return out;
}

ScalarGrid mbe_velocity(const LevelSetField& phi, const SolverParams& params) {
    ScalarGrid out(phi.width(), phi.height());
    if (params.mu == 0.0) return out;
    const ScalarGrid bih = biharmonic(phi);
    const ScalarGrid flux = div_flux(phi);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = params.mu * (-params.alpha * bih[i] + flux[i]);
    return out;
}

ScalarGrid interaction_velocity(const LevelSetField& phi, const VelocityField& velocity, GradientScheme scheme) {
    require_shape(phi, velocity, "interaction_velocity");
    ScalarGrid g = scheme == GradientScheme::kUpwind ? grad_mag_upwind(phi, velocity) : grad_mag(phi);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= velocity[i];
    return g;
}

double signed_distance_drift(const LevelSetField& phi, double band) {
    const ScalarGrid g = grad_mag(phi);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        if (std::abs(phi[i]) < band) {
            sum += std::abs(g[i] - 1.0);
            ++n;
        }
    }
    return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

nlohmann::json to_json(const StepDiagnostics& d) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    nlohmann::json j{{"step", d.step}, {"max_delta", num(d.max_delta)}, {"drift", num(d.drift)},
                     {"c1", num(d.c1)},  {"c2", num(d.c2)}};
    if (d.fallback != MeanFallback::kNone) j["c2_fallback"] = to_string(d.fallback);
    return j;
}

std::string to_json_line(const StepDiagnostics& d) { return to_json(d).dump(); }

LevelSetField step(const StepInputs& in, StepDiagnostics* diag, const InteractionTerm& term) {
    require_shape(in.image, in.phi, "step");
    require_shape(in.phi, in.velocity, "step");
    const RegionMeans means =
        compute_region_means(in.image, in.phi, in.interested, in.params.eps, in.params.c1_scope);

    // All three terms read the same phi^n.
    const ScalarGrid seg = segmentation_velocity(in.image, in.phi, means, in.params);
    const ScalarGrid mbe = mbe_velocity(in.phi, in.params);
    const ScalarGrid inter = term ? term(in.phi) : interaction_velocity(in.phi, in.velocity, in.params.scheme);
    require_shape(in.phi, inter, "interaction term");

    LevelSetField next(in.phi.width(), in.phi.height());
    double max_delta = 0.0;
    bool finite = true;
    double max_phi = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) {
        const double delta = in.params.dt * (seg[i] + mbe[i] + inter[i]);
        next[i] = in.phi[i] + delta;
        if (!std::isfinite(next[i])) finite = false;
        max_delta = std::max(max_delta, std::abs(delta));
        max_phi = std::max(max_phi, std::abs(next[i]));
    }
    if (!finite) throw DivergenceError("evolution produced a non-finite value", 0);
    if (max_phi > in.params.blowup_bound) {
        std::ostringstream os;
        os << "evolution diverged: max|phi| = " << max_phi << " exceeds bound " << in.params.blowup_bound;
        throw DivergenceError(os.str(), 0);
    }
    if (diag) {
        diag->max_delta = max_delta;
        diag->drift = signed_distance_drift(next);
        diag->c1 = means.c1;
        diag->c2 = means.c2;
        diag->fallback = means.fallback;
    }
    return next;
}

RunResult run(const StepInputs& in, int n, const ProgressFn& progress, const InteractionTerm& term) {
    if (n < 0) throw ParameterError("run: step count must be >= 0");
    RunResult result{in.phi, {}};
    result.diagnostics.reserve(static_cast<std::size_t>(n));
    for (int k = 1; k <= n; ++k) {
        StepDiagnostics d;
        d.step = k;
        try {
            result.phi = step(StepInputs{in.image, result.phi, in.velocity, in.interested, in.params}, &d, term);
        } catch (const DivergenceError& e) {
            throw DivergenceError(std::string(e.what()) + " at step " + std::to_string(k), k);
        }
        result.diagnostics.push_back(d);
        if (progress) progress(d);
    }
    return result;
}

}  // namespace silsm
