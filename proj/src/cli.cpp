#include "silsm/cli.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#include "silsm/contour.hpp"
#include "silsm/image_io.hpp"
#include "silsm/interaction.hpp"
#include "silsm/metrics.hpp"
#include "silsm/validation.hpp"

namespace silsm {

namespace fs = std::filesystem;

int cmd_segment(const RunManifest& m, std::ostream& err) {
    SolverParams params;
    try {
        from_json(m.param_overrides, params);
        params.validate();
        if (m.snapshot_every < 0) throw ParameterError("--snapshot-every must be >= 0");
    } catch (const ParameterError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }

    GrayImage image;
    std::optional<RegionMask> gt;
    std::vector<ScriptEntry> script;
    try {
        image = read_image(m.image);
        if (m.ground_truth) gt = read_mask(*m.ground_truth);
        const Bytes sb = read_file(m.script);
        nlohmann::json sj;
        try {
            sj = nlohmann::json::parse(sb.begin(), sb.end());
        } catch (const nlohmann::json::exception& e) {
            throw DecodeError("script is not valid JSON: " + std::string(e.what()));
        }
        script = script_from_json(sj);
    } catch (const DecodeError& e) {
        err << "decode error: " << e.what() << "\n";
        return kExitDecode;
    } catch (const ProtocolError& e) {
        err << "protocol error: " << e.what() << "\n";
        return kExitProtocol;
    }
    try {
        validate_image(image);
        if (gt && !gt->same_shape(image)) throw ParameterError("ground truth dimensions differ from the image");
        if (gt && area(*gt) == 0) throw ParameterError("ground truth mask is empty");
    } catch (const ParameterError& e) {
        err << "decode error: " << e.what() << "\n";
        return kExitDecode;
    }

    // Everything is computed in memory; files are written only after success.
    std::ostringstream diag_lines;
    std::vector<std::pair<std::string, Bytes>> snapshots;
    std::vector<MetricReport> trajectory;
    std::vector<int> trajectory_rounds;
    SessionState state(image, params);
    long long global_step = 0;
    try {
        for (std::size_t i = 0; i < script.size(); ++i) {
            const int round_now = static_cast<int>(state.history.size()) +
                                  (std::holds_alternative<InteractionEvent>(script[i]) ? 1 : 0);
            std::vector<StepDiagnostics> diags;
            state = apply_entry(std::move(state), script[i], {}, &diags);
            for (const auto& d : diags) {
                ++global_step;
                nlohmann::json j = to_json(d);
                j["entry"] = i;
                j["round"] = round_now;
                diag_lines << j.dump() << "\n";
            }
            if (m.snapshot_every > 0 && !diags.empty()) {
                // Snapshots are taken at entry boundaries whose cumulative step count crosses a multiple.
                const long long before = global_step - static_cast<long long>(diags.size());
                if (global_step / m.snapshot_every != before / m.snapshot_every)
                    snapshots.emplace_back("phi_step" + std::to_string(global_step) + ".snap",
                                           encode_snapshot(state.phi));
            }
            if (gt && state.started()) {
                trajectory.push_back(evaluate(foreground_mask(state.phi), *gt));
                trajectory_rounds.push_back(static_cast<int>(state.history.size()));
            }
        }
    } catch (const DivergenceError& e) {
        err << "divergence: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const ProtocolError& e) {
        err << "protocol error: " << e.what() << "\n";
        return kExitProtocol;
    } catch (const ParameterError& e) {
        err << "protocol error: " << e.what() << "\n";
        return kExitProtocol;
    }
    if (!state.started()) {
        err << "protocol error: script contains no interaction round\n";
        return kExitProtocol;
    }

    try {
        fs::create_directories(m.out);
        const RegionMask fg = foreground_mask(state.phi);
        write_file(m.out / "mask.png", encode_mask_png(fg));
        write_file(m.out / "contours.json", contours_to_json(extract_contours(state.phi)).dump(2) + "\n");
        write_file(m.out / "overlay.png", encode_png_rgb(render_overlay(image, fg, state.interested)));
        write_file(m.out / "diagnostics.jsonl", diag_lines.str());
        write_file(m.out / "phi.snap", encode_snapshot(state.phi));
        for (const auto& [name, bytes] : snapshots) write_file(m.out / name, bytes);
        if (gt) {
            nlohmann::json mj = to_json(trajectory.back());
            mj["rounds"] = state.history.size();
            write_file(m.out / "metrics.json", mj.dump(2) + "\n");
            std::string csv = metrics_csv_header() + "\n";
            for (std::size_t i = 0; i < trajectory.size(); ++i)
                csv += metrics_csv_row(trajectory_rounds[i], trajectory[i]) + "\n";
            write_file(m.out / "metrics.csv", csv);
        }
    } catch (const std::exception& e) {
        err << "error writing outputs: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

int cmd_validate(const std::string& selector, const std::optional<fs::path>& report_path, std::ostream& out,
                 std::ostream& err) {
    std::vector<ExperimentReport> reports;
    try {
        reports = run_experiments(selector);
    } catch (const ParameterError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "experiment error: " << e.what() << "\n";
        return kExitValidation;
    }
    bool all_pass = true;
    nlohmann::json doc{{"selector", selector}, {"experiments", nlohmann::json::array()}};
    for (const auto& r : reports) {
        all_pass = all_pass && r.pass();
        doc["experiments"].push_back(to_json(r));
        err << (r.pass() ? "PASS " : "FAIL ") << r.name << "\n";
    }
    doc["status"] = all_pass ? "PASS" : "FAIL";
    if (report_path) {
        try {
            if (report_path->has_parent_path()) fs::create_directories(report_path->parent_path());
            write_file(*report_path, doc.dump(2) + "\n");
        } catch (const std::exception& e) {
            err << "error writing report: " << e.what() << "\n";
            return kExitRuntime;
        }
    } else {
        out << doc.dump(2) << "\n";
    }
    return all_pass ? kExitOk : kExitValidation;
}

}  // namespace silsm
