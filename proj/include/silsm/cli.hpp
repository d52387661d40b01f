#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "json.hpp"

#include "silsm/evolution.hpp"

namespace silsm {

enum ExitCode : int {
    kExitOk = 0,
    kExitRuntime = 1,
    kExitUsage = 2,
    kExitDecode = 3,
    kExitProtocol = 4,
    kExitDivergence = 5,
    kExitValidation = 6,
};

struct RunManifest {
    std::filesystem::path image;
    std::filesystem::path script;
    std::filesystem::path out;
    std::optional<std::filesystem::path> ground_truth;
    nlohmann::json param_overrides = nlohmann::json::object();
    int snapshot_every = 0;
};

/// Replays the script on the image and writes mask.png, contours.json, overlay.png,
/// diagnostics.jsonl, phi.snap and, with ground truth, metrics.json and metrics.csv.
int cmd_segment(const RunManifest& manifest, std::ostream& err);

/// Runs the selected experiments; writes the JSON report to report_path or to out.
int cmd_validate(const std::string& selector, const std::optional<std::filesystem::path>& report_path,
                 std::ostream& out, std::ostream& err);

}  // namespace silsm
