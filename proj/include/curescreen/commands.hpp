#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "curescreen/config.hpp"
#include "curescreen/study.hpp"

namespace curescreen {

inline constexpr const char* kVersion = "1.0.0";

// What every command records in its manifest besides its own outputs.
struct RunInfo {
    std::string config_path;     // empty when built-in defaults were used
    bool record_timing = false;  // wall-clock fields break byte-identical reruns
};

// Each command writes into `out` (created if needed) and finishes with
// manifest.json. Errors propagate as exceptions.
void cmd_simulate(const SimulateConfig& config, const std::filesystem::path& out, const RunInfo& info);

void cmd_fit(const FitConfig& config, const std::filesystem::path& out, const RunInfo& info);

// Progress lines go to `log` when given. Returns the scored report.
StudyReport cmd_study(const StudyConfig& config, const std::filesystem::path& out, const RunInfo& info,
                      std::ostream* log = nullptr);

void cmd_curves(const std::filesystem::path& fit_dir, const CurvesConfig& config, const std::filesystem::path& out,
                const RunInfo& info);

// Full command line, as run by the curescreen binary. Returns the exit code:
// 0 success, 1 configuration or input error, 2 numerical failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace curescreen
