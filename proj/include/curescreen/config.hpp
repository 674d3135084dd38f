#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "curescreen/diagnostics.hpp"
#include "curescreen/model.hpp"
#include "curescreen/sampler.hpp"
#include "curescreen/simulator.hpp"

namespace curescreen {

using json = nlohmann::json;

// Invalid configuration; the message starts with the JSON path of the offending value.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline constexpr int kSchemaVersion = 1;
// Age at which the eligibility clock starts; --max-age sets the span from it.
inline constexpr double kEligibilityStartAge = 50.0;

struct SimulateConfig {
    Scenario scenario = named_scenario("LT1-NLS1");
    std::uint64_t seed = 1;
    int threads = 1;
};

struct FitConfig {
    std::optional<std::filesystem::path> dataset;
    ModelConfig model;
    PriorConfig priors = PriorConfig::defaults(2);
    ChainConfig chain;
    GridSpec grid;
    double hazard_bin_width = 1.0;
};

struct StudyConfig {
    std::vector<Scenario> scenarios{named_scenario("LT1-NLS1")};
    int replicates = 20;
    std::uint64_t seed = 1;
    ChainConfig chain = [] {
        ChainConfig c;
        c.n_chains = 1;  // one chain per replicate
        return c;
    }();
    ModelConfig model;  // ell follows each scenario
    int threads = 1;
    // Use the true values as estimates instead of fitting; checks the plumbing.
    bool inject_truth = false;
};

struct CurvesConfig {
    GridSpec grid;
};

// Command-line overrides; unset members leave the configuration alone.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<int> chains;
    std::optional<int> iterations;
    std::optional<int> burn_in;
    std::optional<int> thin;
    std::optional<int> ell;
    std::optional<std::string> truncate_lag;  // years or "none"
    std::optional<double> max_age;
};

// Parses a JSON document (with line and column in syntax errors).
json parse_json_text(const std::string& text, const std::string& source);

// Each parser checks schema_version, rejects unknown keys and validates the
// result. An empty document yields the defaults.
SimulateConfig parse_simulate_config(const json& doc);
FitConfig parse_fit_config(const json& doc);
StudyConfig parse_study_config(const json& doc);
CurvesConfig parse_curves_config(const json& doc);

void apply(const Overrides& o, SimulateConfig& c);
void apply(const Overrides& o, FitConfig& c);
void apply(const Overrides& o, StudyConfig& c);

// Effective configuration with every default spelled out.
json to_json(const SimulateConfig& c);
json to_json(const FitConfig& c);
json to_json(const StudyConfig& c);
json to_json(const CurvesConfig& c);
json to_json(const ModelConfig& m);
json to_json(const ChainConfig& c);
json to_json(const Scenario& s);
json to_json(const GridSpec& g);

ModelConfig model_from_json(const json& j);
GridSpec grid_from_json(const json& j);

// 64-bit FNV-1a, printed as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace curescreen
