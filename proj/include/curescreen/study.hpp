#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "curescreen/config.hpp"

namespace curescreen {

// Columns scored by the study: theta_j, the median lags and alpha (ell = 2).
std::vector<std::string> study_parameters(int ell);

// True values of study_parameters for a scenario. Median lags are the
// medians of the truncated frailty marginals, as reported by the sampler.
std::vector<double> study_truth(const Scenario& scenario);

struct ReplicateResult {
    std::size_t scenario = 0;
    int replicate = 0;
    std::uint64_t data_seed = 0;
    std::uint64_t chain_seed = 0;
    bool ok = false;
    std::string error;
    std::vector<double> estimates;  // posterior medians, empty on failure
};

struct BiasRmse {
    double bias = 0.0;
    double rmse = 0.0;
    int count = 0;
};

BiasRmse bias_rmse(const std::vector<double>& estimates, double truth);

struct StudyCell {
    std::string scenario;
    std::string parameter;
    double truth = 0.0;
    int ok = 0;
    int failed = 0;
    BiasRmse score;
};

struct StudyReport {
    std::vector<std::string> scenario_names;
    std::vector<ReplicateResult> replicates;
    std::vector<StudyCell> cells;
};

std::uint64_t replicate_seed(std::uint64_t seed, std::size_t scenario, int replicate);

ReplicateResult run_replicate(const StudyConfig& config, std::size_t scenario, int replicate, int threads);

// Every scenario x replicate, `threads` replicates at a time. on_result sees
// each result in (scenario, replicate) order as soon as its batch finishes.
// Failed replicates are kept with their error and excluded from the scores.
StudyReport replicate_study(const StudyConfig& config,
                            const std::function<void(const ReplicateResult&)>& on_result = {});

StudyReport score_study(const StudyConfig& config, std::vector<ReplicateResult> results);

// Table layout: rows grouped by screening-count scenario then parameter,
// a bias and an RMSE column per lag-time scenario, and pooled totals. When a
// name does not follow the LTa-NLSb pattern, every scenario gets its own column.
std::string study_table_csv(const StudyConfig& config, const StudyReport& report);
std::string study_cells_csv(const StudyReport& report);
std::string replicate_csv_header(const StudyConfig& config);
std::string replicate_csv_row(const StudyConfig& config, const ReplicateResult& r);

}  // namespace curescreen
