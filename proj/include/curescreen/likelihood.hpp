#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "curescreen/model.hpp"
#include "curescreen/trajectory.hpp"

namespace curescreen {

using Dataset = std::vector<SubjectRecord>;

// Raised when a likelihood term is not finite; names the subject.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Theta for one subject, length ell + 1, resolved through the configured link.
std::vector<double> subject_theta(const ParameterState& state, const ModelConfig& config,
                                  const SubjectRecord& record);
std::vector<double> subject_log_theta(const ParameterState& state, const ModelConfig& config,
                                      const SubjectRecord& record);

// Lag rates of category j (1-based) for one subject.
std::vector<double> subject_rates(const ParameterState& state, const ModelConfig& config,
                                  const SubjectRecord& record, int j);

FrailtySurvival subject_law(const ParameterState& state, const ModelConfig& config, const SubjectRecord& record,
                            int j);

// A record together with its feasible cases grouped by lifetime count.
struct PreparedSubject {
    const SubjectRecord* record = nullptr;
    std::vector<std::vector<TrajectoryCase>> cases_by_m;  // index m = 0..ell

    bool has_category(int m) const { return !cases_by_m[m].empty(); }
};

PreparedSubject prepare_subject(const SubjectRecord& record, const ModelConfig& config);

// p_ij: sum of the case probabilities with m = j (1 for j = 0 when no
// screening was observed, 0 for categories with no feasible case).
double category_probability(const PreparedSubject& subject, int j, const FrailtySurvival& law,
                            const ModelConfig& config);

// p_i0..p_i,ell under `state`.
std::vector<double> category_probabilities(const PreparedSubject& subject, const ParameterState& state,
                                           const ModelConfig& config);

// eta_ij proportional to theta_ij p_ij over the feasible categories.
EtaWeights normalize_eta(const std::vector<double>& log_theta, const std::vector<double>& probabilities,
                         const std::string& subject_id);
EtaWeights expected_eta(const SubjectRecord& record, const ModelConfig& config, const ParameterState& state);

// Complete-data log likelihood, sum_i sum_j eta_ij (log theta_ij + log p_ij),
// with state.eta supplying the weights.
double log_likelihood(const Dataset& dataset, const ParameterState& state, const ModelConfig& config);

// Checks every record and that each admits at least one feasible case.
// Throws std::invalid_argument listing the offending records.
void validate_dataset(const Dataset& dataset, const ModelConfig& config);

}  // namespace curescreen
