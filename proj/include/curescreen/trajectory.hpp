#pragma once

#include <optional>
#include <string>
#include <vector>

#include "curescreen/frailty.hpp"
#include "curescreen/quadrature.hpp"

namespace curescreen {

// One individual's observation window on the eligibility clock (years since
// first becoming due) and the screenings seen inside it.
struct SubjectRecord {
    std::string id;
    double entry_time = 0.0;  // 0 when not left-censored
    double exit_time = 0.0;   // eligibility end when not right-censored
    std::vector<double> screenings;
    std::vector<double> covariates_theta;
    std::vector<double> covariates_lag;

    std::size_t observed_count() const { return screenings.size(); }
};

struct EligibilityTimeline {
    double refractory_years = 10.0;
    std::optional<double> max_lag_years = 10.0;
    double eligibility_length = 40.0;
    double study_length = 25.0;

    void validate() const;
    double max_lag() const;  // +inf when lags are untruncated
};

// Throws std::invalid_argument describing the first violated invariant.
void validate_record(const SubjectRecord& record, const EligibilityTimeline& timeline);

enum class LatentPlacement { before_entry, observed, after_exit };

// A hypothesis about the lifetime count m and where the unseen screenings
// fall. Screenings are time ordered, so the pattern is always `before`
// latent screenings, then the observed block, then `after` latent ones.
struct TrajectoryCase {
    int m = 0;
    int before = 0;
    int observed = 0;
    int after = 0;
    bool feasible = true;

    std::vector<LatentPlacement> pattern() const;
    bool operator==(const TrajectoryCase&) const = default;
};

// Every (m, before, after) split for m in [k, ell], flagged for feasibility.
std::vector<TrajectoryCase> enumerate_placements(const SubjectRecord& record, const EligibilityTimeline& timeline,
                                                 int ell);

// The feasible subset of enumerate_placements.
std::vector<TrajectoryCase> enumerate_cases(const SubjectRecord& record, const EligibilityTimeline& timeline,
                                            int ell);

// Probability (density in the observed times) of the record under the case,
// given M = case.m. `law` describes the m lags; ignored when m = 0.
double case_probability(const TrajectoryCase& trajectory, const SubjectRecord& record,
                        const EligibilityTimeline& timeline, const FrailtySurvival& law,
                        const QuadratureSpec& quad = {});

double log_case_probability(const TrajectoryCase& trajectory, const SubjectRecord& record,
                            const EligibilityTimeline& timeline, const FrailtySurvival& law,
                            const QuadratureSpec& quad = {});

// Lag law for subjects with exactly `count` lifetime screenings. A single
// screening carries no within-subject dependence, so alpha is forced to 1.
FrailtySurvival category_law(std::span<const double> rates, double alpha, const EligibilityTimeline& timeline);

}  // namespace curescreen
