#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "curescreen/likelihood.hpp"
#include "curescreen/random.hpp"
#include "curescreen/trajectory.hpp"

namespace curescreen {

// Distribution of one boundary of the observation window.
//   none     entry at 0 / exit at the end of eligibility
//   fixed    always `lo`
//   uniform  always censored, uniform on (lo, hi)
//   mixture  censored with probability `censored_fraction`, then uniform on (lo, hi)
struct BoundaryDistribution {
    enum class Kind { none, fixed, uniform, mixture };
    Kind kind = Kind::none;
    double lo = 0.0;
    double hi = 0.0;
    double censored_fraction = 0.0;
};

std::string to_string(BoundaryDistribution::Kind kind);
BoundaryDistribution::Kind parse_boundary_kind(const std::string& name);

struct CensoringModel {
    BoundaryDistribution entry;
    BoundaryDistribution exit;
    // Target (left %, right %) the constants were calibrated to; informational.
    std::optional<std::array<double, 2>> targets;

    // Mechanism calibrated to roughly 50% left- and 40% right-censored
    // subjects, with about 40% having an observed screening and 15% two, under
    // the LT1 x NLS1 design with a 40-year eligibility span.
    static CensoringModel calibrated_default(const EligibilityTimeline& timeline);
    static CensoringModel uncensored();
    static CensoringModel fixed_window(double entry, double exit);

    void validate(const EligibilityTimeline& timeline) const;
};

// What happens to a lag drawn beyond the maximum lag support.
enum class TruncationMode {
    renormalize,  // redraw the subject's lag vector until every lag is inside the support
    discard       // the screening never happens (nor any later one)
};

std::string to_string(TruncationMode mode);
TruncationMode parse_truncation_mode(const std::string& name);

// Single binary covariate on theta: with probability `prevalence` a subject
// carries x = 1 and draws M from `theta_when_set` instead of the scenario theta.
struct BinaryThetaCovariate {
    double prevalence = 0.5;
    std::vector<double> theta_when_set;
};

struct Scenario {
    std::string name;
    std::vector<double> theta;                // length ell + 1
    std::vector<std::vector<double>> lambda;  // lambda[j-1] holds j rates
    double alpha = 0.9;
    EligibilityTimeline timeline;
    int n_subjects = 1000;
    CensoringModel censoring;
    TruncationMode truncation_mode = TruncationMode::renormalize;
    std::optional<BinaryThetaCovariate> covariate;

    int ell() const { return static_cast<int>(theta.size()) - 1; }
    void validate() const;
};

// LT1..LT3 crossed with NLS1..NLS2, e.g. "LT2-NLS1".
Scenario named_scenario(const std::string& name);
std::vector<std::string> scenario_grid_names();

struct TrueTrajectory {
    int m_drawn = 0;
    int m_realized = 0;
    std::vector<double> lag_times;
    std::vector<double> screening_times;
};

struct SimulatedSubject {
    TrueTrajectory truth;
    SubjectRecord record;
};

struct SimulatedDataset {
    Dataset records;
    std::vector<TrueTrajectory> truth;
};

// Positive stable variate via the Chambers-Mallows-Stuck construction.
double draw_frailty_stable(double alpha, Rng& rng);

// Lifetime trajectory for one subject, before any censoring.
TrueTrajectory draw_trajectory(const Scenario& scenario, int m, Rng& rng);

// Observation window [entry, exit] drawn from the censoring model.
std::array<double, 2> draw_window(const CensoringModel& censoring, const EligibilityTimeline& timeline, Rng& rng);

// The record seen through [entry, exit].
SubjectRecord observe(const TrueTrajectory& truth, double entry, double exit, std::string id);

// Subject `index` of a dataset generated with `seed`. Trajectory, censoring
// and covariate draws use separate streams, so the true trajectory does not
// depend on the censoring model.
SimulatedSubject generate_subject(const Scenario& scenario, std::uint64_t seed, std::size_t index);

SimulatedDataset generate_dataset(const Scenario& scenario, std::uint64_t seed, int threads = 1);

std::string subject_id(std::size_t index);

}  // namespace curescreen
