#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "curescreen/model.hpp"
#include "curescreen/sampler.hpp"

namespace curescreen {

// Raised when a diagnostic is undefined for its input.
class DiagnosticError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Type-7 (linear interpolation) sample quantile, p in [0, 1].
double quantile(std::vector<double> values, double p);

struct ParameterSummary {
    std::string name;
    double median = 0.0;
    double lower = 0.0;  // 2.5%
    double upper = 0.0;  // 97.5%
    double mean = 0.0;
    double sd = 0.0;
    std::size_t draws = 0;
};

struct PosteriorSummary {
    std::vector<ParameterSummary> parameters;

    const ParameterSummary& at(const std::string& name) const;
};

PosteriorSummary summarize(const ChainOutput& chain);
// Draws of all chains pooled; every chain must share the column layout.
PosteriorSummary summarize(const std::vector<ChainOutput>& chains);

// Spectral density at frequency zero from a Bartlett lag window with
// truncation max(1, floor(0.04 n)).
double spectral_density_zero(std::span<const double> values);

// Geweke z comparing the first frac_a and the last frac_b of the chain.
double geweke(std::span<const double> values, double frac_a = 0.1, double frac_b = 0.5);

// Classic potential scale reduction factor over equal-length chains.
double gelman_rubin(const std::vector<std::vector<double>>& chains);

struct ConvergenceRow {
    std::string name;
    std::vector<std::optional<double>> geweke_z;  // per chain; empty when undefined
    std::optional<double> rhat;
};

// Geweke per chain and R-hat across chains for every column. Columns that
// are constant (frozen blocks) get no statistic instead of an error.
std::vector<ConvergenceRow> convergence_report(const std::vector<ChainOutput>& chains);

// Rebuilds the sampled parameters of one stored draw (eta is left empty).
ParameterState state_from_draw(const ChainOutput& chain, std::size_t row, const ModelConfig& model);

// --- Survival curves -------------------------------------------------------

struct CurvePoint {
    double time1 = 0.0;
    std::optional<double> time2;
    double value = 0.0;
};

struct CurveGrid {
    std::string kind;
    std::vector<CurvePoint> points;
};

struct GridSpec {
    double t_max = 10.0;
    double t_step = 0.25;
    double contour_max = 5.0;
    double contour_step = 0.25;
    // Covariate rows for population curves under the logit theta link.
    std::vector<std::vector<double>> theta_covariates;
    // Lag covariate row for the log lag link; zeros when empty.
    std::vector<double> lag_covariates;

    void validate(const ModelConfig& model) const;
    std::vector<double> times() const;
};

// Curves at one parameter point:
//   population[x=..]  P(no screening within t of becoming due), theta-weighted
//   marginal_k        k-th lag, theta-weighted over categories (ell >= 2)
//   conditional_j_k   lag k among subjects with j lifetime screenings
//   contour_2         joint survival of the two lags given two screenings
std::vector<CurveGrid> survival_grids(const ParameterState& state, const ModelConfig& model, const GridSpec& spec);

// Pointwise 2.5%, 50% and 97.5% of every curve across the stored draws,
// emitted as <kind>_lower, <kind>_median and <kind>_upper.
std::vector<CurveGrid> survival_bands(const std::vector<ChainOutput>& chains, const ModelConfig& model,
                                      const GridSpec& spec, std::size_t max_draws = 2000);

// --- Empirical hazard --------------------------------------------------------

struct Exposure {
    double start = 0.0;
    double stop = 0.0;
    bool event = false;  // event at `stop`
};

struct HazardBin {
    double lo = 0.0;
    double hi = 0.0;
    double events = 0.0;
    double person_time = 0.0;
    double hazard = 0.0;  // events / person_time, 0 when nobody is at risk
};

// Unsmoothed occurrence/exposure rate on bins of width `width` over [0, t_max).
std::vector<HazardBin> empirical_hazard(const std::vector<Exposure>& exposures, double width, double t_max);

}  // namespace curescreen
