#include "curescreen/simulator.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "curescreen/parallel.hpp"

namespace curescreen {

std::string to_string(BoundaryDistribution::Kind kind) {
    switch (kind) {
    case BoundaryDistribution::Kind::none: return "none";
    case BoundaryDistribution::Kind::fixed: return "fixed";
    case BoundaryDistribution::Kind::uniform: return "uniform";
    case BoundaryDistribution::Kind::mixture: return "mixture";
    }
    return "none";
}

BoundaryDistribution::Kind parse_boundary_kind(const std::string& name) {
    if (name == "none") return BoundaryDistribution::Kind::none;
    if (name == "fixed") return BoundaryDistribution::Kind::fixed;
    if (name == "uniform") return BoundaryDistribution::Kind::uniform;
    if (name == "mixture") return BoundaryDistribution::Kind::mixture;
    throw std::invalid_argument("unknown boundary distribution '" + name + "'");
}

CensoringModel CensoringModel::calibrated_default(const EligibilityTimeline& timeline) {
    CensoringModel c;
    const double end = timeline.eligibility_length;
    c.entry = {BoundaryDistribution::Kind::mixture, 0.0, 0.85 * end, 0.5};
    c.exit = {BoundaryDistribution::Kind::mixture, 0.05 * end, end, 0.4};
    c.targets = std::array<double, 2>{50.0, 40.0};
    return c;
}

CensoringModel CensoringModel::uncensored() { return {}; }

CensoringModel CensoringModel::fixed_window(double entry, double exit) {
    CensoringModel c;
    c.entry = {BoundaryDistribution::Kind::fixed, entry, entry, 1.0};
    c.exit = {BoundaryDistribution::Kind::fixed, exit, exit, 1.0};
    return c;
}

void CensoringModel::validate(const EligibilityTimeline& timeline) const {
    const double end = timeline.eligibility_length;
    auto check = [&](const BoundaryDistribution& b, const char* which) {
        using K = BoundaryDistribution::Kind;
        std::string w = which;
        if (b.kind == K::none) return;
        if (b.lo < 0.0 || b.hi > end || (b.kind != K::fixed && !(b.lo < b.hi)))
            throw std::invalid_argument(w + " window must satisfy 0 <= lo < hi <= eligibility length");
        if (b.kind == K::mixture && !(b.censored_fraction >= 0.0 && b.censored_fraction <= 1.0))
            throw std::invalid_argument(w + " censored_fraction must lie in [0, 1]");
    };
    check(entry, "entry");
    check(exit, "exit");
    double max_entry = entry.kind == BoundaryDistribution::Kind::none ? 0.0 : std::max(entry.lo, entry.hi);
    double max_exit = exit.kind == BoundaryDistribution::Kind::none ? end
                      : exit.kind == BoundaryDistribution::Kind::mixture ? end
                                                                          : exit.hi;
    if (!(max_entry < max_exit)) throw std::invalid_argument("entry can reach or pass the exit time");
    if (exit.kind == BoundaryDistribution::Kind::fixed && entry.kind != BoundaryDistribution::Kind::none &&
        !(max_entry < exit.lo))
        throw std::invalid_argument("entry can reach or pass the fixed exit time");
}

std::string to_string(TruncationMode mode) { return mode == TruncationMode::renormalize ? "renormalize" : "discard"; }

TruncationMode parse_truncation_mode(const std::string& name) {
    if (name == "renormalize") return TruncationMode::renormalize;
    if (name == "discard") return TruncationMode::discard;
    throw std::invalid_argument("unknown truncation mode '" + name + "'");
}

void Scenario::validate() const {
    const int l = ell();
    if (l < 1 || l > 2) throw std::invalid_argument("scenario theta must have 2 or 3 entries");
    auto check_theta = [](const std::vector<double>& t) {
        double total = std::accumulate(t.begin(), t.end(), 0.0);
        if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("scenario theta must sum to 1");
        for (double v : t)
            if (!(v >= 0.0)) throw std::invalid_argument("scenario theta entries must be nonnegative");
    };
    check_theta(theta);
    if (static_cast<int>(lambda.size()) != l) throw std::invalid_argument("scenario needs one rate row per category");
    for (int j = 1; j <= l; ++j) {
        if (static_cast<int>(lambda[j - 1].size()) != j)
            throw std::invalid_argument("scenario rate row " + std::to_string(j) + " must hold " + std::to_string(j) +
                                        " rates");
        for (double r : lambda[j - 1])
            if (!(r > 0.0) || !std::isfinite(r)) throw std::invalid_argument("scenario rates must be positive");
    }
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("scenario alpha must lie in (0, 1]");
    if (n_subjects < 0) throw std::invalid_argument("n_subjects must be nonnegative");
    timeline.validate();
    censoring.validate(timeline);
    if (covariate) {
        if (covariate->theta_when_set.size() != theta.size())
            throw std::invalid_argument("covariate theta has the wrong length");
        check_theta(covariate->theta_when_set);
        if (!(covariate->prevalence >= 0.0 && covariate->prevalence <= 1.0))
            throw std::invalid_argument("covariate prevalence must lie in [0, 1]");
    }
}

Scenario named_scenario(const std::string& name) {
    auto dash = name.find('-');
    if (dash == std::string::npos) throw std::invalid_argument("unknown scenario '" + name + "'");
    std::string lt = name.substr(0, dash), nls = name.substr(dash + 1);
    Scenario s;
    s.name = name;
    if (lt == "LT1")
        s.lambda = {{0.02}, {0.70, 0.70}};
    else if (lt == "LT2")
        s.lambda = {{0.09}, {0.50, 1.05}};
    else if (lt == "LT3")
        s.lambda = {{0.35}, {0.50, 1.05}};
    else
        throw std::invalid_argument("unknown lag-time scenario '" + lt + "' in '" + name + "'");
    if (nls == "NLS1")
        s.theta = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    else if (nls == "NLS2")
        s.theta = {0.5, 0.25, 0.25};
    else
        throw std::invalid_argument("unknown screening-count scenario '" + nls + "' in '" + name + "'");
    s.alpha = 0.9;
    s.n_subjects = 1000;
    s.censoring = CensoringModel::calibrated_default(s.timeline);
    return s;
}

std::vector<std::string> scenario_grid_names() {
    std::vector<std::string> out;
    for (const char* nls : {"NLS1", "NLS2"})
        for (const char* lt : {"LT1", "LT2", "LT3"}) out.push_back(std::string(lt) + "-" + nls);
    return out;
}

double draw_frailty_stable(double alpha, Rng& rng) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("stable index must lie in (0, 1]");
    if (alpha == 1.0) return 1.0;
    double u = std::numbers::pi * uniform_open(rng);
    double w = exponential_draw(rng, 1.0);
    double left = std::sin(alpha * u) / std::pow(std::sin(u), 1.0 / alpha);
    double right = std::pow(std::sin((1.0 - alpha) * u) / w, (1.0 - alpha) / alpha);
    return left * right;
}

TrueTrajectory draw_trajectory(const Scenario& scenario, int m, Rng& rng) {
    TrueTrajectory out;
    out.m_drawn = m;
    if (m == 0) return out;
    const auto& rates = scenario.lambda[m - 1];
    const auto& tl = scenario.timeline;
    const double cap = tl.max_lag();
    const double alpha = m == 1 ? 1.0 : scenario.alpha;

    std::vector<double> lags(m);
    for (int attempt = 0;; ++attempt) {
        if (attempt > 1'000'000) throw std::runtime_error("lag rejection sampler failed to accept a draw");
        // Conditional on the frailty each lag has survival exp(-Z rate t).
        double z = draw_frailty_stable(alpha, rng);
        bool inside = true;
        for (int k = 0; k < m; ++k) {
            lags[k] = exponential_draw(rng, z * rates[k]);
            if (lags[k] > cap) inside = false;
        }
        if (inside || scenario.truncation_mode == TruncationMode::discard) break;
    }

    double due = 0.0;
    for (int k = 0; k < m; ++k) {
        if (lags[k] > cap) break;  // discard mode: this and later screenings never happen
        double when = due + lags[k];
        if (when > tl.eligibility_length) break;
        out.lag_times.push_back(lags[k]);
        out.screening_times.push_back(when);
        due = when + tl.refractory_years;
    }
    out.m_realized = static_cast<int>(out.screening_times.size());
    return out;
}

namespace {

double draw_boundary(const BoundaryDistribution& b, double uncensored, Rng& rng, double floor) {
    using K = BoundaryDistribution::Kind;
    switch (b.kind) {
    case K::none: return uncensored;
    case K::fixed: return b.lo;
    case K::uniform: {
        double lo = std::max(b.lo, floor);
        return lo + (b.hi - lo) * uniform_open(rng);
    }
    case K::mixture: {
        double u = uniform_open(rng);
        double v = uniform_open(rng);
        if (u >= b.censored_fraction) return uncensored;
        double lo = std::max(b.lo, floor);
        return lo + (b.hi - lo) * v;
    }
    }
    return uncensored;
}

}  // namespace

std::array<double, 2> draw_window(const CensoringModel& censoring, const EligibilityTimeline& timeline, Rng& rng) {
    double entry = draw_boundary(censoring.entry, 0.0, rng, 0.0);
    double exit = draw_boundary(censoring.exit, timeline.eligibility_length, rng, entry);
    return {entry, exit};
}

SubjectRecord observe(const TrueTrajectory& truth, double entry, double exit, std::string id) {
    SubjectRecord r;
    r.id = std::move(id);
    r.entry_time = entry;
    r.exit_time = exit;
    for (double t : truth.screening_times)
        if (t >= entry && t <= exit) r.screenings.push_back(t);
    return r;
}

std::string subject_id(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "S%07zu", index + 1);
    return buf;
}

SimulatedSubject generate_subject(const Scenario& scenario, std::uint64_t seed, std::size_t index) {
    Rng covariate_rng = make_stream(seed, index, 2);
    Rng trajectory_rng = make_stream(seed, index, 0);
    Rng censoring_rng = make_stream(seed, index, 1);

    const std::vector<double>* theta = &scenario.theta;
    std::vector<double> covariates;
    if (scenario.covariate) {
        bool set = uniform_open(covariate_rng) < scenario.covariate->prevalence;
        covariates.push_back(set ? 1.0 : 0.0);
        if (set) theta = &scenario.covariate->theta_when_set;
    }
    double u = uniform_open(trajectory_rng);
    int m = 0;
    double cumulative = 0.0;
    for (std::size_t j = 0; j < theta->size(); ++j) {
        cumulative += (*theta)[j];
        m = static_cast<int>(j);
        if (u < cumulative) break;
    }
    SimulatedSubject out;
    out.truth = draw_trajectory(scenario, m, trajectory_rng);
    auto window = draw_window(scenario.censoring, scenario.timeline, censoring_rng);
    out.record = observe(out.truth, window[0], window[1], subject_id(index));
    out.record.covariates_theta = std::move(covariates);
    return out;
}

SimulatedDataset generate_dataset(const Scenario& scenario, std::uint64_t seed, int threads) {
    scenario.validate();
    SimulatedDataset out;
    const auto n = static_cast<std::size_t>(scenario.n_subjects);
    out.records.resize(n);
    out.truth.resize(n);
    parallel_for(n, threads, [&](std::size_t i) {
        auto s = generate_subject(scenario, seed, i);
        out.records[i] = std::move(s.record);
        out.truth[i] = std::move(s.truth);
    });
    return out;
}

}  // namespace curescreen
