#include "curescreen/trajectory.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace curescreen {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string describe(const SubjectRecord& record) { return "subject '" + record.id + "'"; }

double nonnegative(double v) { return v < 0.0 ? 0.0 : v; }

// Integral over [lo, hi], split at an interior kink so the adaptive rule sees
// two smooth pieces.
template <class F>
double integrate_split(F&& f, double lo, double hi, double kink, const QuadratureSpec& quad) {
    if (!(hi > lo)) return 0.0;
    Integrand g = std::forward<F>(f);
    if (kink > lo && kink < hi) return integrate_1d(g, lo, kink, quad) + integrate_1d(g, kink, hi, quad);
    return integrate_1d(g, lo, hi, quad);
}

struct Window {
    double entry;
    double exit;
    double refractory;
    double cap;  // max lag, +inf if untruncated
};

bool feasible_one(const TrajectoryCase& c, const SubjectRecord& r, const Window& w) {
    if (c.observed == 1) return r.screenings[0] <= w.cap;
    if (c.before == 1) return w.entry > 0.0;
    return w.exit < w.cap;
}

// Integration ranges for the two-lag cases, shared by the feasibility check
// and the probability so the two can never disagree.
struct Range {
    double lo;
    double hi;
    bool empty() const { return !(hi > lo); }
};

Range before_then_observed(const SubjectRecord& r, const Window& w) {
    double room = r.screenings[0] - w.refractory;
    return {std::max(0.0, room - w.cap), std::min({w.entry, room, w.cap})};
}

Range before_and_after(const Window& w) {
    return {std::max(0.0, w.exit - w.refractory - w.cap), std::min(w.entry, w.cap)};
}

bool feasible_two(const TrajectoryCase& c, const SubjectRecord& r, const Window& w) {
    const auto& t = r.screenings;
    if (c.observed == 2) {
        double second = t[1] - t[0] - w.refractory;
        return t[0] <= w.cap && second >= 0.0 && second <= w.cap;
    }
    if (c.observed == 1) {
        if (c.before == 0) return t[0] <= w.cap && w.exit - t[0] - w.refractory < w.cap;
        return !before_then_observed(r, w).empty();
    }
    if (c.before == 2) return w.entry - w.refractory > 0.0;
    if (c.after == 2) return w.exit < w.cap;
    return !before_and_after(w).empty();
}

Window window_of(const SubjectRecord& record, const EligibilityTimeline& timeline) {
    return {record.entry_time, record.exit_time, timeline.refractory_years, timeline.max_lag()};
}

}  // namespace

void EligibilityTimeline::validate() const {
    if (!(refractory_years > 0.0)) throw std::invalid_argument("refractory_years must be positive");
    if (max_lag_years && !(*max_lag_years > 0.0)) throw std::invalid_argument("max_lag_years must be positive");
    if (!(eligibility_length > 0.0)) throw std::invalid_argument("eligibility_length must be positive");
    if (!(study_length > 0.0)) throw std::invalid_argument("study_length must be positive");
}

double EligibilityTimeline::max_lag() const { return max_lag_years ? *max_lag_years : kInf; }

void validate_record(const SubjectRecord& record, const EligibilityTimeline& timeline) {
    auto fail = [&](const std::string& why) { throw std::invalid_argument(describe(record) + ": " + why); };
    if (!std::isfinite(record.entry_time) || !std::isfinite(record.exit_time)) fail("non-finite window");
    if (record.entry_time < 0.0) fail("entry_time must be nonnegative");
    if (!(record.entry_time < record.exit_time)) fail("entry_time must precede exit_time");
    if (record.exit_time > timeline.eligibility_length + 1e-9) fail("exit_time exceeds the eligibility length");
    double previous = -kInf;
    for (double t : record.screenings) {
        if (!std::isfinite(t)) fail("non-finite screening time");
        if (t < record.entry_time || t > record.exit_time) fail("screening outside the observation window");
        if (!(t - previous > timeline.refractory_years)) fail("screenings closer than the refractory period");
        previous = t;
    }
}

std::vector<LatentPlacement> TrajectoryCase::pattern() const {
    std::vector<LatentPlacement> out;
    out.insert(out.end(), before, LatentPlacement::before_entry);
    out.insert(out.end(), observed, LatentPlacement::observed);
    out.insert(out.end(), after, LatentPlacement::after_exit);
    return out;
}

std::vector<TrajectoryCase> enumerate_placements(const SubjectRecord& record, const EligibilityTimeline& timeline,
                                                 int ell) {
    if (ell < 1 || ell > 2)
        throw std::invalid_argument("trajectory enumeration supports ell of 1 or 2 lifetime screenings");
    validate_record(record, timeline);
    const int k = static_cast<int>(record.observed_count());
    if (k > ell) throw std::invalid_argument(describe(record) + ": more observed screenings than ell");
    const Window w = window_of(record, timeline);

    std::vector<TrajectoryCase> out;
    if (k == 0) out.push_back({0, 0, 0, 0, true});
    for (int m = std::max(k, 1); m <= ell; ++m) {
        for (int before = 0; before <= m - k; ++before) {
            TrajectoryCase c{m, before, k, m - k - before, true};
            c.feasible = m == 1 ? feasible_one(c, record, w) : feasible_two(c, record, w);
            out.push_back(c);
        }
    }
    return out;
}

std::vector<TrajectoryCase> enumerate_cases(const SubjectRecord& record, const EligibilityTimeline& timeline,
                                            int ell) {
    auto all = enumerate_placements(record, timeline, ell);
    std::erase_if(all, [](const TrajectoryCase& c) { return !c.feasible; });
    return all;
}

double case_probability(const TrajectoryCase& c, const SubjectRecord& record, const EligibilityTimeline& timeline,
                        const FrailtySurvival& law, const QuadratureSpec& quad) {
    if (!c.feasible) throw std::invalid_argument("case_probability called on an infeasible case");
    if (c.m == 0) return 1.0;
    if (static_cast<int>(law.dimension()) != c.m)
        throw std::invalid_argument("lag law dimension does not match the case");
    if (c.observed != static_cast<int>(record.observed_count()))
        throw std::invalid_argument("case does not match the record's observed count");

    const Window w = window_of(record, timeline);
    const auto& t = record.screenings;

    if (c.m == 1) {
        std::array<double, 1> y{};
        if (c.observed == 1) {
            y[0] = t[0];
            return law.truncated_neg_partial(y, 0);
        }
        if (c.before == 1) {
            y[0] = w.entry;
            return 1.0 - law.truncated_survival(y);
        }
        y[0] = w.exit;
        return law.truncated_survival(y);
    }
    if (c.m != 2) throw std::invalid_argument("case probabilities are implemented for m <= 2");

    const double cap2 = law.lags()[1].upper();
    if (c.observed == 2) {
        std::array<double, 2> y{t[0], nonnegative(t[1] - t[0] - w.refractory)};
        return law.truncated_density(y);
    }
    if (c.observed == 1 && c.before == 0) {
        std::array<double, 2> y{t[0], nonnegative(w.exit - t[0] - w.refractory)};
        return law.truncated_neg_partial(y, 0);
    }
    if (c.observed == 1) {
        // First lag unseen before entry; the second is pinned by the observed
        // screening: y2 = t1 - refractory - y1.
        const double room = t[0] - w.refractory;
        const Range range = before_then_observed(record, w);
        auto integrand = [&](double y1) {
            std::array<double, 2> y{y1, nonnegative(room - y1)};
            return law.truncated_density(y);
        };
        return integrate_split(integrand, range.lo, range.hi, kInf, quad);
    }
    if (c.after == 2) {
        std::array<double, 2> y{w.exit, 0.0};
        return law.truncated_survival(y);
    }
    // Where the second lag is pinned at zero the integrand is -dS/dy1 along a
    // constant y2, so that stretch integrates exactly to a survival difference.
    // This also removes the y1^(alpha - 1) endpoint singularity.
    auto along_zero = [&](double a, double b) {
        if (!(b > a)) return 0.0;
        std::array<double, 2> lo{a, 0.0}, hi{b, 0.0};
        return law.truncated_survival(lo) - law.truncated_survival(hi);
    };
    if (c.before == 2) {
        // Both screenings before entry: y1 + refractory + y2 < entry.
        const double room = w.entry - w.refractory;
        const double hi = std::min(room, law.lags()[0].upper());
        auto integrand = [&](double y1) {
            std::array<double, 2> beyond{y1, nonnegative(room - y1)};
            return law.truncated_neg_partial(beyond, 0);
        };
        return std::max(0.0, along_zero(0.0, hi) - integrate_split(integrand, 0.0, hi, room - cap2, quad));
    }
    // One before entry, one after exit.
    const double reach = w.exit - w.refractory;
    const Range range = before_and_after(w);
    auto integrand = [&](double y1) {
        std::array<double, 2> y{y1, reach - y1};
        return law.truncated_neg_partial(y, 0);
    };
    const double kink = std::clamp(reach, range.lo, std::max(range.lo, range.hi));
    return integrate_split(integrand, range.lo, kink, kInf, quad) + along_zero(kink, range.hi);
}

double log_case_probability(const TrajectoryCase& c, const SubjectRecord& record,
                            const EligibilityTimeline& timeline, const FrailtySurvival& law,
                            const QuadratureSpec& quad) {
    if (c.m == 2 && c.observed == 2 && !law.truncated()) {
        const auto& t = record.screenings;
        std::array<double, 2> y{t[0], nonnegative(t[1] - t[0] - timeline.refractory_years)};
        return law.log_full_density(y);
    }
    double p = case_probability(c, record, timeline, law, quad);
    return p > 0.0 ? std::log(p) : -kInf;
}

FrailtySurvival category_law(std::span<const double> rates, double alpha, const EligibilityTimeline& timeline) {
    std::vector<LagDistribution> lags;
    lags.reserve(rates.size());
    for (double rate : rates) lags.push_back({rate, timeline.max_lag_years});
    return FrailtySurvival(std::move(lags), rates.size() == 1 ? 1.0 : alpha);
}

}  // namespace curescreen
