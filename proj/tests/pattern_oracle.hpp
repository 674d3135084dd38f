#pragma once

// Observation-pattern probabilities for a fixed window, obtained by
// integrating the library's case probabilities over the observed screening
// times, and the matching empirical frequencies from the simulator.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "curescreen/likelihood.hpp"
#include "curescreen/simulator.hpp"

namespace pattern {

// 0: nothing seen; 1: one screening in the first half of the window;
// 2: one screening in the second half; 3: two screenings.
inline constexpr int kClasses = 4;

inline int classify(const curescreen::SubjectRecord& r) {
    if (r.screenings.empty()) return 0;
    if (r.screenings.size() == 2) return 3;
    double mid = 0.5 * (r.entry_time + r.exit_time);
    return r.screenings[0] < mid ? 1 : 2;
}

struct Setup {
    curescreen::Scenario scenario;
    double entry;
    double exit;
};

inline curescreen::ParameterState truth_state(const curescreen::Scenario& s) {
    auto state = curescreen::ParameterState::neutral(s.ell());
    state.theta = s.theta;
    state.lambda = s.lambda;
    state.alpha = s.alpha;
    return state;
}

// Mixture density of the record under theta and the scenario's lag laws.
inline double record_density(const curescreen::SubjectRecord& r, const curescreen::Scenario& s,
                             const curescreen::ModelConfig& config) {
    auto state = truth_state(s);
    auto prepared = curescreen::prepare_subject(r, config);
    auto p = curescreen::category_probabilities(prepared, state, config);
    double total = 0.0;
    for (int j = 0; j <= s.ell(); ++j) total += s.theta[j] * p[j];
    return total;
}

inline double integrate_pieces(const curescreen::Integrand& f, double lo, double hi, std::vector<double> cuts,
                               const curescreen::QuadratureSpec& quad) {
    cuts.push_back(lo);
    cuts.push_back(hi);
    std::sort(cuts.begin(), cuts.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        double a = std::max(cuts[i], lo), b = std::min(cuts[i + 1], hi);
        if (b > a) total += curescreen::integrate_1d(f, a, b, quad);
    }
    return total;
}

inline std::array<double, kClasses> probabilities(const Setup& setup) {
    using namespace curescreen;
    const auto& s = setup.scenario;
    ModelConfig config;
    config.ell = s.ell();
    config.timeline = s.timeline;
    // Accuracy needed is far below the binomial error of the simulated
    // frequencies, so moderate tolerances suffice.
    QuadratureSpec outer;
    outer.abs_tol = 1e-8;
    outer.rel_tol = 1e-6;
    QuadratureSpec inner_rule;
    inner_rule.abs_tol = 1e-9;
    inner_rule.rel_tol = 1e-7;
    config.quad.abs_tol = 1e-10;

    const double a = setup.entry, b = setup.exit, mid = 0.5 * (a + b);
    const double cap = s.timeline.max_lag(), gap = s.timeline.refractory_years;
    std::vector<double> cuts{cap, b - gap - cap, b - gap, gap, gap + cap, a + gap, a + gap + cap, mid};

    auto record = [&](std::vector<double> times) {
        SubjectRecord r;
        r.id = "oracle";
        r.entry_time = a;
        r.exit_time = b;
        r.screenings = std::move(times);
        return r;
    };

    std::array<double, kClasses> out{};
    out[0] = record_density(record({}), s, config);
    Integrand one = [&](double t) { return record_density(record({t}), s, config); };
    out[1] = integrate_pieces(one, a, mid, cuts, outer);
    out[2] = integrate_pieces(one, mid, b, cuts, outer);
    if (s.ell() == 2 && b - a > gap) {
        Integrand two = [&](double t1) {
            double lo = t1 + gap, hi = std::min(b, t1 + gap + cap);
            if (!(hi > lo)) return 0.0;
            // t2 = lo + (hi - lo) w^4 tames the density's growth near the
            // corner where both lags vanish.
            const double floor = lo + 1e-10;  // keep the gap strictly above refractory
            Integrand inner = [&](double w) {
                double w3 = w * w * w;
                double t2 = std::max(lo + (hi - lo) * w3 * w, floor);
                return 4.0 * (hi - lo) * w3 * record_density(record({t1, t2}), s, config);
            };
            return integrate_1d(inner, 0.0, 1.0, inner_rule);
        };
        out[3] = integrate_pieces(two, a, std::min(b - gap, cap), cuts, outer);
    }
    return out;
}

inline std::array<double, kClasses> frequencies(const Setup& setup, int n, std::uint64_t seed) {
    using namespace curescreen;
    Scenario s = setup.scenario;
    s.censoring = CensoringModel::fixed_window(setup.entry, setup.exit);
    s.n_subjects = n;
    auto data = generate_dataset(s, seed);
    std::array<double, kClasses> out{};
    for (const auto& r : data.records) out[classify(r)] += 1.0;
    for (double& v : out) v /= n;
    return out;
}

}  // namespace pattern
