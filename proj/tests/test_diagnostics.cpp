#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "curescreen/diagnostics.hpp"
#include "curescreen/frailty.hpp"

using namespace curescreen;

namespace {

std::vector<double> normal_draws(std::size_t n, std::uint64_t seed, double mean = 0.0) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> d(mean, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = d(gen);
    return v;
}

ModelConfig two_lag_model() {
    ModelConfig m;
    m.ell = 2;
    return m;
}

ParameterState two_lag_state(double alpha) {
    auto st = ParameterState::neutral(2);
    st.theta = {0.2, 0.3, 0.5};
    st.lambda = {{0.4}, {0.3, 0.6}};
    st.alpha = alpha;
    return st;
}

const CurveGrid& find_curve(const std::vector<CurveGrid>& grids, const std::string& kind) {
    for (const auto& g : grids)
        if (g.kind == kind) return g;
    FAIL("missing curve " << kind);
    return grids.front();
}

double value_at(const CurveGrid& g, double t1, std::optional<double> t2 = std::nullopt) {
    for (const auto& p : g.points)
        if (std::abs(p.time1 - t1) < 1e-12 && (!t2 || std::abs(*p.time2 - *t2) < 1e-12)) return p.value;
    FAIL("no point at " << t1);
    return 0.0;
}

// Chain of one column holding the given values.
ChainOutput single_column(const std::string& name, const std::vector<double>& values) {
    ChainOutput c;
    c.parameter_names = {name};
    for (double v : values) c.draws.push_back({v});
    return c;
}

}  // namespace

TEST_CASE("quantiles interpolate linearly between order statistics") {
    std::vector<double> v(10000);
    for (int i = 0; i < 10000; ++i) v[i] = i + 1.0;
    CHECK(quantile(v, 0.5) == doctest::Approx(5000.5).epsilon(1e-12));
    CHECK(quantile(v, 0.025) == doctest::Approx(250.975).epsilon(1e-12));
    CHECK(quantile(v, 0.975) == doctest::Approx(9750.025).epsilon(1e-12));
    CHECK(quantile({3.0}, 0.3) == 3.0);
    CHECK_THROWS_AS(quantile({}, 0.5), DiagnosticError);
    CHECK_THROWS_AS(quantile({1.0}, 1.5), DiagnosticError);

    auto s = summarize(single_column("x", v)).at("x");
    CHECK(s.median == doctest::Approx(5000.5));
    CHECK(s.lower == doctest::Approx(250.975));
    CHECK(s.upper == doctest::Approx(9750.025));
    CHECK(s.draws == 10000);
}

TEST_CASE("a constant chain summarizes to a point") {
    auto s = summarize(single_column("x", std::vector<double>(500, 2.5))).at("x");
    CHECK(s.median == 2.5);
    CHECK(s.lower == 2.5);
    CHECK(s.upper == 2.5);
    CHECK(s.sd == 0.0);
    CHECK_THROWS_AS(summarize(ChainOutput{}), DiagnosticError);
}

TEST_CASE("normal draws give the familiar interval") {
    auto s = summarize(single_column("z", normal_draws(1000000, 7))).at("z");
    CHECK(std::abs(s.lower + 1.959964) < 0.02);
    CHECK(std::abs(s.upper - 1.959964) < 0.02);
    CHECK(std::abs(s.median) < 0.01);
    CHECK(std::abs(s.sd - 1.0) < 0.01);
}

TEST_CASE("pooled summaries use every chain") {
    auto a = single_column("x", {1, 2, 3});
    auto b = single_column("x", {4, 5});
    CHECK(summarize(std::vector<ChainOutput>{a, b}).at("x").median == 3.0);
    auto c = single_column("y", {1});
    CHECK_THROWS_AS(summarize(std::vector<ChainOutput>{a, c}), DiagnosticError);
}

TEST_CASE("spectral density of white noise is its variance") {
    auto v = normal_draws(100000, 3);
    CHECK(spectral_density_zero(v) == doctest::Approx(1.0).epsilon(0.05));
    // AR(1) with phi = 0.5 has S(0) = 1 / (1 - phi)^2 for unit innovations.
    std::vector<double> ar(v.size());
    ar[0] = v[0];
    for (std::size_t t = 1; t < v.size(); ++t) ar[t] = 0.5 * ar[t - 1] + v[t];
    CHECK(spectral_density_zero(ar) == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("Geweke z is approximately standard normal under stationarity") {
    int inside = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        double z = geweke(normal_draws(10000, 1000 + rep));
        if (std::abs(z) < 3.0) ++inside;
    }
    CHECK(inside >= 990);
}

TEST_CASE("Geweke detects a level shift and rejects degenerate chains") {
    auto v = normal_draws(10000, 11);
    for (std::size_t t = 0; t < 1000; ++t) v[t] += 5.0;
    CHECK(std::abs(geweke(v)) > 10.0);
    CHECK_THROWS_AS(geweke(std::vector<double>(10000, 1.0)), DiagnosticError);
    CHECK_THROWS_AS(geweke(std::vector<double>(50, 1.0)), DiagnosticError);
    CHECK_THROWS_AS(geweke(v, 0.6, 0.5), DiagnosticError);
}

TEST_CASE("potential scale reduction") {
    auto base = normal_draws(5000, 21);
    CHECK(gelman_rubin({base, base}) == doctest::Approx(1.0).epsilon(1e-3));

    std::vector<std::vector<double>> iid;
    for (int c = 0; c < 4; ++c) iid.push_back(normal_draws(5000, 30 + c));
    CHECK(gelman_rubin(iid) < 1.05);

    CHECK(gelman_rubin({normal_draws(5000, 40, 0.0), normal_draws(5000, 41, 10.0)}) > 1.5);

    CHECK_THROWS_AS(gelman_rubin({base}), DiagnosticError);
    CHECK_THROWS_AS(gelman_rubin({base, normal_draws(100, 1)}), DiagnosticError);
    CHECK_THROWS_AS(gelman_rubin({std::vector<double>(100, 1.0), std::vector<double>(100, 1.0)}), DiagnosticError);
}

TEST_CASE("convergence report skips frozen columns") {
    ChainOutput a, b;
    a.parameter_names = b.parameter_names = {"moving", "frozen"};
    auto va = normal_draws(1000, 5), vb = normal_draws(1000, 6);
    for (int i = 0; i < 1000; ++i) {
        a.draws.push_back({va[i], 1.0});
        b.draws.push_back({vb[i], 1.0});
    }
    auto report = convergence_report({a, b});
    REQUIRE(report.size() == 2);
    CHECK(report[0].rhat.has_value());
    CHECK(report[0].geweke_z[0].has_value());
    CHECK_FALSE(report[1].rhat.has_value());
    CHECK_FALSE(report[1].geweke_z[1].has_value());
}

TEST_CASE("draws round-trip through the flattened layout") {
    auto model = two_lag_model();
    auto st = two_lag_state(0.7);
    st.gamma = {1.0, 2.0, 3.0};
    st.kappa[1][1] = {2.5, 0.75};
    st.tau = {1.5, 3.0};
    ChainOutput c;
    c.parameter_names = parameter_names(model, 0, 0);
    c.draws.push_back(flatten(st, model));
    auto back = state_from_draw(c, 0, model);
    CHECK(back.theta == st.theta);
    CHECK(back.gamma == st.gamma);
    CHECK(back.lambda == st.lambda);
    CHECK(back.kappa[1][1].shape == 2.5);
    CHECK(back.kappa[1][1].scale == 0.75);
    CHECK(back.alpha == 0.7);
    CHECK(back.tau[1] == 3.0);
    CHECK_THROWS_AS(state_from_draw(c, 1, model), DiagnosticError);
}

TEST_CASE("survival curves start at one, stay in range and decrease") {
    auto model = two_lag_model();
    GridSpec spec;
    for (double alpha : {0.4, 0.8, 1.0}) {
        auto grids = survival_grids(two_lag_state(alpha), model, spec);
        for (const auto& g : grids) {
            if (g.kind == "contour_2") {
                CHECK(value_at(g, 0.0, 0.0) == doctest::Approx(1.0));
                continue;
            }
            CHECK(g.points.front().value == doctest::Approx(1.0));
            for (std::size_t i = 0; i < g.points.size(); ++i) {
                CHECK(g.points[i].value >= 0.0);
                CHECK(g.points[i].value <= 1.0);
                if (i) CHECK(g.points[i].value <= g.points[i - 1].value + 1e-12);
            }
        }
        // Joint survival decreases in both arguments.
        const auto& c = find_curve(grids, "contour_2");
        CHECK(value_at(c, 2.0, 1.0) <= value_at(c, 1.0, 1.0));
        CHECK(value_at(c, 1.0, 2.0) <= value_at(c, 1.0, 1.0));
    }
}

TEST_CASE("independent lags give a product contour and truncated exponential marginals") {
    auto model = two_lag_model();
    auto st = two_lag_state(1.0);
    auto grids = survival_grids(st, model, GridSpec{});
    const auto& contour = find_curve(grids, "contour_2");
    const auto& c21 = find_curve(grids, "conditional_2_1");
    const auto& c22 = find_curve(grids, "conditional_2_2");
    for (double y1 : {0.0, 1.25, 3.0, 5.0})
        for (double y2 : {0.0, 0.5, 4.75})
            CHECK(value_at(contour, y1, y2) == doctest::Approx(value_at(c21, y1) * value_at(c22, y2)).epsilon(1e-10));

    LagDistribution first{0.3, 10.0};
    CHECK(value_at(c21, 5.0) == doctest::Approx(1.0 - lag_cdf(first, 5.0)).epsilon(1e-12));
    CHECK(value_at(c21, 10.0) == doctest::Approx(0.0));
}

TEST_CASE("mixture curves combine conditional curves with theta") {
    auto model = two_lag_model();
    auto st = two_lag_state(0.6);
    auto grids = survival_grids(st, model, GridSpec{});
    const auto& pop = find_curve(grids, "population");
    const auto& m2 = find_curve(grids, "marginal_2");
    for (double t : {0.5, 2.0, 7.5}) {
        double expect_pop = 0.2 + 0.3 * value_at(find_curve(grids, "conditional_1_1"), t) +
                            0.5 * value_at(find_curve(grids, "conditional_2_1"), t);
        CHECK(value_at(pop, t) == doctest::Approx(expect_pop).epsilon(1e-12));
        double expect_m2 = 0.5 + 0.5 * value_at(find_curve(grids, "conditional_2_2"), t);
        CHECK(value_at(m2, t) == doctest::Approx(expect_m2).epsilon(1e-12));
    }
    // The population curve never drops below the never-screened share.
    CHECK(pop.points.back().value >= 0.2 - 1e-12);
}

TEST_CASE("conditional curves ignore theta and marginal curves rise with the never-screened share") {
    auto model = two_lag_model();
    auto low = two_lag_state(0.7), high = two_lag_state(0.7);
    high.theta = {0.5, 0.2, 0.3};
    auto g_low = survival_grids(low, model, GridSpec{});
    auto g_high = survival_grids(high, model, GridSpec{});
    for (const std::string kind : {"conditional_1_1", "conditional_2_1", "conditional_2_2"}) {
        const auto& a = find_curve(g_low, kind);
        const auto& b = find_curve(g_high, kind);
        for (std::size_t i = 0; i < a.points.size(); ++i) CHECK(a.points[i].value == b.points[i].value);
    }
    const auto& a = find_curve(g_low, "marginal_1");
    const auto& b = find_curve(g_high, "marginal_1");
    for (std::size_t i = 0; i < a.points.size(); ++i) CHECK(b.points[i].value >= a.points[i].value - 1e-12);
}

TEST_CASE("grids outside the lag support are rejected") {
    auto model = two_lag_model();
    GridSpec spec;
    spec.t_max = 12.0;
    CHECK_THROWS_AS(survival_grids(two_lag_state(0.5), model, spec), DiagnosticError);
    spec = GridSpec{};
    spec.contour_max = 11.0;
    CHECK_THROWS_AS(spec.validate(model), DiagnosticError);
    spec = GridSpec{};
    spec.t_step = 0.0;
    CHECK_THROWS_AS(spec.validate(model), DiagnosticError);

    model.timeline.max_lag_years.reset();
    spec = GridSpec{};
    spec.t_max = 40.0;
    CHECK_NOTHROW(spec.validate(model));
}

TEST_CASE("grid times cover the range including the end point") {
    GridSpec spec;
    spec.t_max = 1.0;
    spec.t_step = 0.3;
    auto t = spec.times();
    REQUIRE(t.size() == 5);
    CHECK(t.front() == 0.0);
    CHECK(t.back() == 1.0);
    spec.t_step = 0.25;
    CHECK(spec.times().size() == 5);
}

TEST_CASE("logit theta gives one population curve per covariate row") {
    ModelConfig model;
    model.ell = 1;
    model.theta_link = ThetaLink::logit;
    auto st = ParameterState::neutral(1, 1, 0);
    st.beta = {{0.0, 1.0}};
    st.lambda = {{0.5}};
    GridSpec spec;
    spec.theta_covariates = {{0.0}, {2.0}};
    auto grids = survival_grids(st, model, spec);
    const auto& g0 = find_curve(grids, "population[x=0]");
    const auto& g2 = find_curve(grids, "population[x=2]");
    const auto& cond = find_curve(grids, "conditional_1_1");
    double p0 = 0.5, p2 = 1.0 / (1.0 + std::exp(-2.0));
    for (double t : {1.0, 4.0}) {
        CHECK(value_at(g0, t) == doctest::Approx(1 - p0 + p0 * value_at(cond, t)));
        CHECK(value_at(g2, t) == doctest::Approx(1 - p2 + p2 * value_at(cond, t)));
    }
}

TEST_CASE("survival bands bracket the median and collapse for a fixed draw") {
    auto model = two_lag_model();
    ChainOutput c;
    c.parameter_names = parameter_names(model, 0, 0);
    for (int i = 0; i < 20; ++i) {
        auto st = two_lag_state(0.5 + 0.02 * i);
        st.lambda[1][0] = 0.2 + 0.01 * i;
        c.draws.push_back(flatten(st, model));
    }
    GridSpec spec;
    spec.t_step = 1.0;
    spec.contour_step = 1.0;
    auto bands = survival_bands({c}, model, spec);
    const auto& lo = find_curve(bands, "conditional_2_1_lower");
    const auto& md = find_curve(bands, "conditional_2_1_median");
    const auto& hi = find_curve(bands, "conditional_2_1_upper");
    for (std::size_t i = 0; i < md.points.size(); ++i) {
        CHECK(lo.points[i].value <= md.points[i].value);
        CHECK(md.points[i].value <= hi.points[i].value);
    }
    CHECK(hi.points[3].value > lo.points[3].value);

    ChainOutput fixed;
    fixed.parameter_names = c.parameter_names;
    fixed.draws.assign(5, c.draws.front());
    auto flat = survival_bands({fixed}, model, spec);
    const auto& a = find_curve(flat, "contour_2_lower");
    const auto& b = find_curve(flat, "contour_2_upper");
    for (std::size_t i = 0; i < a.points.size(); ++i) CHECK(a.points[i].value == b.points[i].value);
    CHECK_THROWS_AS(survival_bands({ChainOutput{}}, model, spec), DiagnosticError);
}

TEST_CASE("empirical hazard divides events by person time") {
    std::vector<Exposure> e{{0.0, 2.5, true}, {0.0, 4.0, false}, {1.0, 1.5, true}, {3.0, 10.0, true}};
    auto bins = empirical_hazard(e, 1.0, 5.0);
    REQUIRE(bins.size() == 5);
    // [0,1): two subjects at risk for 1 year each, no events.
    CHECK(bins[0].person_time == doctest::Approx(2.0));
    CHECK(bins[0].hazard == 0.0);
    // [1,2): three at risk, the third only for half a year, one event.
    CHECK(bins[1].person_time == doctest::Approx(2.5));
    CHECK(bins[1].events == 1.0);
    CHECK(bins[1].hazard == doctest::Approx(0.4));
    CHECK(bins[2].events == 1.0);
    CHECK(bins[2].person_time == doctest::Approx(1.5));
    CHECK(bins[4].person_time == doctest::Approx(1.0));
    CHECK(bins[4].events == 0.0);  // event at 10 falls beyond the range

    // Constant-rate data: the estimate recovers the rate.
    std::mt19937_64 gen(4);
    std::exponential_distribution<double> d(0.3);
    std::vector<Exposure> sim;
    for (int i = 0; i < 20000; ++i) {
        double t = d(gen);
        sim.push_back({0.0, std::min(t, 20.0), t < 20.0});
    }
    for (const auto& b : empirical_hazard(sim, 2.0, 6.0)) CHECK(b.hazard == doctest::Approx(0.3).epsilon(0.05));

    CHECK_THROWS_AS(empirical_hazard(e, 0.0, 5.0), DiagnosticError);
    CHECK_THROWS_AS(empirical_hazard({{2.0, 1.0, false}}, 1.0, 5.0), DiagnosticError);
}
