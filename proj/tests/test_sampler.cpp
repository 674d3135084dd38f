#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>
#include <numeric>

#include "curescreen/sampler.hpp"
#include "curescreen/simulator.hpp"
#include "oracles.hpp"

using namespace curescreen;

namespace {

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double var_of(const std::vector<double>& v) {
    double m = mean_of(v), s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / (v.size() - 1);
}

// Standard error of a correlated mean from non-overlapping batch means.
double batch_se(const std::vector<double>& v, int batches = 25) {
    const std::size_t size = v.size() / batches;
    std::vector<double> means;
    for (int b = 0; b < batches; ++b)
        means.push_back(std::accumulate(v.begin() + b * size, v.begin() + (b + 1) * size, 0.0) / size);
    return std::sqrt(var_of(means) / batches);
}

ChainConfig short_chain(int iterations, int burn_in, int thin = 1) {
    ChainConfig c;
    c.iterations = iterations;
    c.burn_in = burn_in;
    c.thin = thin;
    c.n_chains = 1;
    c.seed = 99;
    return c;
}

// Single lifetime screening, untruncated, every screening seen from time 0.
struct ExponentialSetup {
    Dataset data;
    ModelConfig model;
    double total = 0.0;
};

ExponentialSetup exponential_setup(int n, double rate, std::uint64_t seed) {
    ExponentialSetup s;
    s.model.ell = 1;
    s.model.timeline.max_lag_years.reset();
    s.model.timeline.eligibility_length = 1e4;
    Rng rng = make_stream(seed, 0);
    for (int i = 0; i < n; ++i) {
        SubjectRecord r;
        r.id = "s" + std::to_string(i);
        r.exit_time = 1e4;
        double t = exponential_draw(rng, rate);
        r.screenings = {t};
        s.total += t;
        s.data.push_back(r);
    }
    return s;
}

// Independent draws from the default joint prior for ell = 2, keyed by chain
// column name. Gamma variates go through logs so tiny shapes do not underflow.
std::map<std::string, std::vector<double>> direct_prior_draws(int n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto log_gamma = [&](double shape) {
        std::gamma_distribution<double> g(shape + 1.0, 1.0);
        double u = unif(gen);
        while (u == 0.0) u = unif(gen);
        return std::log(g(gen)) + std::log(u) / shape;
    };
    std::exponential_distribution<double> exp1(1.0);
    std::map<std::string, std::vector<double>> out;
    for (int i = 0; i < n; ++i) {
        std::array<double, 3> gamma{exp1(gen), exp1(gen), exp1(gen)};
        std::array<double, 3> lg{};
        for (int j = 0; j < 3; ++j) lg[j] = log_gamma(gamma[j]);
        double top = *std::max_element(lg.begin(), lg.end()), total = 0.0;
        for (double v : lg) total += std::exp(v - top);
        for (int j = 0; j < 3; ++j) {
            out["gamma_" + std::to_string(j)].push_back(gamma[j]);
            out["theta_" + std::to_string(j)].push_back(std::exp(lg[j] - top) / total);
        }
        for (auto [j, k] : {std::pair{1, 1}, {2, 1}, {2, 2}}) {
            const std::string jk = std::to_string(j) + "_" + std::to_string(k);
            double k1 = exp1(gen);
            double k2 = 1.0 / std::gamma_distribution<double>(2.0, 1.0)(gen);
            out["kappa1_" + jk].push_back(k1);
            out["kappa2_" + jk].push_back(k2);
            out["lambda_" + jk].push_back(std::exp(log_gamma(k1) + std::log(k2)));
        }
        double t1 = exp1(gen), t2 = exp1(gen);
        double a = log_gamma(t1), b = log_gamma(t2);
        out["tau_1"].push_back(t1);
        out["tau_2"].push_back(t2);
        out["alpha"].push_back(1.0 / (1.0 + std::exp(b - a)));
    }
    return out;
}

}  // namespace

TEST_CASE("theta draws match Dirichlet moments, including tiny concentrations") {
    Rng rng = make_stream(1, 2);
    std::vector<double> sums{3.0, 1.5, 0.5}, gamma{1.0, 0.5, 0.5};
    const double total = 7.0;
    const int n = 200000;
    std::vector<std::vector<double>> cols(3);
    for (int i = 0; i < n; ++i) {
        auto t = sample_theta(sums, gamma, rng);
        if (i < 1000) CHECK(std::abs(std::accumulate(t.begin(), t.end(), 0.0) - 1.0) < 1e-12);
        for (int j = 0; j < 3; ++j) cols[j].push_back(t[j]);
    }
    for (int j = 0; j < 3; ++j) {
        double a = sums[j] + gamma[j], m = a / total;
        double v = m * (1 - m) / (total + 1);
        CHECK(std::abs(mean_of(cols[j]) - m) < 4 * std::sqrt(v / n));
        CHECK(var_of(cols[j]) == doctest::Approx(v).epsilon(0.02));
    }
    std::vector<double> tiny_sums{0.0, 0.0}, tiny_gamma{1e-3, 1e-3};
    for (int i = 0; i < 1000; ++i) {
        auto t = sample_theta(tiny_sums, tiny_gamma, rng);
        CHECK(t[0] > 0.0);
        CHECK(t[1] > 0.0);
        CHECK(t[0] + t[1] == doctest::Approx(1.0));
    }
    CHECK_THROWS_AS(sample_theta(std::vector<double>{0.0}, std::vector<double>{0.0}, rng), std::invalid_argument);
}

TEST_CASE("kappa2 is drawn from its inverse gamma conditional") {
    Rng rng = make_stream(4, 0);
    const double lambda = 0.3, k1 = 1.5, c = 2.0, d = 1.0;
    std::vector<double> draws;
    for (int i = 0; i < 100000; ++i) draws.push_back(kappa2_draw(lambda, k1, c, d, rng));
    // InvGamma(k1 + c, lambda + d): mean (lambda + d) / (k1 + c - 1).
    const double shape = k1 + c, scale = lambda + d;
    const double m = scale / (shape - 1), v = m * m / (shape - 2);
    CHECK(std::abs(mean_of(draws) - m) < 4 * std::sqrt(v / draws.size()));
}

TEST_CASE("zero proposal scales leave every random-walk parameter in place") {
    Rng rng = make_stream(5, 0);
    std::vector<double> gamma{0.7, 1.2, 2.0}, theta{0.2, 0.3, 0.5};
    for (int i = 0; i < 50; ++i) {
        CHECK(gamma_step(1, gamma, theta, 1.0, 0.0, rng).value == 1.2);
        CHECK(kappa1_step(0.4, KappaPair{1.3, 0.8}, 1.0, 0.0, rng).value == 1.3);
        CHECK(tau_step(0, {1.1, 2.2}, std::log(0.9), 1.0, 0.0, rng).value == 1.1);
    }
}

TEST_CASE("random-walk conditionals are the stated log densities") {
    std::vector<double> gamma{0.7, 1.2}, theta{0.4, 0.6};
    CHECK(gamma_log_conditional(1, gamma, theta, 2.0) ==
          doctest::Approx(std::lgamma(1.9) - std::lgamma(1.2) + 0.2 * std::log(0.6) - 2.4));
    CHECK(kappa1_log_conditional(2.0, 0.5, 0.3, 1.5) ==
          doctest::Approx(-2.0 * std::log(0.5) - std::lgamma(2.0) + std::log(0.3) - 3.0));
    CHECK(tau_log_conditional(1, {2.0, 3.0}, std::log(0.2), 1.0) ==
          doctest::Approx(std::lgamma(5.0) - std::lgamma(3.0) + 2.0 * std::log(0.2) - 3.0));
    // Exponential(rate 2) as Gamma(1, 1/2).
    CHECK(log_gamma_density(0.7, 1.0, 0.5) == doctest::Approx(std::log(2.0) - 1.4));
    CHECK(std::isinf(log_gamma_density(0.0, 2.0, 1.0)));
}

TEST_CASE("single-lag rate posterior matches the conjugate gamma posterior") {
    auto setup = exponential_setup(40, 0.3, 11);
    auto chain = short_chain(22000, 2000);
    chain.frozen = {Block::kappa};
    ParameterState init = initial_state(setup.data, setup.model, PriorConfig::defaults(1));
    init.kappa[0][0] = {2.0, 1.5};
    chain.initial_state = init;
    auto out = run_chain(setup.data, setup.model, PriorConfig::defaults(1), chain, 0);
    auto lambda = out.column("lambda_1_1");
    // Gamma(k1, scale k2) prior with an exponential likelihood.
    const double shape = 2.0 + 40, rate = 1.0 / 1.5 + setup.total;
    const double m = shape / rate, sd = std::sqrt(shape) / rate;
    CHECK(std::abs(mean_of(lambda) - m) < 4 * batch_se(lambda));
    CHECK(std::sqrt(var_of(lambda)) == doctest::Approx(sd).epsilon(0.1));
    for (double v : out.column("kappa1_1_1")) CHECK(v == 2.0);
    for (const auto& row : out.draws) {
        CHECK(row[0] + row[1] == doctest::Approx(1.0));
        CHECK(row[0] > 0.0);
    }
}

TEST_CASE("without data the chain samples the joint prior") {
    ModelConfig model;
    const auto priors = PriorConfig::defaults(2);
    auto out = run_chain({}, model, priors, short_chain(100000, 1000, 99), 0);
    REQUIRE(out.draws.size() == 1000);
    const auto direct = direct_prior_draws(20000, 77);
    const double crit = oracle::ks_two_sample_critical_1pct(out.draws.size(), 20000);
    for (const auto& [name, draws] : direct) {
        CAPTURE(name);
        CHECK(oracle::ks_two_sample(out.column(name), draws) < crit);
    }
    // Closed-form marginals where they exist.
    const double one = oracle::ks_critical_1pct(out.draws.size());
    auto exp1 = [](double x) { return 1.0 - std::exp(-x); };
    // InvGamma(2, 1): P(X <= x) = exp(-1/x)(1 + 1/x).
    auto inv_gamma2 = [](double x) { return std::exp(-1.0 / x) * (1.0 + 1.0 / x); };
    for (const char* name : {"gamma_0", "gamma_2", "kappa1_2_1", "tau_1", "tau_2"}) {
        CAPTURE(std::string(name));
        CHECK(oracle::ks_statistic(out.column(name), exp1) < one);
    }
    CHECK(oracle::ks_statistic(out.column("kappa2_2_2"), inv_gamma2) < one);
}

TEST_CASE("lag rate with fixed hyperparameters follows its gamma prior when data are absent") {
    ModelConfig model;
    auto chain = short_chain(30000, 1000, 29);
    chain.frozen = {Block::kappa};
    auto init = initial_state({}, model, PriorConfig::defaults(2));
    init.kappa[1][1] = {3.0, 0.2};
    chain.initial_state = init;
    auto out = run_chain({}, model, PriorConfig::defaults(2), chain, 0);
    // Gamma(3, scale 0.2): P(X <= x) = 1 - e^{-u}(1 + u + u^2/2), u = x / 0.2.
    auto cdf = [](double x) {
        double u = x / 0.2;
        return 1.0 - std::exp(-u) * (1.0 + u + 0.5 * u * u);
    };
    auto lambda = out.column("lambda_2_2");
    CHECK(oracle::ks_statistic(lambda, cdf) < oracle::ks_critical_1pct(lambda.size()));
}

TEST_CASE("chains are reproducible and independent of the thread count") {
    auto s = named_scenario("LT2-NLS1");
    s.n_subjects = 60;
    auto data = generate_dataset(s, 3).records;
    ModelConfig model;
    auto chain = short_chain(40, 10);
    chain.n_chains = 2;
    auto a = run_chains(data, model, PriorConfig::defaults(2), chain);
    model.threads = 3;
    auto b = run_chains(data, model, PriorConfig::defaults(2), chain);
    REQUIRE(a.size() == 2);
    CHECK(a[0].draws == b[0].draws);
    CHECK(a[1].draws == b[1].draws);
    CHECK(a[0].draws != a[1].draws);
    CHECK(a[0].draws.front() != a[1].draws.front());
    chain.seed = 100;
    auto c = run_chains(data, model, PriorConfig::defaults(2), chain);
    CHECK(a[0].draws != c[0].draws);
}

TEST_CASE("stored draws follow burn-in and thinning") {
    auto setup = exponential_setup(10, 0.5, 2);
    auto chain = short_chain(107, 7, 4);
    auto out = run_chain(setup.data, setup.model, PriorConfig::defaults(1), chain, 0);
    CHECK(out.draws.size() == 25);
    CHECK(out.parameter_names ==
          std::vector<std::string>{"theta_0", "theta_1", "gamma_0", "gamma_1", "lambda_1_1", "kappa1_1_1",
                                   "kappa2_1_1", "median_lag_1_1"});
    for (const auto& row : out.draws) CHECK(row[7] == doctest::Approx(std::log(2.0) / row[4]));
    CHECK_FALSE(out.acceptance_rates.contains("alpha"));
}

TEST_CASE("adapted acceptance rates land near the target on simulated data") {
    auto s = named_scenario("LT2-NLS1");
    s.n_subjects = 200;
    auto data = generate_dataset(s, 8).records;
    ModelConfig model;
    auto out = run_chain(data, model, PriorConfig::defaults(2), short_chain(900, 400), 0);
    for (const char* block : {"gamma", "lambda", "kappa", "alpha", "tau"}) {
        CAPTURE(block);
        REQUIRE(out.acceptance_rates.contains(block));
        double r = out.acceptance_rates.at(block);
        CHECK(r > 0.1);
        CHECK(r < 0.7);
    }
    for (double a : out.column("alpha")) CHECK((a >= kAlphaFloor && a <= 1.0));
    for (const auto& row : out.draws) CHECK(row[0] + row[1] + row[2] == doctest::Approx(1.0));
}

TEST_CASE("eta stays a probability vector over feasible categories after every sweep") {
    auto s = named_scenario("LT3-NLS2");
    s.n_subjects = 80;
    auto data = generate_dataset(s, 21).records;
    ModelConfig model;
    Sampler sampler(data, model, PriorConfig::defaults(2), short_chain(10, 0), 0);
    for (int it = 0; it < 10; ++it) {
        sampler.sweep(false);
        const auto& st = sampler.state();
        for (std::size_t i = 0; i < data.size(); ++i) {
            auto prep = prepare_subject(data[i], model);
            double total = 0.0;
            for (int j = 0; j <= 2; ++j) {
                if (!prep.has_category(j)) CHECK(st.eta[i][j] == 0.0);
                total += st.eta[i][j];
            }
            CHECK(total == doctest::Approx(1.0));
        }
    }
    // The cached case probabilities must agree with a fresh evaluation.
    const auto& st = sampler.state();
    for (std::size_t i = 0; i < data.size(); i += 7) {
        auto fresh = expected_eta(data[i], model, st);
        for (int j = 0; j <= 2; ++j) CHECK(st.eta[i][j] == doctest::Approx(fresh[j]).epsilon(1e-9));
    }
}

TEST_CASE("logit theta link recovers a binary covariate effect") {
    auto s = named_scenario("LT1-NLS1");
    s.covariate = BinaryThetaCovariate{0.5, {0.1, 0.45, 0.45}};
    s.censoring = CensoringModel::uncensored();
    s.n_subjects = 600;
    auto data = generate_dataset(s, 31).records;
    ModelConfig model;
    model.theta_link = ThetaLink::logit;
    auto out = run_chain(data, model, PriorConfig::defaults(2), short_chain(700, 300), 0);
    CHECK(out.parameter_names.front() == "beta_1_0");
    CHECK_FALSE(out.acceptance_rates.contains("gamma"));
    // P(M = 0 | x) under the posterior mean coefficients.
    auto prob_zero = [&](double x) {
        double e1 = mean_of(out.column("beta_1_0")) + x * mean_of(out.column("beta_1_1"));
        double e2 = mean_of(out.column("beta_2_0")) + x * mean_of(out.column("beta_2_1"));
        return 1.0 / (1.0 + std::exp(e1) + std::exp(e2));
    };
    CHECK(std::abs(prob_zero(1.0) - 0.1) < 0.05);
    CHECK(std::abs(prob_zero(0.0) - s.theta[0]) < 0.07);
}

TEST_CASE("log lag link without covariates agrees with the direct link") {
    auto setup = exponential_setup(200, 0.25, 5);
    auto direct = run_chain(setup.data, setup.model, PriorConfig::defaults(1), short_chain(3000, 500), 0);
    auto model = setup.model;
    model.lag_link = LagLink::log;
    auto logged = run_chain(setup.data, model, PriorConfig::defaults(1), short_chain(3000, 500), 0);
    auto w = logged.column("omega_1_1_0");
    for (double& v : w) v = std::exp(v);
    // Both are dominated by 200 observations: mean near n / sum t.
    const double mle = 200 / setup.total;
    CHECK(mean_of(direct.column("lambda_1_1")) == doctest::Approx(mle).epsilon(0.05));
    CHECK(mean_of(w) == doctest::Approx(mle).epsilon(0.05));
    CHECK_FALSE(logged.acceptance_rates.contains("kappa"));
}

TEST_CASE("configuration errors are rejected up front") {
    auto setup = exponential_setup(5, 0.5, 1);
    auto chain = short_chain(10, 10);
    CHECK_THROWS_AS(run_chain(setup.data, setup.model, PriorConfig::defaults(1), chain, 0), std::invalid_argument);
    chain = short_chain(10, 2);
    chain.thin = 0;
    CHECK_THROWS_AS(chain.validate(), std::invalid_argument);
    chain = short_chain(10, 2);
    chain.proposal_scales.lambda = -1.0;
    CHECK_THROWS_AS(chain.validate(), std::invalid_argument);
    auto priors = PriorConfig::defaults(1);
    CHECK_THROWS_AS(priors.validate(2), std::invalid_argument);
    priors.tau_rate = 0.0;
    CHECK_THROWS_AS(priors.validate(1), std::invalid_argument);
    CHECK(parse_block("kappa") == Block::kappa);
    CHECK_THROWS_AS(parse_block("zeta"), std::invalid_argument);
    auto bad = setup.data;
    bad[0].screenings = {-1.0};
    CHECK_THROWS_AS(run_chain(bad, setup.model, PriorConfig::defaults(1), short_chain(10, 2), 0),
                    std::invalid_argument);
}

TEST_CASE("alpha keeps its prior when no subject can belong to the two-screening category") {
    // Full windows with at most one early screening: a second lifetime
    // screening would have been seen, so category 2 is infeasible throughout.
    Dataset data;
    for (int i = 0; i < 30; ++i) {
        SubjectRecord r;
        r.id = "s" + std::to_string(i);
        r.exit_time = 40.0;
        if (i % 3) r.screenings = {0.3 * i};
        data.push_back(r);
    }
    ModelConfig model;
    for (const auto& r : data) CHECK_FALSE(prepare_subject(r, model).has_category(2));
    auto out = run_chain(data, model, PriorConfig::defaults(2), short_chain(100000, 1000, 99), 0);
    const auto direct = direct_prior_draws(20000, 78);
    CHECK(oracle::ks_two_sample(out.column("alpha"), direct.at("alpha")) <
          oracle::ks_two_sample_critical_1pct(out.draws.size(), 20000));
}

TEST_CASE("alpha near one pulls tau2 below its prior mean") {
    ModelConfig model;
    auto chain = short_chain(101000, 1000);
    chain.frozen = {Block::alpha};
    auto init = initial_state({}, model, PriorConfig::defaults(2));
    init.alpha = 0.99;
    chain.initial_state = init;
    auto out = run_chain({}, model, PriorConfig::defaults(2), chain, 0);
    auto tau2 = out.column("tau_2"), tau1 = out.column("tau_1");
    CHECK(mean_of(tau2) + 4 * batch_se(tau2) < 1.0);
    CHECK(mean_of(tau1) > mean_of(tau2));
}

TEST_CASE("each Metropolis block leaves a converged chain's distribution unchanged") {
    // Two subjects: one with both screenings observed, one right-censored
    // after a single screening, so every lag and alpha enters the likelihood.
    Dataset data(2);
    data[0].id = "a";
    data[0].exit_time = 40.0;
    data[0].screenings = {2.0, 15.0};
    data[1].id = "b";
    data[1].exit_time = 24.0;
    data[1].screenings = {5.0};
    ModelConfig model;
    auto chain = short_chain(81000, 1000, 20);
    auto out = run_chain(data, model, PriorConfig::defaults(2), chain, 0);
    const std::size_t half = out.draws.size() / 2;
    for (const auto& name : out.parameter_names) {
        auto col = out.column(name);
        std::vector<double> first(col.begin(), col.begin() + half), second(col.begin() + half, col.end());
        CAPTURE(name);
        CHECK(oracle::ks_two_sample(first, second) < oracle::ks_two_sample_critical_1pct(half, half));
    }
}

TEST_CASE("intercept-only logit link matches the direct theta model for a single screening") {
    auto setup = exponential_setup(150, 0.3, 13);
    for (int i = 0; i < 100; ++i) {
        SubjectRecord r;
        r.id = "z" + std::to_string(i);
        r.exit_time = 30.0;
        setup.data.push_back(r);
    }
    auto direct = run_chain(setup.data, setup.model, PriorConfig::defaults(1), short_chain(6000, 1000), 0);
    auto model = setup.model;
    model.theta_link = ThetaLink::logit;
    auto logit = run_chain(setup.data, model, PriorConfig::defaults(1), short_chain(6000, 1000), 0);
    auto b0 = logit.column("beta_1_0");
    for (double& v : b0) v = 1.0 / (1.0 + std::exp(-v));
    auto t1 = direct.column("theta_1");
    CHECK(std::abs(mean_of(b0) - mean_of(t1)) < 4 * std::hypot(batch_se(b0), batch_se(t1)) + 0.005);
}

TEST_CASE("logit coefficient of a binary covariate is recovered at n = 2000") {
    Scenario s;
    s.name = "binary";
    s.theta = {0.5, 0.5};
    s.lambda = {{0.3}};
    s.alpha = 1.0;
    s.censoring = CensoringModel::uncensored();
    s.covariate = BinaryThetaCovariate{0.5, {1.0 / (1.0 + std::exp(0.6)), 1.0 / (1.0 + std::exp(-0.6))}};
    s.n_subjects = 2000;
    auto data = generate_dataset(s, 17).records;
    ModelConfig model;
    model.ell = 1;
    model.theta_link = ThetaLink::logit;
    auto out = run_chain(data, model, PriorConfig::defaults(1), short_chain(2500, 500), 0);
    CHECK(std::abs(mean_of(out.column("beta_1_1")) - 0.6) < 0.2);
    CHECK(std::abs(mean_of(out.column("beta_1_0"))) < 0.2);
}
