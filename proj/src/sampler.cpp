#include "curescreen/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "curescreen/parallel.hpp"

namespace curescreen {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kTiny = 1e-300;

double logit(double p) { return std::log(p) - std::log1p(-p); }
double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }
// Log-scale random-walk proposal; values that leave the positive normal
// range of double are reported as unusable and rejected by the caller.
bool positive_normal(double v) { return std::isnormal(v) && v > 0.0; }

// log(1 + e^x) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// alpha = 1 is stored as this logit; expit rounds it back to exactly 1.
constexpr double kAlphaOneLogit = 40.0;

bool metropolis_accept(double log_ratio, Rng& rng) {
    if (std::isnan(log_ratio)) return false;
    return log_ratio >= 0.0 || std::log(uniform_open(rng)) < log_ratio;
}

double log_normal_density(double x, const NormalPrior& prior) {
    double z = x - prior.mean;
    return -0.5 * z * z / prior.variance - 0.5 * std::log(2.0 * M_PI * prior.variance);
}

// Log of a Gamma(shape, 1) variate, accurate for very small shapes where the
// variate itself underflows.
double log_gamma_variate(Rng& rng, double shape) {
    if (shape >= 1.0) return std::log(gamma_draw(rng, shape, 1.0));
    return std::log(gamma_draw(rng, shape + 1.0, 1.0)) + std::log(uniform_open(rng)) / shape;
}

std::vector<double> logit_log_theta(const std::vector<std::vector<double>>& beta, const std::vector<double>& x) {
    const std::size_t l = beta.size();
    std::vector<double> out(l + 1, 0.0);
    for (std::size_t j = 1; j <= l; ++j) {
        double eta = beta[j - 1][0];
        for (std::size_t c = 0; c < x.size(); ++c) eta += beta[j - 1][c + 1] * x[c];
        out[j] = eta;
    }
    double top = *std::max_element(out.begin(), out.end());
    double total = 0.0;
    for (double v : out) total += std::exp(v - top);
    double norm = top + std::log(total);
    for (double& v : out) v -= norm;
    return out;
}

std::size_t covariate_width(const Dataset& data, bool theta) {
    if (data.empty()) return 0;
    return theta ? data[0].covariates_theta.size() : data[0].covariates_lag.size();
}

}  // namespace

PriorConfig PriorConfig::defaults(int ell) {
    PriorConfig p;
    p.s.assign(ell + 1, 1.0);
    for (int j = 1; j <= ell; ++j) p.kappa.emplace_back(j, KappaHyper{});
    return p;
}

void PriorConfig::validate(int ell) const {
    auto fail = [](const std::string& why) { throw std::invalid_argument("invalid prior config: " + why); };
    if (static_cast<int>(s.size()) != ell + 1) fail("s needs ell + 1 entries");
    for (double v : s)
        if (!(v > 0.0)) fail("s entries must be positive");
    if (static_cast<int>(kappa.size()) != ell) fail("kappa hyperparameters need one row per category");
    for (int j = 1; j <= ell; ++j) {
        if (static_cast<int>(kappa[j - 1].size()) != j) fail("kappa hyperparameter row has the wrong length");
        for (const auto& h : kappa[j - 1])
            if (!(h.b > 0.0 && h.c > 0.0 && h.d > 0.0)) fail("b, c and d must be positive");
    }
    if (!(tau_rate > 0.0)) fail("tau_rate must be positive");
    if (!(beta.variance > 0.0) || !(omega.variance > 0.0)) fail("normal prior variances must be positive");
    if (!std::isfinite(beta.mean) || !std::isfinite(omega.mean)) fail("normal prior means must be finite");
}

std::string to_string(Block block) {
    switch (block) {
    case Block::theta: return "theta";
    case Block::gamma: return "gamma";
    case Block::lambda: return "lambda";
    case Block::kappa: return "kappa";
    case Block::alpha: return "alpha";
    case Block::tau: return "tau";
    case Block::eta: return "eta";
    case Block::beta: return "beta";
    case Block::omega: return "omega";
    }
    return "unknown";
}

Block parse_block(const std::string& name) {
    for (Block b : {Block::theta, Block::gamma, Block::lambda, Block::kappa, Block::alpha, Block::tau, Block::eta,
                    Block::beta, Block::omega})
        if (to_string(b) == name) return b;
    throw std::invalid_argument("unknown sampler block '" + name + "'");
}

void ChainConfig::validate() const {
    auto fail = [](const std::string& why) { throw std::invalid_argument("invalid chain config: " + why); };
    if (iterations < 1) fail("iterations must be positive");
    if (burn_in < 0 || burn_in >= iterations) fail("burn_in must satisfy 0 <= burn_in < iterations");
    if (thin < 1) fail("thin must be at least 1");
    if (n_chains < 1) fail("n_chains must be at least 1");
    const auto& p = proposal_scales;
    for (double v : {p.gamma, p.lambda, p.kappa, p.alpha, p.tau, p.beta, p.omega})
        if (!(v >= 0.0) || !std::isfinite(v)) fail("proposal scales must be finite and nonnegative");
    if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) fail("target_acceptance must lie in (0, 1)");
}

std::vector<double> ChainOutput::column(const std::string& name) const {
    auto it = std::find(parameter_names.begin(), parameter_names.end(), name);
    if (it == parameter_names.end()) throw std::out_of_range("chain has no column '" + name + "'");
    const auto idx = static_cast<std::size_t>(it - parameter_names.begin());
    std::vector<double> out;
    out.reserve(draws.size());
    for (const auto& row : draws) out.push_back(row[idx]);
    return out;
}

std::vector<double> sample_theta(std::span<const double> eta_sums, std::span<const double> gamma, Rng& rng) {
    if (eta_sums.size() != gamma.size()) throw std::invalid_argument("eta sums and gamma differ in length");
    const std::size_t n = gamma.size();
    std::vector<double> logs(n);
    for (std::size_t j = 0; j < n; ++j) {
        double a = eta_sums[j] + gamma[j];
        if (!(a > 0.0)) throw std::invalid_argument("Dirichlet concentration must be positive");
        logs[j] = log_gamma_variate(rng, a);
    }
    double top = *std::max_element(logs.begin(), logs.end());
    std::vector<double> theta(n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        theta[j] = std::max(std::exp(logs[j] - top), kTiny);
        total += theta[j];
    }
    for (double& v : theta) v /= total;
    return theta;
}

double gamma_log_conditional(int j, std::span<const double> gamma, std::span<const double> theta, double s_j) {
    double sum = std::accumulate(gamma.begin(), gamma.end(), 0.0);
    double g = gamma[j];
    return std::lgamma(sum) - std::lgamma(g) + (g - 1.0) * std::log(theta[j]) - s_j * g;
}

MhStep gamma_step(int j, std::span<const double> gamma, std::span<const double> theta, double s_j, double scale,
                  Rng& rng) {
    std::vector<double> proposal(gamma.begin(), gamma.end());
    const double current = gamma[j];
    proposal[j] = current * std::exp(scale * standard_normal(rng));
    if (!positive_normal(proposal[j])) return {current, false};
    double ratio = gamma_log_conditional(j, proposal, theta, s_j) - gamma_log_conditional(j, gamma, theta, s_j) +
                   std::log(proposal[j] / current);
    if (metropolis_accept(ratio, rng)) return {proposal[j], true};
    return {current, false};
}

double kappa1_log_conditional(double kappa1, double kappa2, double lambda, double b) {
    return -kappa1 * std::log(kappa2) - std::lgamma(kappa1) + (kappa1 - 1.0) * std::log(lambda) - b * kappa1;
}

MhStep kappa1_step(double lambda, const KappaPair& kappa, double b, double scale, Rng& rng) {
    const double current = kappa.shape;
    const double proposal = current * std::exp(scale * standard_normal(rng));
    if (!positive_normal(proposal)) return {current, false};
    double ratio = kappa1_log_conditional(proposal, kappa.scale, lambda, b) -
                   kappa1_log_conditional(current, kappa.scale, lambda, b) + std::log(proposal / current);
    if (metropolis_accept(ratio, rng)) return {proposal, true};
    return {current, false};
}

double kappa2_draw(double lambda, double kappa1, double c, double d, Rng& rng) {
    return inverse_gamma_draw(rng, kappa1 + c, lambda + d);
}

double tau_log_conditional(int which, const std::array<double, 2>& tau, double log_term, double rate) {
    const double t = tau[which];
    return std::lgamma(tau[0] + tau[1]) - std::lgamma(t) + (t - 1.0) * log_term - rate * t;
}

MhStep tau_step(int which, const std::array<double, 2>& tau, double log_term, double rate, double scale, Rng& rng) {
    auto proposal = tau;
    const double current = tau[which];
    proposal[which] = current * std::exp(scale * standard_normal(rng));
    if (!positive_normal(proposal[which])) return {current, false};
    double ratio = tau_log_conditional(which, proposal, log_term, rate) - tau_log_conditional(which, tau, log_term, rate) +
                   std::log(proposal[which] / current);
    if (metropolis_accept(ratio, rng)) return {proposal[which], true};
    return {current, false};
}

double log_gamma_density(double x, double shape, double scale) {
    if (!(x > 0.0)) return kNegInf;
    return (shape - 1.0) * std::log(x) - x / scale - std::lgamma(shape) - shape * std::log(scale);
}

ParameterState initial_state(const Dataset& dataset, const ModelConfig& model, const PriorConfig& priors) {
    const int l = model.ell;
    const std::size_t tc = model.theta_link == ThetaLink::logit ? covariate_width(dataset, true) : 0;
    const std::size_t lc = model.lag_link == LagLink::log ? covariate_width(dataset, false) : 0;
    auto state = ParameterState::neutral(l, tc, lc);

    std::vector<double> counts(l + 1, 1.0);  // one pseudo-observation per category
    double first_sum = 0.0, second_sum = 0.0;
    int first_n = 0, second_n = 0;
    for (const auto& r : dataset) {
        const auto k = std::min<std::size_t>(r.observed_count(), static_cast<std::size_t>(l));
        counts[k] += 1.0;
        if (r.entry_time == 0.0 && !r.screenings.empty()) {
            first_sum += r.screenings[0];
            ++first_n;
        }
        if (r.screenings.size() == 2) {
            second_sum += r.screenings[1] - r.screenings[0] - model.timeline.refractory_years;
            ++second_n;
        }
    }
    double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    for (int j = 0; j <= l; ++j) state.theta[j] = counts[j] / total;

    auto rate_from = [](double sum, int n, double fallback) {
        if (n == 0 || !(sum > 0.0)) return fallback;
        return std::clamp(n / sum, 1e-3, 50.0);
    };
    const double r1 = rate_from(first_sum, first_n, 0.5);
    const double r2 = rate_from(second_sum, second_n, r1);
    state.lambda[0][0] = r1;
    if (l >= 2) state.lambda[1] = {r1, r2};

    for (int j = 0; j <= l; ++j) state.gamma[j] = 1.0 / priors.s[j];
    for (int j = 1; j <= l; ++j)
        for (int k = 1; k <= j; ++k) {
            const auto& h = priors.kappa[j - 1][k - 1];
            state.kappa[j - 1][k - 1] = {1.0 / h.b, h.c > 1.0 ? h.d / (h.c - 1.0) : h.d};
        }
    state.tau = {1.0 / priors.tau_rate, 1.0 / priors.tau_rate};
    state.alpha = l >= 2 ? 0.95 : 1.0;
    for (int j = 1; j <= l; ++j) {
        state.beta[j - 1].assign(tc + 1, 0.0);
        state.beta[j - 1][0] = std::log(state.theta[j] / state.theta[0]);
        for (int k = 1; k <= j; ++k) {
            state.omega[j - 1][k - 1].assign(lc + 1, 0.0);
            state.omega[j - 1][k - 1][0] = std::log(state.lambda[j - 1][k - 1]);
        }
    }
    state.eta.resize(dataset.size());
    parallel_for(dataset.size(), model.threads,
                 [&](std::size_t i) { state.eta[i] = expected_eta(dataset[i], model, state); });
    return state;
}

std::vector<std::string> parameter_names(const ModelConfig& model, std::size_t theta_covariates,
                                         std::size_t lag_covariates) {
    const int l = model.ell;
    std::vector<std::string> names;
    auto idx = [](auto... parts) {
        std::string s;
        ((s += "_" + std::to_string(parts)), ...);
        return s;
    };
    if (model.theta_link == ThetaLink::direct) {
        for (int j = 0; j <= l; ++j) names.push_back("theta" + idx(j));
        for (int j = 0; j <= l; ++j) names.push_back("gamma" + idx(j));
    } else {
        for (int j = 1; j <= l; ++j)
            for (std::size_t c = 0; c <= theta_covariates; ++c) names.push_back("beta" + idx(j, c));
    }
    for (int j = 1; j <= l; ++j)
        for (int k = 1; k <= j; ++k) {
            if (model.lag_link == LagLink::direct) {
                names.push_back("lambda" + idx(j, k));
            } else {
                for (std::size_t c = 0; c <= lag_covariates; ++c) names.push_back("omega" + idx(j, k, c));
            }
        }
    if (model.lag_link == LagLink::direct)
        for (int j = 1; j <= l; ++j)
            for (int k = 1; k <= j; ++k) {
                names.push_back("kappa1" + idx(j, k));
                names.push_back("kappa2" + idx(j, k));
            }
    if (l >= 2) {
        names.push_back("alpha");
        names.push_back("tau_1");
        names.push_back("tau_2");
    }
    if (model.lag_link == LagLink::direct)
        for (int j = 1; j <= l; ++j)
            for (int k = 1; k <= j; ++k) names.push_back("median_lag" + idx(j, k));
    return names;
}

std::vector<double> flatten(const ParameterState& state, const ModelConfig& model) {
    const int l = model.ell;
    std::vector<double> row;
    if (model.theta_link == ThetaLink::direct) {
        row.insert(row.end(), state.theta.begin(), state.theta.end());
        row.insert(row.end(), state.gamma.begin(), state.gamma.end());
    } else {
        for (int j = 1; j <= l; ++j) row.insert(row.end(), state.beta[j - 1].begin(), state.beta[j - 1].end());
    }
    for (int j = 1; j <= l; ++j)
        for (int k = 1; k <= j; ++k) {
            if (model.lag_link == LagLink::direct) {
                row.push_back(state.lambda[j - 1][k - 1]);
            } else {
                const auto& w = state.omega[j - 1][k - 1];
                row.insert(row.end(), w.begin(), w.end());
            }
        }
    if (model.lag_link == LagLink::direct)
        for (int j = 1; j <= l; ++j)
            for (int k = 1; k <= j; ++k) {
                row.push_back(state.kappa[j - 1][k - 1].shape);
                row.push_back(state.kappa[j - 1][k - 1].scale);
            }
    if (l >= 2) {
        row.push_back(state.alpha);
        row.push_back(state.tau[0]);
        row.push_back(state.tau[1]);
    }
    if (model.lag_link == LagLink::direct)
        for (int j = 1; j <= l; ++j) {
            auto law = category_law(state.lambda[j - 1], state.alpha, model.timeline);
            for (int k = 1; k <= j; ++k) row.push_back(law.marginal_median(static_cast<std::size_t>(k - 1)));
        }
    return row;
}

// ---------------------------------------------------------------------------

struct Sampler::Impl {
    struct Tuner {
        double scale;
        long tried = 0;
    };
    struct Tally {
        long tried = 0;
        long accepted = 0;
    };

    const Dataset& data;
    ModelConfig model;
    PriorConfig priors;
    ChainConfig chain;
    int chain_index;
    Rng rng;
    ParameterState st;
    std::size_t theta_cov = 0;
    std::size_t lag_cov = 0;

    std::vector<PreparedSubject> prepared;
    std::vector<std::vector<double>> p;          // [i][j], consistent with st
    std::vector<std::vector<double>> log_theta;  // [i][j], consistent with st
    std::vector<std::vector<std::size_t>> members;  // subjects with a feasible case in category j

    std::map<std::string, Tuner> tuners;
    std::map<Block, Tally> tallies;
    std::map<std::string, long> flagged;
    long sweep_index = 0;
    Block current_block = Block::theta;
    double alpha_logit = kAlphaOneLogit;  // working coordinate of st.alpha

    Impl(const Dataset& d, const ModelConfig& m, const PriorConfig& pr, const ChainConfig& c, int index)
        : data(d), model(m), priors(pr), chain(c), chain_index(index),
          rng(make_stream(c.seed, static_cast<std::uint64_t>(index), 0x5a4d)) {
        model.validate();
        priors.validate(model.ell);
        chain.validate();
        validate_dataset(data, model);
        theta_cov = model.theta_link == ThetaLink::logit ? covariate_width(data, true) : 0;
        lag_cov = model.lag_link == LagLink::log ? covariate_width(data, false) : 0;

        if (chain.initial_state) {
            st = *chain.initial_state;
        } else {
            st = initial_state(data, model, priors);
            if (chain_index > 0 && chain.jitter_chains) jitter();
        }
        st.validate(model);
        alpha_logit = st.alpha >= 1.0 ? kAlphaOneLogit : logit(st.alpha);

        prepared.reserve(data.size());
        for (const auto& r : data) prepared.push_back(prepare_subject(r, model));
        members.assign(model.ell + 1, {});
        for (std::size_t i = 0; i < data.size(); ++i)
            for (int j = 0; j <= model.ell; ++j)
                if (prepared[i].has_category(j)) members[j].push_back(i);

        p.assign(data.size(), std::vector<double>(model.ell + 1, 0.0));
        for (std::size_t i : members[0]) p[i][0] = 1.0;
        for (int j = 1; j <= model.ell; ++j) {
            auto values = column(j, st.lambda[j - 1], st.omega[j - 1], st.alpha);
            if (!values) throw std::invalid_argument("initial lag coefficients give unusable rates");
            for (std::size_t m = 0; m < values->size(); ++m)
                if (!std::isfinite((*values)[m]) || (*values)[m] < 0.0)
                    fail_numeric(members[j][m], "initial state gives a non-finite case probability");
            store_column(j, *values);
        }
        refresh_log_theta();
        if (st.eta.size() != data.size()) update_eta();
    }

    void jitter() {
        const int l = model.ell;
        double total = 0.0;
        for (double& t : st.theta) {
            t *= std::exp(0.2 * standard_normal(rng));
            total += t;
        }
        for (double& t : st.theta) t /= total;
        for (auto& row : st.lambda)
            for (double& v : row) v *= std::exp(0.2 * standard_normal(rng));
        for (auto& row : st.beta) row[0] += 0.2 * standard_normal(rng);
        for (auto& rows : st.omega)
            for (auto& row : rows) row[0] += 0.2 * standard_normal(rng);
        if (l >= 2) st.alpha = std::min(0.999, expit(logit(st.alpha) + 0.3 * standard_normal(rng)));
        st.eta.clear();
    }

    // p_ij for every member of category j under the given lag parameters;
    // empty when a log-link rate leaves the representable positive range.
    std::optional<std::vector<double>> column(int j, const std::vector<double>& rates,
                                              const std::vector<std::vector<double>>& omega_j, double alpha) {
        const auto& who = members[j];
        std::vector<double> out(who.size());
        if (who.empty()) return out;
        if (model.lag_link == LagLink::direct) {
            auto law = category_law(rates, alpha, model.timeline);
            parallel_for(who.size(), model.threads, [&](std::size_t m) {
                out[m] = category_probability(prepared[who[m]], j, law, model);
            });
        } else {
            std::vector<std::vector<double>> subject_rates(who.size(), std::vector<double>(j));
            for (std::size_t m = 0; m < who.size(); ++m) {
                const auto& z = data[who[m]].covariates_lag;
                for (int k = 0; k < j; ++k) {
                    const auto& w = omega_j[k];
                    double eta = w[0];
                    for (std::size_t c = 0; c < z.size(); ++c) eta += w[c + 1] * z[c];
                    subject_rates[m][k] = std::exp(eta);
                    if (!positive_normal(subject_rates[m][k])) return std::nullopt;
                }
            }
            parallel_for(who.size(), model.threads, [&](std::size_t m) {
                auto law = category_law(subject_rates[m], alpha, model.timeline);
                out[m] = category_probability(prepared[who[m]], j, law, model);
            });
        }
        return out;
    }

    void store_column(int j, const std::vector<double>& values) {
        const auto& who = members[j];
        for (std::size_t m = 0; m < who.size(); ++m) p[who[m]][j] = values[m];
    }

    std::vector<double> current_column(int j) const {
        const auto& who = members[j];
        std::vector<double> out(who.size());
        for (std::size_t m = 0; m < who.size(); ++m) out[m] = p[who[m]][j];
        return out;
    }

    // sum_i eta_ij log p_ij over the members of category j.
    // Stored case probabilities must stay finite; proposals that cannot be
    // evaluated are rejected and counted instead.
    static bool usable(const std::vector<double>& values) {
        return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v) && v >= 0.0; });
    }

    void flag(Block block) { ++flagged[to_string(block)]; }

    double weighted_log(int j, const std::vector<double>& values) const {
        const auto& who = members[j];
        std::vector<double> terms(who.size(), 0.0);
        for (std::size_t m = 0; m < who.size(); ++m) {
            const double w = st.eta[who[m]][j];
            if (w == 0.0) continue;
            const double v = values[m];
            if (std::isnan(v) || v < 0.0) fail_numeric(who[m], "non-finite case probability");
            if (v == 0.0) return kNegInf;
            terms[m] = w * std::log(v);
        }
        return pairwise_sum(terms);
    }

    [[noreturn]] void fail_numeric(std::size_t i, const std::string& what) const {
        throw NumericalError("sweep " + std::to_string(sweep_index) + ", block " + to_string(current_block) +
                             ": subject '" + data[i].id + "' (row " + std::to_string(i + 1) + "): " + what);
    }

    void refresh_log_theta() {
        log_theta.resize(data.size());
        if (model.theta_link == ThetaLink::direct) {
            std::vector<double> shared(st.theta.size());
            for (std::size_t j = 0; j < shared.size(); ++j) shared[j] = std::log(st.theta[j]);
            for (auto& row : log_theta) row = shared;
        } else {
            for (std::size_t i = 0; i < data.size(); ++i)
                log_theta[i] = logit_log_theta(st.beta, data[i].covariates_theta);
        }
    }

    double& scale_for(const std::string& key, double initial) {
        auto it = tuners.find(key);
        if (it == tuners.end()) it = tuners.emplace(key, Tuner{initial}).first;
        return it->second.scale;
    }

    void record(Block block, const std::string& key, bool accepted, bool adapting) {
        if (adapting && chain.adapt_during_burnin) {
            auto& t = tuners.at(key);
            ++t.tried;
            double step = ((accepted ? 1.0 : 0.0) - chain.target_acceptance) / std::pow(t.tried + 1.0, 0.6);
            t.scale = std::clamp(t.scale * std::exp(step), 1e-5, 50.0);
        }
        if (!adapting) {
            auto& tally = tallies[block];
            ++tally.tried;
            tally.accepted += accepted ? 1 : 0;
        }
    }

    // A zero initial scale disables adaptation for that key so the chain stays put.
    double proposal_scale(const std::string& key, double initial) {
        double& s = scale_for(key, initial);
        return initial == 0.0 ? 0.0 : s;
    }

    // --- blocks ---

    void update_theta() {
        std::vector<double> sums(model.ell + 1);
        for (int j = 0; j <= model.ell; ++j) {
            std::vector<double> col(data.size());
            for (std::size_t i = 0; i < data.size(); ++i) col[i] = st.eta[i][j];
            sums[j] = pairwise_sum(col);
        }
        st.theta = sample_theta(sums, st.gamma, rng);
        refresh_log_theta();
    }

    void update_gamma(bool adapting) {
        for (int j = 0; j <= model.ell; ++j) {
            const std::string key = "gamma_" + std::to_string(j);
            double scale = proposal_scale(key, chain.proposal_scales.gamma);
            auto step = gamma_step(j, st.gamma, st.theta, priors.s[j], scale, rng);
            st.gamma[j] = step.value;
            record(Block::gamma, key, step.accepted, adapting);
        }
    }

    void update_lambda(bool adapting) {
        for (int j = 1; j <= model.ell; ++j)
            for (int k = 1; k <= j; ++k) {
                const std::string key = "lambda_" + std::to_string(j) + "_" + std::to_string(k);
                double scale = proposal_scale(key, chain.proposal_scales.lambda);
                const auto& kp = st.kappa[j - 1][k - 1];
                const double current = st.lambda[j - 1][k - 1];
                const double proposal = current * std::exp(scale * standard_normal(rng));
                if (!positive_normal(proposal)) {
                    record(Block::lambda, key, false, adapting);
                    continue;
                }
                auto rates = st.lambda[j - 1];
                rates[k - 1] = proposal;
                auto candidate = *column(j, rates, st.omega[j - 1], st.alpha);
                if (!usable(candidate)) {
                    flag(Block::lambda);
                    record(Block::lambda, key, false, adapting);
                    continue;
                }
                double ratio = weighted_log(j, candidate) - weighted_log(j, current_column(j)) +
                               log_gamma_density(proposal, kp.shape, kp.scale) -
                               log_gamma_density(current, kp.shape, kp.scale) + std::log(proposal / current);
                bool ok = metropolis_accept(ratio, rng);
                if (ok) {
                    st.lambda[j - 1][k - 1] = proposal;
                    store_column(j, candidate);
                }
                record(Block::lambda, key, ok, adapting);
            }
    }

    void update_omega(bool adapting) {
        for (int j = 1; j <= model.ell; ++j)
            for (int k = 1; k <= j; ++k)
                for (std::size_t c = 0; c <= lag_cov; ++c) {
                    const std::string key =
                        "omega_" + std::to_string(j) + "_" + std::to_string(k) + "_" + std::to_string(c);
                    double scale = proposal_scale(key, chain.proposal_scales.omega);
                    auto omega_j = st.omega[j - 1];
                    const double current = omega_j[k - 1][c];
                    const double proposal = current + scale * standard_normal(rng);
                    omega_j[k - 1][c] = proposal;
                    auto candidate = column(j, st.lambda[j - 1], omega_j, st.alpha);
                    if (!candidate || !usable(*candidate)) {
                        flag(Block::omega);
                        record(Block::omega, key, false, adapting);
                        continue;
                    }
                    double ratio = weighted_log(j, *candidate) - weighted_log(j, current_column(j)) +
                                   log_normal_density(proposal, priors.omega) -
                                   log_normal_density(current, priors.omega);
                    bool ok = metropolis_accept(ratio, rng);
                    if (ok) {
                        st.omega[j - 1] = std::move(omega_j);
                        store_column(j, *candidate);
                    }
                    record(Block::omega, key, ok, adapting);
                }
    }

    double theta_link_log(const std::vector<std::vector<double>>& beta, std::vector<std::vector<double>>* out) const {
        std::vector<double> terms(data.size(), 0.0);
        if (out) out->resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            auto lt = logit_log_theta(beta, data[i].covariates_theta);
            double s = 0.0;
            for (int j = 0; j <= model.ell; ++j)
                if (st.eta[i][j] > 0.0) s += st.eta[i][j] * lt[j];
            terms[i] = s;
            if (out) (*out)[i] = std::move(lt);
        }
        return pairwise_sum(terms);
    }

    void update_beta(bool adapting) {
        double current_log = theta_link_log(st.beta, nullptr);
        for (int j = 1; j <= model.ell; ++j)
            for (std::size_t c = 0; c <= theta_cov; ++c) {
                const std::string key = "beta_" + std::to_string(j) + "_" + std::to_string(c);
                double scale = proposal_scale(key, chain.proposal_scales.beta);
                auto beta = st.beta;
                const double current = beta[j - 1][c];
                const double proposal = current + scale * standard_normal(rng);
                beta[j - 1][c] = proposal;
                std::vector<std::vector<double>> lt;
                double proposal_log = theta_link_log(beta, &lt);
                double ratio = proposal_log - current_log + log_normal_density(proposal, priors.beta) -
                               log_normal_density(current, priors.beta);
                bool ok = metropolis_accept(ratio, rng);
                if (ok) {
                    st.beta = std::move(beta);
                    log_theta = std::move(lt);
                    current_log = proposal_log;
                }
                record(Block::beta, key, ok, adapting);
            }
    }

    void update_kappa(bool adapting) {
        for (int j = 1; j <= model.ell; ++j)
            for (int k = 1; k <= j; ++k) {
                const std::string key = "kappa1_" + std::to_string(j) + "_" + std::to_string(k);
                double scale = proposal_scale(key, chain.proposal_scales.kappa);
                auto& kp = st.kappa[j - 1][k - 1];
                const auto& h = priors.kappa[j - 1][k - 1];
                const double lambda = st.lambda[j - 1][k - 1];
                auto step = kappa1_step(lambda, kp, h.b, scale, rng);
                kp.shape = step.value;
                record(Block::kappa, key, step.accepted, adapting);
                kp.scale = kappa2_draw(lambda, kp.shape, h.c, h.d, rng);
            }
    }

    void update_alpha(bool adapting) {
        const std::string key = "alpha";
        double scale = proposal_scale(key, chain.proposal_scales.alpha);
        const double x = alpha_logit + scale * standard_normal(rng);
        const double proposal = expit(x);
        bool ok = false;
        if (proposal >= kAlphaFloor) {
            auto candidate = *column(2, st.lambda[1], st.omega[1], proposal);
            if (!usable(candidate)) {
                flag(Block::alpha);
                record(Block::alpha, key, false, adapting);
                return;
            }
            // Beta(tau1, tau2) density times the logit Jacobian a (1 - a),
            // written in x so neither end loses precision.
            auto log_prior = [&](double v) { return -st.tau[0] * softplus(-v) - st.tau[1] * softplus(v); };
            double ratio = weighted_log(2, candidate) - weighted_log(2, current_column(2)) + log_prior(x) -
                           log_prior(alpha_logit);
            ok = metropolis_accept(ratio, rng);
            if (ok) {
                st.alpha = proposal;
                alpha_logit = x;
                store_column(2, candidate);
            }
        }
        record(Block::alpha, key, ok, adapting);
    }

    void update_tau(bool adapting) {
        for (int which = 0; which < 2; ++which) {
            const std::string key = "tau_" + std::to_string(which + 1);
            double scale = proposal_scale(key, chain.proposal_scales.tau);
            const double log_term = which == 0 ? -softplus(-alpha_logit) : -softplus(alpha_logit);
            auto step = tau_step(which, st.tau, log_term, priors.tau_rate, scale, rng);
            st.tau[which] = step.value;
            record(Block::tau, key, step.accepted, adapting);
        }
    }

    void update_eta() {
        st.eta.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            try {
                st.eta[i] = normalize_eta(log_theta[i], p[i], data[i].id);
            } catch (const NumericalError& e) {
                fail_numeric(i, e.what());
            }
        }
    }

    bool active(Block b) const { return !chain.frozen.contains(b); }

    void sweep(bool adapting) {
        const bool direct_theta = model.theta_link == ThetaLink::direct;
        const bool direct_lag = model.lag_link == LagLink::direct;
        auto run = [&](Block b, auto&& fn) {
            if (!active(b)) return;
            current_block = b;
            fn();
        };
        if (direct_theta)
            run(Block::theta, [&] { update_theta(); });
        else
            run(Block::beta, [&] { update_beta(adapting); });
        if (direct_theta) run(Block::gamma, [&] { update_gamma(adapting); });
        if (direct_lag)
            run(Block::lambda, [&] { update_lambda(adapting); });
        else
            run(Block::omega, [&] { update_omega(adapting); });
        if (direct_lag) run(Block::kappa, [&] { update_kappa(adapting); });
        if (model.ell >= 2) {
            run(Block::alpha, [&] { update_alpha(adapting); });
            run(Block::tau, [&] { update_tau(adapting); });
        }
        run(Block::eta, [&] { update_eta(); });
        ++sweep_index;
    }

    ChainOutput run() {
        ChainOutput out;
        out.chain_index = chain_index;
        out.seed = chain.seed;
        out.config = chain;
        out.parameter_names = parameter_names(model, theta_cov, lag_cov);
        out.draws.reserve(static_cast<std::size_t>(chain.stored_draws()));
        for (int it = 0; it < chain.iterations; ++it) {
            const bool burning = it < chain.burn_in;
            sweep(burning);
            if (!burning && (it - chain.burn_in + 1) % chain.thin == 0) out.draws.push_back(flatten(st, model));
        }
        for (const auto& [block, tally] : tallies)
            if (tally.tried > 0)
                out.acceptance_rates[to_string(block)] = static_cast<double>(tally.accepted) / tally.tried;
        out.flagged_proposals = flagged;
        return out;
    }
};

Sampler::Sampler(const Dataset& dataset, const ModelConfig& model, const PriorConfig& priors,
                 const ChainConfig& chain, int chain_index)
    : impl_(std::make_unique<Impl>(dataset, model, priors, chain, chain_index)) {}

Sampler::~Sampler() = default;

const ParameterState& Sampler::state() const { return impl_->st; }
void Sampler::sweep(bool adapting) { impl_->sweep(adapting); }
ChainOutput Sampler::run() { return impl_->run(); }

ChainOutput run_chain(const Dataset& dataset, const ModelConfig& model, const PriorConfig& priors,
                      const ChainConfig& chain, int chain_index) {
    Sampler sampler(dataset, model, priors, chain, chain_index);
    return sampler.run();
}

std::vector<ChainOutput> run_chains(const Dataset& dataset, const ModelConfig& model, const PriorConfig& priors,
                                    const ChainConfig& chain) {
    chain.validate();
    std::vector<ChainOutput> out(static_cast<std::size_t>(chain.n_chains));
    const int outer = std::max(1, std::min(model.threads, chain.n_chains));
    ModelConfig inner = model;
    inner.threads = std::max(1, model.threads / outer);
    parallel_for(out.size(), outer,
                 [&](std::size_t c) { out[c] = run_chain(dataset, inner, priors, chain, static_cast<int>(c)); });
    return out;
}

}  // namespace curescreen
