#pragma once

#include <cstdint>
#include <array>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "curescreen/likelihood.hpp"
#include "curescreen/random.hpp"

namespace curescreen {

struct KappaHyper {
    double b = 1.0;  // Exp(b) on kappa1
    double c = 2.0;  // InvGamma(c, d) on kappa2
    double d = 1.0;
};

struct NormalPrior {
    double mean = 0.0;
    double variance = 10.0;
};

struct PriorConfig {
    std::vector<double> s;                       // Exp(s_j) on gamma_j, j = 0..ell
    std::vector<std::vector<KappaHyper>> kappa;  // [j-1][k-1]
    double tau_rate = 1.0;                       // Exp(rate) on tau1 and tau2
    NormalPrior beta;                            // every theta-link coefficient
    NormalPrior omega;                           // every lag-link coefficient

    static PriorConfig defaults(int ell);
    void validate(int ell) const;
};

enum class Block { theta, gamma, lambda, kappa, alpha, tau, eta, beta, omega };

std::string to_string(Block block);
Block parse_block(const std::string& name);

// Initial random-walk standard deviations on the transformed scale.
struct ProposalScales {
    double gamma = 0.5;
    double lambda = 0.2;
    double kappa = 0.5;
    double alpha = 0.3;
    double tau = 0.5;
    double beta = 0.2;
    double omega = 0.1;
};

struct ChainConfig {
    int iterations = 20000;
    int burn_in = 5000;
    int thin = 1;
    int n_chains = 5;
    std::uint64_t seed = 1;
    ProposalScales proposal_scales;
    bool adapt_during_burnin = true;
    double target_acceptance = 0.35;
    // Blocks held at their initial values for the whole run.
    std::set<Block> frozen;
    // Starting point for every chain instead of the data-driven default.
    std::optional<ParameterState> initial_state;
    // Perturb the starting point of chains after the first.
    bool jitter_chains = true;

    int stored_draws() const { return (iterations - burn_in) / thin; }
    void validate() const;
};

struct ChainOutput {
    int chain_index = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> parameter_names;
    std::vector<std::vector<double>> draws;  // one row per stored draw
    std::map<std::string, double> acceptance_rates;
    // Proposals rejected because their likelihood could not be evaluated.
    std::map<std::string, long> flagged_proposals;
    ChainConfig config;

    std::vector<double> column(const std::string& name) const;
};

// --- Single-block updates -------------------------------------------------

struct MhStep {
    double value;
    bool accepted;
};

// Exact Dirichlet(eta_sums + gamma) draw; entries are kept strictly inside (0, 1).
std::vector<double> sample_theta(std::span<const double> eta_sums, std::span<const double> gamma, Rng& rng);

// Log conditional of gamma_j given theta and the other gammas.
double gamma_log_conditional(int j, std::span<const double> gamma, std::span<const double> theta, double s_j);
MhStep gamma_step(int j, std::span<const double> gamma, std::span<const double> theta, double s_j, double scale,
                  Rng& rng);

double kappa1_log_conditional(double kappa1, double kappa2, double lambda, double b);
MhStep kappa1_step(double lambda, const KappaPair& kappa, double b, double scale, Rng& rng);
double kappa2_draw(double lambda, double kappa1, double c, double d, Rng& rng);

// which = 0 updates tau1, 1 updates tau2. log_term is log(alpha) for tau1 and
// log(1 - alpha) for tau2, passed in log form so alpha within rounding of 1 stays usable.
double tau_log_conditional(int which, const std::array<double, 2>& tau, double log_term, double rate);
MhStep tau_step(int which, const std::array<double, 2>& tau, double log_term, double rate, double scale, Rng& rng);

// Gamma(shape, scale) log density.
double log_gamma_density(double x, double shape, double scale);

// --- Chains ---------------------------------------------------------------

// Data-driven starting point: theta from observed-pattern frequencies, lag
// rates by moments on fully observed lags, alpha 0.95, hyperparameters at
// their prior means.
ParameterState initial_state(const Dataset& dataset, const ModelConfig& model, const PriorConfig& priors);

std::vector<std::string> parameter_names(const ModelConfig& model, std::size_t theta_covariates,
                                         std::size_t lag_covariates);
std::vector<double> flatten(const ParameterState& state, const ModelConfig& model);

class Sampler {
public:
    Sampler(const Dataset& dataset, const ModelConfig& model, const PriorConfig& priors, const ChainConfig& chain,
            int chain_index);
    ~Sampler();
    Sampler(const Sampler&) = delete;
    Sampler& operator=(const Sampler&) = delete;

    const ParameterState& state() const;
    // One Gibbs sweep; `adapting` enables proposal-scale adaptation.
    void sweep(bool adapting);
    ChainOutput run();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

ChainOutput run_chain(const Dataset& dataset, const ModelConfig& model, const PriorConfig& priors,
                      const ChainConfig& chain, int chain_index);

// All chains of `chain`; chains run concurrently when model.threads > 1.
std::vector<ChainOutput> run_chains(const Dataset& dataset, const ModelConfig& model, const PriorConfig& priors,
                                    const ChainConfig& chain);

}  // namespace curescreen
