#pragma once

#include <array>
#include <string>
#include <vector>

#include "curescreen/quadrature.hpp"
#include "curescreen/trajectory.hpp"

namespace curescreen {

// How theta is resolved per subject: one shared probability vector, or a
// multinomial logit in the theta covariates with category 0 as reference
// (plain expit when ell = 1).
enum class ThetaLink { direct, logit };

// How lag rates are resolved per subject: shared rates, or exp(Z' omega).
enum class LagLink { direct, log };

std::string to_string(ThetaLink link);
std::string to_string(LagLink link);
ThetaLink parse_theta_link(const std::string& name);
LagLink parse_lag_link(const std::string& name);

struct ModelConfig {
    int ell = 2;
    EligibilityTimeline timeline;
    ThetaLink theta_link = ThetaLink::direct;
    LagLink lag_link = LagLink::direct;
    QuadratureSpec quad;
    int threads = 1;

    void validate() const;
};

struct KappaPair {
    double shape = 1.0;  // kappa_jk1, Exp(b) hyperprior
    double scale = 1.0;  // kappa_jk2, InvGamma(c, d) hyperprior
};

// Per-subject expected membership over M = 0..ell.
using EtaWeights = std::vector<double>;

// One full draw of every model quantity. Ragged members are indexed by
// category j = 1..ell at position j - 1 and by lag k = 1..j at k - 1.
struct ParameterState {
    std::vector<double> theta;
    std::vector<double> gamma;
    std::vector<std::vector<double>> lambda;
    std::vector<std::vector<KappaPair>> kappa;
    double alpha = 1.0;
    std::array<double, 2> tau{1.0, 1.0};
    std::vector<std::vector<double>> beta;                // [j-1][coefficient], logit link
    std::vector<std::vector<std::vector<double>>> omega;  // [j-1][k-1][coefficient], log link
    std::vector<EtaWeights> eta;                          // [subject][j]

    int ell() const { return static_cast<int>(theta.size()) - 1; }

    // Shapes a state for `ell` with every parameter at a neutral value.
    static ParameterState neutral(int ell, std::size_t theta_covariates = 0, std::size_t lag_covariates = 0);

    // Throws std::invalid_argument on any violated constraint.
    void validate(const ModelConfig& config) const;
};

}  // namespace curescreen
