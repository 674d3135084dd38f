#include "curescreen/model.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "curescreen/frailty.hpp"

namespace curescreen {

std::string to_string(ThetaLink link) { return link == ThetaLink::direct ? "direct" : "logit"; }
std::string to_string(LagLink link) { return link == LagLink::direct ? "direct" : "log"; }

ThetaLink parse_theta_link(const std::string& name) {
    if (name == "direct") return ThetaLink::direct;
    if (name == "logit") return ThetaLink::logit;
    throw std::invalid_argument("unknown theta link '" + name + "'");
}

LagLink parse_lag_link(const std::string& name) {
    if (name == "direct") return LagLink::direct;
    if (name == "log") return LagLink::log;
    throw std::invalid_argument("unknown lag link '" + name + "'");
}

void ModelConfig::validate() const {
    if (ell < 1 || ell > 2) throw std::invalid_argument("ell must be 1 or 2");
    timeline.validate();
    quad.validate();
    if (threads < 1) throw std::invalid_argument("threads must be at least 1");
}

ParameterState ParameterState::neutral(int ell, std::size_t theta_covariates, std::size_t lag_covariates) {
    ParameterState s;
    s.theta.assign(ell + 1, 1.0 / (ell + 1));
    s.gamma.assign(ell + 1, 1.0);
    for (int j = 1; j <= ell; ++j) {
        s.lambda.emplace_back(j, 0.5);
        s.kappa.emplace_back(j, KappaPair{});
        s.beta.emplace_back(theta_covariates + 1, 0.0);
        s.omega.emplace_back(j, std::vector<double>(lag_covariates + 1, std::log(0.5)));
    }
    s.alpha = ell >= 2 ? 0.95 : 1.0;
    return s;
}

void ParameterState::validate(const ModelConfig& config) const {
    auto fail = [](const std::string& why) { throw std::invalid_argument("invalid parameter state: " + why); };
    const int l = config.ell;
    if (static_cast<int>(theta.size()) != l + 1) fail("theta has the wrong length");
    if (static_cast<int>(gamma.size()) != l + 1) fail("gamma has the wrong length");
    if (static_cast<int>(lambda.size()) != l || static_cast<int>(kappa.size()) != l) fail("lambda/kappa shape");
    double total = std::accumulate(theta.begin(), theta.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-9) fail("theta does not sum to 1");
    for (double v : theta)
        if (!(v >= 0.0 && v <= 1.0)) fail("theta outside [0, 1]");
    for (double v : gamma)
        if (!(v > 0.0)) fail("gamma must be positive");
    for (int j = 1; j <= l; ++j) {
        if (static_cast<int>(lambda[j - 1].size()) != j || static_cast<int>(kappa[j - 1].size()) != j)
            fail("lambda/kappa row has the wrong length");
        for (double v : lambda[j - 1])
            if (!(v > 0.0) || !std::isfinite(v)) fail("lag rates must be positive");
        for (const auto& k : kappa[j - 1])
            if (!(k.shape > 0.0) || !(k.scale > 0.0)) fail("kappa must be positive");
    }
    if (!(alpha >= kAlphaFloor && alpha <= 1.0)) fail("alpha outside (0, 1]");
    if (!(tau[0] > 0.0) || !(tau[1] > 0.0)) fail("tau must be positive");
    if (config.theta_link == ThetaLink::logit && static_cast<int>(beta.size()) != l) fail("beta shape");
    if (config.lag_link == LagLink::log) {
        if (static_cast<int>(omega.size()) != l) fail("omega shape");
        for (int j = 1; j <= l; ++j)
            if (static_cast<int>(omega[j - 1].size()) != j) fail("omega row has the wrong length");
    }
}

}  // namespace curescreen
