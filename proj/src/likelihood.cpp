#include "curescreen/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "curescreen/parallel.hpp"

namespace curescreen {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double linear_predictor(const std::vector<double>& coefficients, const std::vector<double>& covariates,
                        const std::string& what) {
    if (coefficients.size() != covariates.size() + 1)
        throw std::invalid_argument(what + " coefficient count does not match the covariate width plus intercept");
    double eta = coefficients[0];
    for (std::size_t c = 0; c < covariates.size(); ++c) eta += coefficients[c + 1] * covariates[c];
    return eta;
}

}  // namespace

std::vector<double> subject_log_theta(const ParameterState& state, const ModelConfig& config,
                                      const SubjectRecord& record) {
    const int l = config.ell;
    std::vector<double> out(l + 1);
    if (config.theta_link == ThetaLink::direct) {
        for (int j = 0; j <= l; ++j) out[j] = std::log(state.theta[j]);
        return out;
    }
    // Multinomial logit, category 0 as reference.
    out[0] = 0.0;
    for (int j = 1; j <= l; ++j) out[j] = linear_predictor(state.beta[j - 1], record.covariates_theta, "beta");
    double top = *std::max_element(out.begin(), out.end());
    double total = 0.0;
    for (double v : out) total += std::exp(v - top);
    double log_norm = top + std::log(total);
    for (double& v : out) v -= log_norm;
    return out;
}

std::vector<double> subject_theta(const ParameterState& state, const ModelConfig& config,
                                  const SubjectRecord& record) {
    auto out = subject_log_theta(state, config, record);
    for (double& v : out) v = std::exp(v);
    return out;
}

std::vector<double> subject_rates(const ParameterState& state, const ModelConfig& config,
                                  const SubjectRecord& record, int j) {
    if (config.lag_link == LagLink::direct) return state.lambda[j - 1];
    std::vector<double> rates(j);
    for (int k = 0; k < j; ++k)
        rates[k] = std::exp(linear_predictor(state.omega[j - 1][k], record.covariates_lag, "omega"));
    return rates;
}

FrailtySurvival subject_law(const ParameterState& state, const ModelConfig& config, const SubjectRecord& record,
                            int j) {
    auto rates = subject_rates(state, config, record, j);
    return category_law(rates, state.alpha, config.timeline);
}

PreparedSubject prepare_subject(const SubjectRecord& record, const ModelConfig& config) {
    PreparedSubject prepared;
    prepared.record = &record;
    prepared.cases_by_m.resize(config.ell + 1);
    for (const auto& c : enumerate_cases(record, config.timeline, config.ell)) prepared.cases_by_m[c.m].push_back(c);
    return prepared;
}

double category_probability(const PreparedSubject& subject, int j, const FrailtySurvival& law,
                            const ModelConfig& config) {
    double total = 0.0;
    for (const auto& c : subject.cases_by_m[j])
        total += case_probability(c, *subject.record, config.timeline, law, config.quad);
    return total;
}

std::vector<double> category_probabilities(const PreparedSubject& subject, const ParameterState& state,
                                           const ModelConfig& config) {
    std::vector<double> p(config.ell + 1, 0.0);
    if (subject.has_category(0)) p[0] = 1.0;
    for (int j = 1; j <= config.ell; ++j) {
        if (!subject.has_category(j)) continue;
        p[j] = category_probability(subject, j, subject_law(state, config, *subject.record, j), config);
    }
    return p;
}

EtaWeights normalize_eta(const std::vector<double>& log_theta, const std::vector<double>& probabilities,
                         const std::string& subject_id) {
    const std::size_t n = probabilities.size();
    std::vector<double> log_w(n, kNegInf);
    for (std::size_t j = 0; j < n; ++j)
        if (probabilities[j] > 0.0) log_w[j] = log_theta[j] + std::log(probabilities[j]);
    double top = *std::max_element(log_w.begin(), log_w.end());
    if (!std::isfinite(top))
        throw NumericalError("subject '" + subject_id + "': every trajectory case has zero probability");
    EtaWeights eta(n, 0.0);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (log_w[j] == kNegInf) continue;
        eta[j] = std::exp(log_w[j] - top);
        total += eta[j];
    }
    for (double& v : eta) v /= total;
    return eta;
}

EtaWeights expected_eta(const SubjectRecord& record, const ModelConfig& config, const ParameterState& state) {
    auto prepared = prepare_subject(record, config);
    auto p = category_probabilities(prepared, state, config);
    return normalize_eta(subject_log_theta(state, config, record), p, record.id);
}

double log_likelihood(const Dataset& dataset, const ParameterState& state, const ModelConfig& config) {
    if (state.eta.size() != dataset.size())
        throw std::invalid_argument("state carries eta weights for a different number of subjects");
    std::vector<double> terms(dataset.size(), 0.0);
    parallel_for(dataset.size(), config.threads, [&](std::size_t i) {
        const auto& record = dataset[i];
        auto prepared = prepare_subject(record, config);
        auto p = category_probabilities(prepared, state, config);
        auto log_theta = subject_log_theta(state, config, record);
        double sum = 0.0;
        for (int j = 0; j <= config.ell; ++j) {
            double w = state.eta[i][j];
            if (w == 0.0) continue;
            sum += w * (log_theta[j] + std::log(p[j]));
        }
        if (!std::isfinite(sum))
            throw NumericalError("subject '" + record.id + "' (row " + std::to_string(i + 1) +
                                 ") has a non-finite log-likelihood contribution");
        terms[i] = sum;
    });
    return pairwise_sum(terms);
}

void validate_dataset(const Dataset& dataset, const ModelConfig& config) {
    std::ostringstream problems;
    int count = 0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& r = dataset[i];
        try {
            if (enumerate_cases(r, config.timeline, config.ell).empty())
                throw std::invalid_argument("subject '" + r.id + "': no trajectory is compatible with the record");
            if (config.theta_link == ThetaLink::logit && r.covariates_theta.size() != dataset[0].covariates_theta.size())
                throw std::invalid_argument("subject '" + r.id + "': theta covariate width differs from row 1");
            if (config.lag_link == LagLink::log && r.covariates_lag.size() != dataset[0].covariates_lag.size())
                throw std::invalid_argument("subject '" + r.id + "': lag covariate width differs from row 1");
        } catch (const std::invalid_argument& e) {
            if (count < 20) problems << "\n  row " << i + 1 << ": " << e.what();
            ++count;
        }
    }
    if (count > 0)
        throw std::invalid_argument("dataset rejected, " + std::to_string(count) + " invalid record(s):" +
                                    problems.str());
}

}  // namespace curescreen
