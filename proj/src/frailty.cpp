#include "curescreen/frailty.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace curescreen {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("stable index alpha must lie in (0, 1]");
}

// Root of a decreasing function g on [lo, hi] with g(lo) > 0 > g(hi).
template <class F>
double bisect_decreasing(F&& g, double lo, double hi, double tol) {
    for (int iter = 0; iter < 200 && hi - lo > tol; ++iter) {
        double mid = 0.5 * (lo + hi);
        if (g(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

double stable_laplace(double s, double alpha) {
    check_alpha(alpha);
    if (!(s >= 0.0)) throw DomainError("stable_laplace requires s >= 0");
    if (s == 0.0) return 1.0;
    if (std::isinf(s)) return 0.0;
    return std::exp(-std::pow(s, alpha));
}

void LagDistribution::validate() const {
    if (!(rate > 0.0) || !std::isfinite(rate)) throw DomainError("lag rate must be positive and finite");
    if (truncation && !(*truncation > 0.0)) throw DomainError("lag truncation must be positive");
}

double LagDistribution::upper() const { return truncation ? *truncation : kInf; }

double lag_cdf(const LagDistribution& dist, double t) {
    dist.validate();
    if (!(t >= 0.0)) throw DomainError("lag_cdf requires t >= 0");
    if (!dist.truncation) return -std::expm1(-dist.rate * t);
    double cap = *dist.truncation;
    if (t >= cap) return 1.0;
    return std::expm1(-dist.rate * t) / std::expm1(-dist.rate * cap);
}

double lag_density(const LagDistribution& dist, double t) {
    dist.validate();
    if (!(t >= 0.0)) throw DomainError("lag_density requires t >= 0");
    double raw = dist.rate * std::exp(-dist.rate * t);
    if (!dist.truncation) return raw;
    if (t > *dist.truncation) return 0.0;
    return raw / -std::expm1(-dist.rate * *dist.truncation);
}

double median_lag(const LagDistribution& dist, double alpha) {
    dist.validate();
    check_alpha(alpha);
    if (!dist.truncation) return std::pow(std::numbers::ln2, 1.0 / alpha) / dist.rate;
    double cap = *dist.truncation;
    auto survival = [&](double t) { return std::exp(-std::pow(dist.rate * t, alpha)); };
    double tail = survival(cap);
    auto excess = [&](double t) { return (survival(t) - tail) / (1.0 - tail) - 0.5; };
    return bisect_decreasing(excess, 0.0, cap, 1e-12);
}

FrailtySurvival::FrailtySurvival(std::vector<LagDistribution> lags, double alpha)
    : lags_(std::move(lags)), alpha_(alpha) {
    check_alpha(alpha_);
    if (lags_.empty()) throw DomainError("FrailtySurvival needs at least one lag");
    if (lags_.size() > kMaxLags) throw DomainError("FrailtySurvival supports at most 8 lags");
    for (const auto& lag : lags_) {
        lag.validate();
        if (lag.truncation) any_truncated_ = true;
    }
    if (any_truncated_) {
        std::array<double, kMaxLags> zero{};
        double magnitude = 0.0;
        support_mass_ =
            survival_box_sum(std::span<const double>(zero.data(), lags_.size()), lags_.size(), &magnitude);
        // Single lags have an exact small-rate limit; with several, a mass that
        // is a tiny remainder of its terms has no reliable digits left.
        mass_unresolved_ = lags_.size() > 1 && !(support_mass_ > 1e-9 * magnitude);
    }
}

void FrailtySurvival::check_dimension(std::span<const double> y) const {
    if (y.size() != lags_.size()) throw DomainError("lag vector has the wrong dimension");
    for (double v : y)
        if (!(v >= 0.0)) throw DomainError("lag values must be nonnegative");
}

double FrailtySurvival::cumulative_hazard(std::span<const double> y) const {
    check_dimension(y);
    double total = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) total += lags_[j].cumulative_hazard(y[j]);
    return total;
}

double FrailtySurvival::joint_survival(std::span<const double> y) const {
    return stable_laplace(cumulative_hazard(y), alpha_);
}

double FrailtySurvival::partial_at_hazard(double big_lambda, std::size_t k) const {
    if (std::isinf(big_lambda)) return 0.0;
    if (big_lambda == 0.0) {
        if (alpha_ < 1.0) throw DomainError("partial density is singular at the origin for alpha < 1");
        return lags_[k].rate;
    }
    double powered = std::pow(big_lambda, alpha_);
    return alpha_ * lags_[k].rate * powered / big_lambda * std::exp(-powered);
}

double FrailtySurvival::neg_partial_density(std::span<const double> y, std::size_t k) const {
    if (k >= lags_.size()) throw DomainError("observed index out of range");
    return partial_at_hazard(cumulative_hazard(y), k);
}

double FrailtySurvival::full_density(std::span<const double> y) const {
    if (lags_.size() == 1) return neg_partial_density(y, 0);
    if (lags_.size() > 2) throw DomainError("closed-form full density is only available for M <= 2");
    double big_lambda = cumulative_hazard(y);
    if (std::isinf(big_lambda)) return 0.0;
    double rates = lags_[0].rate * lags_[1].rate;
    if (big_lambda == 0.0) {
        if (alpha_ < 1.0) throw DomainError("full density is singular at the origin for alpha < 1");
        return rates;
    }
    // d^2/dL^2 exp(-L^a) = a L^(a-2) (a L^a + 1 - a) exp(-L^a)
    double powered = std::pow(big_lambda, alpha_);
    return rates * alpha_ * powered / (big_lambda * big_lambda) * (alpha_ * powered + 1.0 - alpha_) *
           std::exp(-powered);
}

double FrailtySurvival::log_joint_survival(std::span<const double> y) const {
    double big_lambda = cumulative_hazard(y);
    return -std::pow(big_lambda, alpha_);
}

double FrailtySurvival::log_neg_partial_density(std::span<const double> y, std::size_t k) const {
    if (k >= lags_.size()) throw DomainError("observed index out of range");
    double big_lambda = cumulative_hazard(y);
    if (std::isinf(big_lambda)) return -kInf;
    if (big_lambda == 0.0) {
        if (alpha_ < 1.0) throw DomainError("partial density is singular at the origin for alpha < 1");
        return std::log(lags_[k].rate);
    }
    double log_l = std::log(big_lambda);
    return std::log(alpha_) + std::log(lags_[k].rate) + (alpha_ - 1.0) * log_l - std::exp(alpha_ * log_l);
}

double FrailtySurvival::log_full_density(std::span<const double> y) const {
    if (lags_.size() == 1) return log_neg_partial_density(y, 0);
    if (lags_.size() > 2) throw DomainError("closed-form full density is only available for M <= 2");
    double big_lambda = cumulative_hazard(y);
    if (std::isinf(big_lambda)) return -kInf;
    double log_rates = std::log(lags_[0].rate) + std::log(lags_[1].rate);
    if (big_lambda == 0.0) {
        if (alpha_ < 1.0) throw DomainError("full density is singular at the origin for alpha < 1");
        return log_rates;
    }
    double log_l = std::log(big_lambda);
    double powered = std::exp(alpha_ * log_l);
    return log_rates + std::log(alpha_) + (alpha_ - 2.0) * log_l + std::log(alpha_ * powered + 1.0 - alpha_) -
           powered;
}

// Inclusion-exclusion over the truncated coordinates: the sum of
// (-1)^|A| S(z) with z_j = L_j for j in A and y_j otherwise. When skip is a
// valid coordinate the terms are -dS/dy_skip and skip is never replaced.
double FrailtySurvival::survival_box_sum(std::span<const double> y, std::size_t skip, double* magnitude) const {
    const std::size_t dim = lags_.size();
    std::array<std::size_t, kMaxLags> boxed{};
    std::size_t n_boxed = 0;
    for (std::size_t j = 0; j < dim; ++j)
        if (lags_[j].truncation && j != skip) boxed[n_boxed++] = j;

    double base = 0.0;
    for (std::size_t j = 0; j < dim; ++j) base += lags_[j].rate * y[j];

    double total = 0.0;
    for (std::size_t mask = 0; mask < (std::size_t{1} << n_boxed); ++mask) {
        double big_lambda = base;
        int sign = 1;
        for (std::size_t b = 0; b < n_boxed; ++b) {
            if (mask & (std::size_t{1} << b)) {
                std::size_t j = boxed[b];
                big_lambda += lags_[j].rate * (*lags_[j].truncation - y[j]);
                sign = -sign;
            }
        }
        // With at least one boxed coordinate the signs cancel, so summing
        // expm1 terms gives the same value without losing small differences.
        double term = skip < dim      ? partial_at_hazard(big_lambda, skip)
                      : n_boxed == 0 ? stable_laplace(big_lambda, alpha_)
                      : std::isinf(big_lambda) ? -1.0
                                                : std::expm1(-std::pow(big_lambda, alpha_));
        total += sign * term;
        if (magnitude) *magnitude += std::abs(term);
    }
    return total;
}

double FrailtySurvival::truncated_survival(std::span<const double> y) const {
    check_dimension(y);
    if (!any_truncated_) return joint_survival(y);
    for (std::size_t j = 0; j < y.size(); ++j)
        if (y[j] >= lags_[j].upper()) return 0.0;
    if (lags_.size() == 1 && tiny_single_lag()) return 1.0 - std::pow(y[0] / lags_[0].upper(), alpha_);
    if (mass_unresolved_) return kNaN;
    double value = survival_box_sum(y, lags_.size()) / support_mass_;
    return std::max(value, 0.0);
}

double FrailtySurvival::truncated_neg_partial(std::span<const double> y, std::size_t k) const {
    check_dimension(y);
    if (k >= lags_.size()) throw DomainError("observed index out of range");
    if (!any_truncated_) return neg_partial_density(y, k);
    for (std::size_t j = 0; j < y.size(); ++j) {
        if (j == k ? y[j] > lags_[j].upper() : y[j] >= lags_[j].upper()) return 0.0;
    }
    if (lags_.size() == 1 && tiny_single_lag()) {
        // Limit of the truncated density as the rate vanishes.
        double cap = lags_[0].upper();
        if (y[0] == 0.0 && alpha_ < 1.0) throw DomainError("partial density is singular at the origin for alpha < 1");
        return alpha_ * std::pow(y[0] / cap, alpha_ - 1.0) / cap;
    }
    if (mass_unresolved_) return kNaN;
    double value = survival_box_sum(y, k) / support_mass_;
    return std::max(value, 0.0);
}

double FrailtySurvival::truncated_density(std::span<const double> y) const {
    check_dimension(y);
    for (std::size_t j = 0; j < y.size(); ++j)
        if (y[j] > lags_[j].upper()) return 0.0;
    if (lags_.size() == 1 && tiny_single_lag()) return truncated_neg_partial(y, 0);
    if (mass_unresolved_) return kNaN;
    return full_density(y) / support_mass_;
}

double FrailtySurvival::marginal_survival(std::size_t k, double t) const {
    if (k >= lags_.size()) throw DomainError("lag index out of range");
    std::array<double, kMaxLags> y{};
    y[k] = t;
    return truncated_survival(std::span<const double>(y.data(), lags_.size()));
}

double FrailtySurvival::marginal_median(std::size_t k) const {
    if (k >= lags_.size()) throw DomainError("lag index out of range");
    double hi = lags_[k].upper();
    if (std::isinf(hi)) {
        hi = 1.0 / lags_[k].rate;
        while (marginal_survival(k, hi) > 0.5) hi *= 2.0;
    }
    return bisect_decreasing([&](double t) { return marginal_survival(k, t) - 0.5; }, 0.0, hi, 1e-12);
}

}  // namespace curescreen
