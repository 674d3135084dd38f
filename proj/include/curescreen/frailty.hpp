#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace curescreen {

// Smallest stable index a model state may carry; alpha lies in [kAlphaFloor, 1].
inline constexpr double kAlphaFloor = 1e-100;

// Largest number of correlated lags a FrailtySurvival accepts.
inline constexpr std::size_t kMaxLags = 8;

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Laplace transform of the positive stable law, E exp(-sZ) = exp(-s^alpha).
double stable_laplace(double s, double alpha);

// Exponential lag with hazard `rate`, optionally renormalised on [0, truncation].
struct LagDistribution {
    double rate = 1.0;
    std::optional<double> truncation;

    void validate() const;
    double cumulative_hazard(double t) const { return rate * t; }
    double upper() const;  // truncation or +inf
};

double lag_cdf(const LagDistribution& dist, double t);
double lag_density(const LagDistribution& dist, double t);

// Median of a single lag whose untruncated survival is exp(-(rate t)^alpha),
// restricted to the truncation support when present. alpha = 1 gives the
// plain exponential median ln2 / rate.
double median_lag(const LagDistribution& dist, double alpha = 1.0);

// Joint survival of M exponential lags sharing a positive stable frailty:
//   S(y) = exp(-(sum_j rate_j y_j)^alpha).
// The raw members evaluate the untruncated law; the truncated_* members
// evaluate the law conditioned on every lag lying inside its truncation box,
// which coincides with the raw law when no lag is truncated.
class FrailtySurvival {
public:
    FrailtySurvival(std::vector<LagDistribution> lags, double alpha);

    std::size_t dimension() const { return lags_.size(); }
    double alpha() const { return alpha_; }
    const std::vector<LagDistribution>& lags() const { return lags_; }
    bool truncated() const { return any_truncated_; }

    double cumulative_hazard(std::span<const double> y) const;
    double joint_survival(std::span<const double> y) const;
    // -dS/dy_k: density in coordinate k, survival in the others.
    double neg_partial_density(std::span<const double> y, std::size_t k) const;
    // (-1)^M d^M S / dy_1..dy_M, closed form for M <= 2.
    double full_density(std::span<const double> y) const;

    double log_joint_survival(std::span<const double> y) const;
    double log_neg_partial_density(std::span<const double> y, std::size_t k) const;
    double log_full_density(std::span<const double> y) const;

    // Probability that every lag falls inside its truncation box.
    double support_mass() const { return support_mass_; }
    // The truncated forms return NaN when several lags have rates so small
    // that the box mass cannot be resolved in double precision.
    double truncated_survival(std::span<const double> y) const;
    double truncated_neg_partial(std::span<const double> y, std::size_t k) const;
    double truncated_density(std::span<const double> y) const;

    // Marginal survival and median of lag k under the truncated law.
    double marginal_survival(std::size_t k, double t) const;
    double marginal_median(std::size_t k) const;

private:
    void check_dimension(std::span<const double> y) const;
    double partial_at_hazard(double big_lambda, std::size_t k) const;
    // magnitude, when given, receives the sum of absolute term values.
    double survival_box_sum(std::span<const double> y, std::size_t skip, double* magnitude = nullptr) const;

    std::vector<LagDistribution> lags_;
    double alpha_;
    // Single truncated lag whose box mass underflows; the vanishing-rate
    // limit is used instead of the ratio of two tiny numbers.
    bool tiny_single_lag() const { return any_truncated_ && support_mass_ < 1e-200; }

    bool any_truncated_ = false;
    double support_mass_ = 1.0;
    // Several lags whose box mass cancelled below working precision.
    bool mass_unresolved_ = false;
};

}  // namespace curescreen
