#pragma once

// Independent reference computations used only by the test suites. Nothing
// here calls into the library's numerical paths.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

// exp(-(sum rate_j y_j)^alpha) in extended precision.
inline long double survival(const std::vector<double>& rates, const std::vector<long double>& y, double alpha) {
    long double big = 0.0L;
    for (std::size_t j = 0; j < rates.size(); ++j) big += static_cast<long double>(rates[j]) * y[j];
    if (big == 0.0L) return 1.0L;
    return std::exp(-std::pow(big, static_cast<long double>(alpha)));
}

// Central differences with a step relative to the smallest coordinate and
// one Richardson extrapolation, so the error stays small near the origin
// where the derivatives vary on the scale of y itself.
inline long double fd_step(const std::vector<double>& y) {
    return 1e-3L * std::min(1.0L, static_cast<long double>(*std::min_element(y.begin(), y.end())));
}

inline double fd_partial(const std::vector<double>& rates, const std::vector<double>& y, std::size_t k, double alpha) {
    auto central = [&](long double h) {
        std::vector<long double> up(y.begin(), y.end()), down(y.begin(), y.end());
        up[k] += h;
        down[k] -= h;
        return -(survival(rates, up, alpha) - survival(rates, down, alpha)) / (2.0L * h);
    };
    const long double h = fd_step(y);
    return static_cast<double>((4.0L * central(h / 2) - central(h)) / 3.0L);
}

inline double fd_mixed(const std::vector<double>& rates, const std::vector<double>& y, double alpha) {
    auto central = [&](long double h) {
        auto at = [&](long double d0, long double d1) {
            std::vector<long double> z{y[0] + d0, y[1] + d1};
            return survival(rates, z, alpha);
        };
        return (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0L * h * h);
    };
    const long double h = fd_step(y);
    return static_cast<double>((4.0L * central(h / 2) - central(h)) / 3.0L);
}

// Positive stable variate with E exp(-sZ) = exp(-s^alpha) (Kanter's form of
// the Chambers-Mallows-Stuck construction).
template <class Rng>
double stable_variate(Rng& rng, double alpha) {
    if (alpha == 1.0) return 1.0;
    std::uniform_real_distribution<double> unif(0.0, std::numbers::pi);
    std::exponential_distribution<double> expo(1.0);
    double u = unif(rng);
    double w = expo(rng);
    double a = std::sin(alpha * u) / std::pow(std::sin(u), 1.0 / alpha);
    double b = std::pow(std::sin((1.0 - alpha) * u) / w, (1.0 - alpha) / alpha);
    return a * b;
}

// Two-sided one-sample KS statistic against a CDF.
template <class Cdf>
double ks_statistic(std::vector<double> sample, Cdf&& cdf) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        double f = cdf(sample[i]);
        d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    return d;
}

inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(i / na - j / nb));
    }
    return d;
}

// Asymptotic 1% critical values.
inline double ks_critical_1pct(std::size_t n) { return 1.628 / std::sqrt(static_cast<double>(n)); }
inline double ks_two_sample_critical_1pct(std::size_t n, std::size_t m) {
    return 1.628 * std::sqrt(static_cast<double>(n + m) / (static_cast<double>(n) * static_cast<double>(m)));
}

}  // namespace oracle
