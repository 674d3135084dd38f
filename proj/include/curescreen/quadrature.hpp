#pragma once

#include <functional>
#include <stdexcept>
#include <string>

namespace curescreen {

enum class QuadratureMethod { adaptive_simpson, fixed_gauss_legendre };

struct QuadratureSpec {
    QuadratureMethod method = QuadratureMethod::adaptive_simpson;
    double abs_tol = 1e-10;
    double rel_tol = 1e-8;
    int max_depth = 40;   // adaptive-simpson only
    int node_count = 32;  // fixed-gauss-legendre only

    void validate() const;
};

std::string to_string(QuadratureMethod method);
QuadratureMethod parse_quadrature_method(const std::string& name);

// Thrown when the adaptive rule cannot reach the requested tolerance within
// max_depth bisections. Carries the best available estimate.
class QuadratureError : public std::runtime_error {
public:
    QuadratureError(const std::string& what, double best_estimate, double achieved_error)
        : std::runtime_error(what), best_estimate_(best_estimate), achieved_error_(achieved_error) {}

    double best_estimate() const noexcept { return best_estimate_; }
    double achieved_error() const noexcept { return achieved_error_; }

private:
    double best_estimate_;
    double achieved_error_;
};

using Integrand = std::function<double(double)>;

// Integral of f over [a, b]. Neither rule evaluates f at a or b, so
// integrable endpoint singularities are allowed.
double integrate_1d(const Integrand& f, double a, double b, const QuadratureSpec& spec = {});

}  // namespace curescreen
