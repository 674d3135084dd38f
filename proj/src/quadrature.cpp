#include "curescreen/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <vector>

namespace curescreen {

void QuadratureSpec::validate() const {
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0))
        throw std::invalid_argument("quadrature tolerances must be positive");
    if (method == QuadratureMethod::adaptive_simpson && max_depth < 1)
        throw std::invalid_argument("quadrature max_depth must be at least 1");
    if (method == QuadratureMethod::fixed_gauss_legendre && node_count < 8)
        throw std::invalid_argument("gauss-legendre node_count must be at least 8");
}

std::string to_string(QuadratureMethod method) {
    switch (method) {
    case QuadratureMethod::adaptive_simpson: return "adaptive-simpson";
    case QuadratureMethod::fixed_gauss_legendre: return "fixed-gauss-legendre";
    }
    return "unknown";
}

QuadratureMethod parse_quadrature_method(const std::string& name) {
    if (name == "adaptive-simpson") return QuadratureMethod::adaptive_simpson;
    if (name == "fixed-gauss-legendre") return QuadratureMethod::fixed_gauss_legendre;
    throw std::invalid_argument("unknown quadrature method '" + name + "'");
}

namespace {

struct GaussLegendreRule {
    std::vector<double> nodes;    // on (-1, 1)
    std::vector<double> weights;
};

GaussLegendreRule build_rule(int n) {
    GaussLegendreRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

const GaussLegendreRule& gauss_legendre_rule(int n) {
    static std::mutex mutex;
    static std::map<int, GaussLegendreRule> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, build_rule(n)).first;
    return it->second;
}

double gauss_legendre(const Integrand& f, double a, double b, int n) {
    const auto& rule = gauss_legendre_rule(n);
    double half = 0.5 * (b - a);
    double mid = 0.5 * (a + b);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
    return half * sum;
}

// Adaptive Simpson on u in [0, 1] after x = a + (b - a) u^2 (3 - 2u). The
// Jacobian vanishes at both ends so endpoint values are exactly zero and f is
// only ever sampled strictly inside (a, b).
class SmoothedSimpson {
public:
    SmoothedSimpson(const Integrand& f, double a, double b, int max_depth)
        : f_(f), a_(a), width_(b - a), max_depth_(max_depth) {}

    double eval(double u) const {
        if (u <= 0.0 || u >= 1.0) return 0.0;
        double x = a_ + width_ * u * u * (3.0 - 2.0 * u);
        double jac = 6.0 * u * (1.0 - u) * width_;
        return f_(x) * jac;
    }

    double integrate() {
        constexpr int panels = 8;
        double total = 0.0;
        std::array<double, panels + 1> fu{};
        std::array<double, panels> fm{};
        std::array<double, panels> whole{};
        for (int i = 0; i <= panels; ++i) fu[i] = eval(static_cast<double>(i) / panels);
        double coarse = 0.0;
        for (int i = 0; i < panels; ++i) {
            double lo = static_cast<double>(i) / panels;
            double hi = static_cast<double>(i + 1) / panels;
            fm[i] = eval(0.5 * (lo + hi));
            whole[i] = (hi - lo) / 6.0 * (fu[i] + 4.0 * fm[i] + fu[i + 1]);
            coarse += whole[i];
        }
        tol_ = tol(coarse);
        for (int i = 0; i < panels; ++i) {
            double lo = static_cast<double>(i) / panels;
            double hi = static_cast<double>(i + 1) / panels;
            total += recurse(lo, hi, fu[i], fm[i], fu[i + 1], whole[i], tol_ / panels, 0);
        }
        return total;
    }

    std::function<double(double)> tol;
    double unresolved_error() const { return unresolved_; }
    double target() const { return tol_; }

private:
    double recurse(double lo, double hi, double flo, double fmid, double fhi, double whole, double eps,
                   int depth) {
        double mid = 0.5 * (lo + hi);
        double lm = 0.5 * (lo + mid);
        double rm = 0.5 * (mid + hi);
        double flm = eval(lm);
        double frm = eval(rm);
        double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
        double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
        double delta = left + right - whole;
        if (std::abs(delta) <= 15.0 * eps) return left + right + delta / 15.0;
        if (depth >= max_depth_) {
            unresolved_ += std::abs(delta) / 15.0;
            return left + right + delta / 15.0;
        }
        return recurse(lo, mid, flo, flm, fmid, left, 0.5 * eps, depth + 1) +
               recurse(mid, hi, fmid, frm, fhi, right, 0.5 * eps, depth + 1);
    }

    const Integrand& f_;
    double a_;
    double width_;
    int max_depth_;
    double tol_ = 0.0;
    double unresolved_ = 0.0;
};

}  // namespace

double integrate_1d(const Integrand& f, double a, double b, const QuadratureSpec& spec) {
    if (!(a <= b)) throw std::invalid_argument("integrate_1d requires a <= b");
    if (a == b) return 0.0;
    if (spec.method == QuadratureMethod::fixed_gauss_legendre) return gauss_legendre(f, a, b, spec.node_count);

    SmoothedSimpson rule(f, a, b, spec.max_depth);
    rule.tol = [&](double coarse) { return std::max(spec.abs_tol, spec.rel_tol * std::abs(coarse)); };
    double result = rule.integrate();
    if (!std::isfinite(result)) throw QuadratureError("integrand produced a non-finite value", result, INFINITY);
    if (rule.unresolved_error() > rule.target())
        throw QuadratureError("adaptive simpson exceeded max_depth before reaching tolerance", result,
                              rule.unresolved_error());
    return result;
}

}  // namespace curescreen
