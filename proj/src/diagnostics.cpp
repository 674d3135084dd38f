#include "curescreen/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "curescreen/likelihood.hpp"

namespace curescreen {

namespace {

double mean_of(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double sample_variance(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    double m = mean_of(v), s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / (v.size() - 1);
}

std::size_t column_index(const ChainOutput& chain, const std::string& name) {
    auto it = std::find(chain.parameter_names.begin(), chain.parameter_names.end(), name);
    if (it == chain.parameter_names.end()) throw DiagnosticError("chain has no column '" + name + "'");
    return static_cast<std::size_t>(it - chain.parameter_names.begin());
}

std::string jk(int j, int k) { return std::to_string(j) + "_" + std::to_string(k); }

std::string covariate_label(const std::vector<double>& x) {
    std::string s = "[x=";
    for (std::size_t c = 0; c < x.size(); ++c) {
        if (c) s += ";";
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", x[c]);
        s += buf;
    }
    return s + "]";
}

}  // namespace

double quantile(std::vector<double> values, double p) {
    if (values.empty()) throw DiagnosticError("quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw DiagnosticError("quantile probability outside [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = (values.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] + (h - lo) * (values[lo + 1] - values[lo]);
}

const ParameterSummary& PosteriorSummary::at(const std::string& name) const {
    for (const auto& p : parameters)
        if (p.name == name) return p;
    throw DiagnosticError("summary has no parameter '" + name + "'");
}

PosteriorSummary summarize(const std::vector<ChainOutput>& chains) {
    if (chains.empty()) throw DiagnosticError("no chains to summarize");
    const auto& names = chains.front().parameter_names;
    for (const auto& c : chains)
        if (c.parameter_names != names) throw DiagnosticError("chains have different columns");
    std::size_t rows = 0;
    for (const auto& c : chains) rows += c.draws.size();
    if (rows == 0) throw DiagnosticError("chain has no stored draws");

    PosteriorSummary out;
    for (std::size_t col = 0; col < names.size(); ++col) {
        std::vector<double> v;
        v.reserve(rows);
        for (const auto& c : chains)
            for (const auto& row : c.draws) v.push_back(row[col]);
        ParameterSummary s;
        s.name = names[col];
        s.draws = v.size();
        s.mean = mean_of(v);
        s.sd = std::sqrt(sample_variance(v));
        std::sort(v.begin(), v.end());
        s.median = quantile(v, 0.5);
        s.lower = quantile(v, 0.025);
        s.upper = quantile(v, 0.975);
        out.parameters.push_back(std::move(s));
    }
    return out;
}

PosteriorSummary summarize(const ChainOutput& chain) { return summarize(std::vector<ChainOutput>{chain}); }

double spectral_density_zero(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 2) throw DiagnosticError("spectral density needs at least two values");
    const double m = mean_of(values);
    const std::size_t lags = std::max<std::size_t>(1, static_cast<std::size_t>(0.04 * n));
    auto autocov = [&](std::size_t k) {
        double s = 0.0;
        for (std::size_t t = 0; t + k < n; ++t) s += (values[t] - m) * (values[t + k] - m);
        return s / n;
    };
    double total = autocov(0);
    for (std::size_t k = 1; k <= lags && k < n; ++k)
        total += 2.0 * (1.0 - static_cast<double>(k) / (lags + 1)) * autocov(k);
    return total;
}

double geweke(std::span<const double> values, double frac_a, double frac_b) {
    if (values.size() < 100) throw DiagnosticError("Geweke diagnostic needs at least 100 draws");
    if (!(frac_a > 0.0 && frac_b > 0.0 && frac_a + frac_b <= 1.0))
        throw DiagnosticError("Geweke fractions must be positive and sum to at most 1");
    const std::size_t n = values.size();
    const auto na = static_cast<std::size_t>(frac_a * n);
    const auto nb = static_cast<std::size_t>(frac_b * n);
    auto a = values.subspan(0, na);
    auto b = values.subspan(n - nb, nb);
    const double var = spectral_density_zero(a) / na + spectral_density_zero(b) / nb;
    if (!(var > 0.0) || !std::isfinite(var)) throw DiagnosticError("Geweke diagnostic undefined: zero variance");
    return (mean_of(a) - mean_of(b)) / std::sqrt(var);
}

double gelman_rubin(const std::vector<std::vector<double>>& chains) {
    if (chains.size() < 2) throw DiagnosticError("Gelman-Rubin needs at least two chains");
    const std::size_t n = chains.front().size();
    for (const auto& c : chains)
        if (c.size() != n) throw DiagnosticError("Gelman-Rubin needs chains of equal length");
    if (n < 2) throw DiagnosticError("Gelman-Rubin needs at least two draws per chain");
    std::vector<double> means, variances;
    for (const auto& c : chains) {
        means.push_back(mean_of(c));
        variances.push_back(sample_variance(c));
    }
    const double w = mean_of(variances);
    if (!(w > 0.0)) throw DiagnosticError("Gelman-Rubin undefined: zero within-chain variance");
    const double b = n * sample_variance(means);
    const double v = (n - 1.0) / n * w + b / n;
    return std::sqrt(v / w);
}

std::vector<ConvergenceRow> convergence_report(const std::vector<ChainOutput>& chains) {
    if (chains.empty()) throw DiagnosticError("no chains to diagnose");
    const auto& names = chains.front().parameter_names;
    std::vector<ConvergenceRow> out;
    for (const auto& name : names) {
        ConvergenceRow row;
        row.name = name;
        std::vector<std::vector<double>> columns;
        for (const auto& c : chains) {
            columns.push_back(c.column(name));
            try {
                row.geweke_z.push_back(geweke(columns.back()));
            } catch (const DiagnosticError&) {
                row.geweke_z.push_back(std::nullopt);
            }
        }
        try {
            row.rhat = gelman_rubin(columns);
        } catch (const DiagnosticError&) {
            row.rhat = std::nullopt;
        }
        out.push_back(std::move(row));
    }
    return out;
}

ParameterState state_from_draw(const ChainOutput& chain, std::size_t row, const ModelConfig& model) {
    if (row >= chain.draws.size()) throw DiagnosticError("draw index out of range");
    const auto& values = chain.draws[row];
    auto get = [&](const std::string& name) { return values[column_index(chain, name)]; };
    auto has = [&](const std::string& name) {
        return std::find(chain.parameter_names.begin(), chain.parameter_names.end(), name) !=
               chain.parameter_names.end();
    };
    auto width = [&](const std::string& prefix) {
        std::size_t c = 0;
        while (has(prefix + std::to_string(c))) ++c;
        return c;
    };
    const int l = model.ell;
    const std::size_t tc = model.theta_link == ThetaLink::logit ? width("beta_1_") - 1 : 0;
    const std::size_t lc = model.lag_link == LagLink::log ? width("omega_1_1_") - 1 : 0;
    auto st = ParameterState::neutral(l, tc, lc);
    if (model.theta_link == ThetaLink::direct) {
        for (int j = 0; j <= l; ++j) {
            st.theta[j] = get("theta_" + std::to_string(j));
            st.gamma[j] = get("gamma_" + std::to_string(j));
        }
    } else {
        for (int j = 1; j <= l; ++j)
            for (std::size_t c = 0; c <= tc; ++c) st.beta[j - 1][c] = get("beta_" + jk(j, static_cast<int>(c)));
    }
    for (int j = 1; j <= l; ++j)
        for (int k = 1; k <= j; ++k) {
            if (model.lag_link == LagLink::direct) {
                st.lambda[j - 1][k - 1] = get("lambda_" + jk(j, k));
                st.kappa[j - 1][k - 1] = {get("kappa1_" + jk(j, k)), get("kappa2_" + jk(j, k))};
            } else {
                for (std::size_t c = 0; c <= lc; ++c)
                    st.omega[j - 1][k - 1][c] = get("omega_" + jk(j, k) + "_" + std::to_string(c));
            }
        }
    if (l >= 2) {
        st.alpha = get("alpha");
        st.tau = {get("tau_1"), get("tau_2")};
    }
    return st;
}

void GridSpec::validate(const ModelConfig& model) const {
    auto fail = [](const std::string& why) { throw DiagnosticError("invalid grid: " + why); };
    if (!(t_max > 0.0) || !(t_step > 0.0)) fail("t_max and t_step must be positive");
    if (!(contour_max > 0.0) || !(contour_step > 0.0)) fail("contour_max and contour_step must be positive");
    const double cap = model.timeline.max_lag();
    if (t_max > cap) fail("t_max lies outside the lag support");
    if (model.ell >= 2 && contour_max > cap) fail("contour_max lies outside the lag support");
}

std::vector<double> GridSpec::times() const {
    std::vector<double> out;
    const auto steps = static_cast<long>(std::floor(t_max / t_step + 1e-9));
    for (long i = 0; i <= steps; ++i) out.push_back(std::min(t_max, i * t_step));
    if (out.back() < t_max - 1e-12) out.push_back(t_max);
    return out;
}

std::vector<CurveGrid> survival_grids(const ParameterState& state, const ModelConfig& model, const GridSpec& spec) {
    spec.validate(model);
    const int l = model.ell;
    const auto times = spec.times();

    SubjectRecord lag_row;
    lag_row.covariates_lag = spec.lag_covariates;
    if (model.lag_link == LagLink::log && lag_row.covariates_lag.empty())
        lag_row.covariates_lag.assign(state.omega.at(0).at(0).size() - 1, 0.0);
    std::vector<FrailtySurvival> laws;
    for (int j = 1; j <= l; ++j) laws.push_back(subject_law(state, model, lag_row, j));

    // Theta vectors to weight by: the shared one, or one per covariate row.
    std::vector<std::pair<std::string, std::vector<double>>> thetas;
    if (model.theta_link == ThetaLink::direct) {
        thetas.emplace_back("", state.theta);
    } else {
        auto rows = spec.theta_covariates;
        if (rows.empty()) rows.emplace_back(state.beta.at(0).size() - 1, 0.0);
        for (const auto& x : rows) {
            SubjectRecord r;
            r.covariates_theta = x;
            thetas.emplace_back(covariate_label(x), subject_theta(state, model, r));
        }
    }

    std::vector<CurveGrid> out;
    for (const auto& [label, theta] : thetas) {
        CurveGrid pop{"population" + label, {}};
        for (double t : times) {
            double v = theta[0];
            for (int j = 1; j <= l; ++j) v += theta[j] * laws[j - 1].marginal_survival(0, t);
            pop.points.push_back({t, std::nullopt, std::clamp(v, 0.0, 1.0)});
        }
        out.push_back(std::move(pop));
        if (l >= 2) {
            for (int k = 1; k <= l; ++k) {
                CurveGrid marginal{"marginal_" + std::to_string(k) + label, {}};
                for (double t : times) {
                    double v = 0.0;
                    for (int j = 0; j < k; ++j) v += theta[j];
                    for (int j = k; j <= l; ++j) v += theta[j] * laws[j - 1].marginal_survival(k - 1, t);
                    marginal.points.push_back({t, std::nullopt, std::clamp(v, 0.0, 1.0)});
                }
                out.push_back(std::move(marginal));
            }
        }
    }
    for (int j = 1; j <= l; ++j)
        for (int k = 1; k <= j; ++k) {
            CurveGrid cond{"conditional_" + jk(j, k), {}};
            for (double t : times)
                cond.points.push_back({t, std::nullopt, std::clamp(laws[j - 1].marginal_survival(k - 1, t), 0.0, 1.0)});
            out.push_back(std::move(cond));
        }
    if (l >= 2) {
        GridSpec contour_axis = spec;
        contour_axis.t_max = spec.contour_max;
        contour_axis.t_step = spec.contour_step;
        const auto axis = contour_axis.times();
        CurveGrid contour{"contour_2", {}};
        for (double y1 : axis)
            for (double y2 : axis) {
                std::array<double, 2> y{y1, y2};
                contour.points.push_back({y1, y2, std::clamp(laws[1].truncated_survival(y), 0.0, 1.0)});
            }
        out.push_back(std::move(contour));
    }
    return out;
}

std::vector<CurveGrid> survival_bands(const std::vector<ChainOutput>& chains, const ModelConfig& model,
                                      const GridSpec& spec, std::size_t max_draws) {
    std::size_t total = 0;
    for (const auto& c : chains) total += c.draws.size();
    if (total == 0) throw DiagnosticError("no stored draws for survival bands");
    const std::size_t stride = std::max<std::size_t>(1, (total + max_draws - 1) / std::max<std::size_t>(1, max_draws));

    std::vector<CurveGrid> shape;
    std::vector<std::vector<std::vector<double>>> values;  // [curve][point][draw]
    std::size_t seen = 0;
    for (const auto& c : chains)
        for (std::size_t r = 0; r < c.draws.size(); ++r, ++seen) {
            if (seen % stride) continue;
            auto grids = survival_grids(state_from_draw(c, r, model), model, spec);
            if (shape.empty()) {
                shape = grids;
                values.resize(grids.size());
                for (std::size_t g = 0; g < grids.size(); ++g) values[g].resize(grids[g].points.size());
            }
            for (std::size_t g = 0; g < grids.size(); ++g)
                for (std::size_t p = 0; p < grids[g].points.size(); ++p) values[g][p].push_back(grids[g].points[p].value);
        }

    std::vector<CurveGrid> out;
    for (std::size_t g = 0; g < shape.size(); ++g) {
        for (auto [suffix, prob] : {std::pair{"_lower", 0.025}, {"_median", 0.5}, {"_upper", 0.975}}) {
            CurveGrid band{shape[g].kind + suffix, shape[g].points};
            for (std::size_t p = 0; p < band.points.size(); ++p) band.points[p].value = quantile(values[g][p], prob);
            out.push_back(std::move(band));
        }
    }
    return out;
}

std::vector<HazardBin> empirical_hazard(const std::vector<Exposure>& exposures, double width, double t_max) {
    if (!(width > 0.0) || !(t_max > 0.0)) throw DiagnosticError("hazard bins need positive width and range");
    const auto n_bins = static_cast<std::size_t>(std::ceil(t_max / width - 1e-12));
    std::vector<HazardBin> bins(n_bins);
    for (std::size_t b = 0; b < n_bins; ++b) {
        bins[b].lo = b * width;
        bins[b].hi = std::min(t_max, (b + 1) * width);
    }
    for (const auto& e : exposures) {
        if (!(e.stop >= e.start) || e.start < 0.0) throw DiagnosticError("exposure interval must satisfy 0 <= start <= stop");
        for (auto& bin : bins) {
            double overlap = std::min(e.stop, bin.hi) - std::max(e.start, bin.lo);
            if (overlap > 0.0) bin.person_time += overlap;
        }
        if (e.event && e.stop < t_max) bins[std::min(n_bins - 1, static_cast<std::size_t>(e.stop / width))].events += 1.0;
    }
    for (auto& bin : bins) bin.hazard = bin.person_time > 0.0 ? bin.events / bin.person_time : 0.0;
    return bins;
}

}  // namespace curescreen
