#include "curescreen/config.hpp"

#include <cstdio>
#include <set>

namespace curescreen {

namespace {

// A JSON object being read; remembers which keys were consumed so that
// typos surface as errors instead of silently ignored settings.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail("expected an object");
    }

    [[noreturn]] void fail(const std::string& why) const { throw ConfigError((path_.empty() ? "/" : path_) + ": " + why); }

    std::string at(const std::string& key) const { return path_ + "/" + key; }

    bool has(const std::string& key) {
        if (!j_.contains(key)) return false;
        used_.insert(key);
        return true;
    }

    const json& raw(const std::string& key) {
        used_.insert(key);
        return j_.at(key);
    }

    template <class T>
    void get(const std::string& key, T& out) {
        if (!has(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(at(key) + ": wrong type (found " + j_.at(key).dump() + ")");
        }
    }

    Section child(const std::string& key) { return Section(raw(key), at(key)); }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) throw ConfigError(at(it.key()) + ": unknown setting");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

// Runs a validate() style check, prefixing its message with a JSON path.
template <class F>
void checked(const std::string& path, F&& f) {
    try {
        f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError((path.empty() ? "/" : path) + ": " + e.what());
    }
}

void check_schema(Section& s) {
    int version = kSchemaVersion;
    if (!s.has("schema_version")) s.fail("missing schema_version (expected " + std::to_string(kSchemaVersion) + ")");
    s.get("schema_version", version);
    if (version != kSchemaVersion)
        s.fail("unsupported schema_version " + std::to_string(version) + " (expected " +
               std::to_string(kSchemaVersion) + ")");
}

std::optional<double> parse_truncation(const json& j, const std::string& path) {
    if (j.is_null() || (j.is_string() && j.get<std::string>() == "none")) return std::nullopt;
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        try {
            std::size_t used = 0;
            double v = std::stod(j.get<std::string>(), &used);
            if (used == j.get<std::string>().size()) return v;
        } catch (const std::exception&) {
        }
    }
    throw ConfigError(path + ": expected a number of years or \"none\"");
}

void read_timeline(Section s, EligibilityTimeline& t) {
    s.get("refractory_years", t.refractory_years);
    if (s.has("max_lag_years")) t.max_lag_years = parse_truncation(s.raw("max_lag_years"), s.at("max_lag_years"));
    s.get("eligibility_length", t.eligibility_length);
    s.get("study_length", t.study_length);
    if (s.has("max_age")) {
        double age = 0.0;
        s.get("max_age", age);
        t.eligibility_length = age - kEligibilityStartAge;
    }
    s.finish();
}

json timeline_json(const EligibilityTimeline& t) {
    return {{"refractory_years", t.refractory_years},
            {"max_lag_years", t.max_lag_years ? json(*t.max_lag_years) : json("none")},
            {"eligibility_length", t.eligibility_length},
            {"study_length", t.study_length}};
}

BoundaryDistribution read_boundary(Section s) {
    BoundaryDistribution b;
    if (s.has("kind")) {
        std::string kind;
        s.get("kind", kind);
        checked(s.at("kind"), [&] { b.kind = parse_boundary_kind(kind); });
    }
    s.get("lo", b.lo);
    s.get("hi", b.hi);
    s.get("censored_fraction", b.censored_fraction);
    s.finish();
    return b;
}

json boundary_json(const BoundaryDistribution& b) {
    return {{"kind", to_string(b.kind)}, {"lo", b.lo}, {"hi", b.hi}, {"censored_fraction", b.censored_fraction}};
}

CensoringModel read_censoring(const json& j, const std::string& path, const EligibilityTimeline& timeline) {
    if (j.is_string()) {
        auto name = j.get<std::string>();
        if (name == "default") return CensoringModel::calibrated_default(timeline);
        if (name == "none") return CensoringModel::uncensored();
        throw ConfigError(path + ": expected \"default\", \"none\" or an object");
    }
    Section s(j, path);
    CensoringModel c;
    if (s.has("entry")) c.entry = read_boundary(s.child("entry"));
    if (s.has("exit")) c.exit = read_boundary(s.child("exit"));
    s.finish();
    return c;
}

json censoring_json(const CensoringModel& c) {
    json j{{"entry", boundary_json(c.entry)}, {"exit", boundary_json(c.exit)}};
    return j;
}

Scenario read_scenario(const json& j, const std::string& path) {
    if (j.is_string()) {
        Scenario s;
        checked(path, [&] { s = named_scenario(j.get<std::string>()); });
        return s;
    }
    Section sec(j, path);
    std::string name;
    if (!sec.has("name")) sec.fail("scenario needs a name (e.g. \"LT1-NLS1\")");
    sec.get("name", name);
    Scenario s;
    checked(sec.at("name"), [&] { s = named_scenario(name); });
    sec.get("theta", s.theta);
    sec.get("lambda", s.lambda);
    sec.get("alpha", s.alpha);
    sec.get("n_subjects", s.n_subjects);
    bool timeline_changed = false;
    if (sec.has("timeline")) {
        read_timeline(sec.child("timeline"), s.timeline);
        timeline_changed = true;
    }
    if (sec.has("censoring"))
        s.censoring = read_censoring(sec.raw("censoring"), sec.at("censoring"), s.timeline);
    else if (timeline_changed)
        s.censoring = CensoringModel::calibrated_default(s.timeline);
    if (sec.has("truncation_mode")) {
        std::string mode;
        sec.get("truncation_mode", mode);
        checked(sec.at("truncation_mode"), [&] { s.truncation_mode = parse_truncation_mode(mode); });
    }
    if (sec.has("covariate")) {
        Section cov = sec.child("covariate");
        BinaryThetaCovariate c;
        cov.get("prevalence", c.prevalence);
        cov.get("theta_when_set", c.theta_when_set);
        cov.finish();
        s.covariate = c;
    }
    sec.finish();
    return s;
}

void validate_scenario(Scenario& s, const std::string& path) {
    checked(path, [&] {
        if (s.n_subjects < 0) throw std::invalid_argument("n_subjects must be nonnegative");
        if (!(s.alpha > 0.0 && s.alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
        s.validate();
    });
}

void read_quadrature(Section s, QuadratureSpec& q) {
    if (s.has("method")) {
        std::string m;
        s.get("method", m);
        checked(s.at("method"), [&] { q.method = parse_quadrature_method(m); });
    }
    s.get("abs_tol", q.abs_tol);
    s.get("rel_tol", q.rel_tol);
    s.get("max_depth", q.max_depth);
    s.get("node_count", q.node_count);
    s.finish();
}

void read_model(Section s, ModelConfig& m) {
    s.get("ell", m.ell);
    if (s.has("theta_link")) {
        std::string v;
        s.get("theta_link", v);
        checked(s.at("theta_link"), [&] { m.theta_link = parse_theta_link(v); });
    }
    if (s.has("lag_link")) {
        std::string v;
        s.get("lag_link", v);
        checked(s.at("lag_link"), [&] { m.lag_link = parse_lag_link(v); });
    }
    if (s.has("timeline")) read_timeline(s.child("timeline"), m.timeline);
    if (s.has("quadrature")) read_quadrature(s.child("quadrature"), m.quad);
    s.get("threads", m.threads);
    s.finish();
}

void read_chain(Section s, ChainConfig& c) {
    s.get("iterations", c.iterations);
    s.get("burn_in", c.burn_in);
    s.get("thin", c.thin);
    s.get("chains", c.n_chains);
    s.get("seed", c.seed);
    s.get("adapt_during_burnin", c.adapt_during_burnin);
    s.get("target_acceptance", c.target_acceptance);
    s.get("jitter_chains", c.jitter_chains);
    if (s.has("proposal_scales")) {
        Section p = s.child("proposal_scales");
        auto& ps = c.proposal_scales;
        p.get("gamma", ps.gamma);
        p.get("lambda", ps.lambda);
        p.get("kappa", ps.kappa);
        p.get("alpha", ps.alpha);
        p.get("tau", ps.tau);
        p.get("beta", ps.beta);
        p.get("omega", ps.omega);
        p.finish();
    }
    if (s.has("frozen")) {
        std::vector<std::string> names;
        s.get("frozen", names);
        c.frozen.clear();
        checked(s.at("frozen"), [&] {
            for (const auto& n : names) c.frozen.insert(parse_block(n));
        });
    }
    s.finish();
}

void read_priors(Section s, PriorConfig& p, int ell) {
    s.get("s", p.s);
    if (s.has("kappa")) {
        const json& k = s.raw("kappa");
        if (k.is_object()) {
            Section ks(k, s.at("kappa"));
            KappaHyper h;
            ks.get("b", h.b);
            ks.get("c", h.c);
            ks.get("d", h.d);
            ks.finish();
            p.kappa.clear();
            for (int j = 1; j <= ell; ++j) p.kappa.emplace_back(j, h);
        } else if (k.is_array()) {
            // Per-lag form, as written to manifests: [[{b,c,d}], [{..}, {..}]].
            p.kappa.clear();
            for (std::size_t j = 0; j < k.size(); ++j) {
                if (!k[j].is_array()) throw ConfigError(s.at("kappa") + "/" + std::to_string(j) + ": expected a list");
                p.kappa.emplace_back();
                for (std::size_t m = 0; m < k[j].size(); ++m) {
                    Section ks(k[j][m], s.at("kappa") + "/" + std::to_string(j) + "/" + std::to_string(m));
                    KappaHyper h;
                    ks.get("b", h.b);
                    ks.get("c", h.c);
                    ks.get("d", h.d);
                    ks.finish();
                    p.kappa.back().push_back(h);
                }
            }
        } else {
            s.fail("kappa must be an object {b, c, d} or a per-lag list of them");
        }
    }
    s.get("tau_rate", p.tau_rate);
    for (auto [key, prior] : {std::pair{"beta", &p.beta}, {"omega", &p.omega}}) {
        if (!s.has(key)) continue;
        Section n = s.child(key);
        n.get("mean", prior->mean);
        n.get("variance", prior->variance);
        n.finish();
    }
    s.finish();
}

void read_grid(Section s, GridSpec& g) {
    s.get("t_max", g.t_max);
    s.get("t_step", g.t_step);
    s.get("contour_max", g.contour_max);
    s.get("contour_step", g.contour_step);
    s.get("theta_covariates", g.theta_covariates);
    s.get("lag_covariates", g.lag_covariates);
    s.finish();
}

json chain_json(const ChainConfig& c) {
    std::vector<std::string> frozen;
    for (auto b : c.frozen) frozen.push_back(to_string(b));
    const auto& p = c.proposal_scales;
    return {{"iterations", c.iterations},
            {"burn_in", c.burn_in},
            {"thin", c.thin},
            {"chains", c.n_chains},
            {"seed", c.seed},
            {"adapt_during_burnin", c.adapt_during_burnin},
            {"target_acceptance", c.target_acceptance},
            {"jitter_chains", c.jitter_chains},
            {"frozen", frozen},
            {"proposal_scales",
             {{"gamma", p.gamma},
              {"lambda", p.lambda},
              {"kappa", p.kappa},
              {"alpha", p.alpha},
              {"tau", p.tau},
              {"beta", p.beta},
              {"omega", p.omega}}}};
}

json priors_json(const PriorConfig& p) {
    json kappa = json::array();
    for (const auto& row : p.kappa) {
        json r = json::array();
        for (const auto& h : row) r.push_back({{"b", h.b}, {"c", h.c}, {"d", h.d}});
        kappa.push_back(r);
    }
    return {{"s", p.s},
            {"kappa", kappa},
            {"tau_rate", p.tau_rate},
            {"beta", {{"mean", p.beta.mean}, {"variance", p.beta.variance}}},
            {"omega", {{"mean", p.omega.mean}, {"variance", p.omega.variance}}}};
}

void apply_timeline(const Overrides& o, EligibilityTimeline& t, const std::string& path) {
    if (o.truncate_lag) t.max_lag_years = parse_truncation(json(*o.truncate_lag), path + " --truncate-lag");
    if (o.max_age) t.eligibility_length = *o.max_age - kEligibilityStartAge;
}

void apply_chain(const Overrides& o, ChainConfig& c) {
    if (o.seed) c.seed = *o.seed;
    if (o.chains) c.n_chains = *o.chains;
    if (o.iterations) c.iterations = *o.iterations;
    if (o.burn_in) c.burn_in = *o.burn_in;
    if (o.thin) c.thin = *o.thin;
}

}  // namespace

json parse_json_text(const std::string& text, const std::string& source) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        // The library message already carries "line L, column C".
        throw ConfigError(source + ": " + e.what());
    }
}

SimulateConfig parse_simulate_config(const json& doc) {
    SimulateConfig c;
    if (doc.is_null()) return c;
    Section s(doc, "");
    check_schema(s);
    if (s.has("scenario")) c.scenario = read_scenario(s.raw("scenario"), "/scenario");
    s.get("seed", c.seed);
    s.get("threads", c.threads);
    s.finish();
    validate_scenario(c.scenario, "/scenario");
    if (c.threads < 1) throw ConfigError("/threads: must be at least 1");
    return c;
}

FitConfig parse_fit_config(const json& doc) {
    FitConfig c;
    if (doc.is_null()) return c;
    Section s(doc, "");
    check_schema(s);
    if (s.has("dataset")) {
        std::string path;
        s.get("dataset", path);
        c.dataset = path;
    }
    if (s.has("model")) read_model(s.child("model"), c.model);
    checked("/model", [&] { c.model.validate(); });
    c.priors = PriorConfig::defaults(c.model.ell);
    if (s.has("priors")) read_priors(s.child("priors"), c.priors, c.model.ell);
    if (s.has("chain")) read_chain(s.child("chain"), c.chain);
    if (s.has("grid")) read_grid(s.child("grid"), c.grid);
    s.get("hazard_bin_width", c.hazard_bin_width);
    s.finish();
    checked("/priors", [&] { c.priors.validate(c.model.ell); });
    checked("/chain", [&] { c.chain.validate(); });
    if (!(c.hazard_bin_width > 0.0)) throw ConfigError("/hazard_bin_width: must be positive");
    return c;
}

StudyConfig parse_study_config(const json& doc) {
    StudyConfig c;
    if (doc.is_null()) return c;
    Section s(doc, "");
    check_schema(s);
    std::optional<int> n_subjects;
    if (s.has("n_subjects")) {
        int n = 0;
        s.get("n_subjects", n);
        n_subjects = n;
    }
    if (s.has("scenarios")) {
        const json& list = s.raw("scenarios");
        c.scenarios.clear();
        if (list.is_string() && list.get<std::string>() == "all") {
            for (const auto& name : scenario_grid_names()) c.scenarios.push_back(named_scenario(name));
        } else if (list.is_array()) {
            for (std::size_t i = 0; i < list.size(); ++i)
                c.scenarios.push_back(read_scenario(list[i], "/scenarios/" + std::to_string(i)));
        } else {
            s.fail("scenarios must be \"all\" or a list of names or scenario objects");
        }
        if (c.scenarios.empty()) throw ConfigError("/scenarios: at least one scenario is required");
    }
    s.get("replicates", c.replicates);
    s.get("seed", c.seed);
    s.get("threads", c.threads);
    s.get("inject_truth", c.inject_truth);
    if (s.has("chain")) read_chain(s.child("chain"), c.chain);
    if (s.has("model")) read_model(s.child("model"), c.model);
    s.finish();
    for (std::size_t i = 0; i < c.scenarios.size(); ++i) {
        if (n_subjects) c.scenarios[i].n_subjects = *n_subjects;
        validate_scenario(c.scenarios[i], "/scenarios/" + std::to_string(i));
    }
    if (c.replicates < 1) throw ConfigError("/replicates: must be at least 1");
    if (c.threads < 1) throw ConfigError("/threads: must be at least 1");
    checked("/chain", [&] { c.chain.validate(); });
    checked("/model", [&] { c.model.validate(); });
    return c;
}

CurvesConfig parse_curves_config(const json& doc) {
    CurvesConfig c;
    if (doc.is_null()) return c;
    Section s(doc, "");
    check_schema(s);
    if (s.has("grid")) read_grid(s.child("grid"), c.grid);
    s.finish();
    return c;
}

void apply(const Overrides& o, SimulateConfig& c) {
    if (o.seed) c.seed = *o.seed;
    if (o.threads) c.threads = *o.threads;
    if (o.ell && *o.ell != c.scenario.ell())
        throw ConfigError("--ell " + std::to_string(*o.ell) + " does not match the scenario (ell = " +
                          std::to_string(c.scenario.ell()) + ")");
    if (o.truncate_lag || o.max_age) {
        apply_timeline(o, c.scenario.timeline, "/scenario/timeline");
        c.scenario.censoring = CensoringModel::calibrated_default(c.scenario.timeline);
    }
    validate_scenario(c.scenario, "/scenario");
    if (c.threads < 1) throw ConfigError("--threads: must be at least 1");
}

void apply(const Overrides& o, FitConfig& c) {
    apply_chain(o, c.chain);
    if (o.threads) c.model.threads = *o.threads;
    if (o.ell && *o.ell != c.model.ell) {
        c.model.ell = *o.ell;
        checked("--ell", [&] { c.model.validate(); });
        c.priors = PriorConfig::defaults(c.model.ell);
    }
    apply_timeline(o, c.model.timeline, "/model/timeline");
    checked("/model", [&] { c.model.validate(); });
    checked("/chain", [&] { c.chain.validate(); });
    checked("/priors", [&] { c.priors.validate(c.model.ell); });
}

void apply(const Overrides& o, StudyConfig& c) {
    if (o.seed) c.seed = *o.seed;
    if (o.threads) c.threads = *o.threads;
    apply_chain(o, c.chain);
    if (o.ell) throw ConfigError("--ell does not apply to study runs (each scenario fixes ell)");
    if (o.truncate_lag || o.max_age)
        for (auto& s : c.scenarios) {
            apply_timeline(o, s.timeline, "/scenarios");
            s.censoring = CensoringModel::calibrated_default(s.timeline);
            validate_scenario(s, "/scenarios");
        }
    checked("/chain", [&] { c.chain.validate(); });
}

json to_json(const ModelConfig& m) {
    return {{"ell", m.ell},
            {"theta_link", to_string(m.theta_link)},
            {"lag_link", to_string(m.lag_link)},
            {"timeline", timeline_json(m.timeline)},
            {"quadrature",
             {{"method", to_string(m.quad.method)},
              {"abs_tol", m.quad.abs_tol},
              {"rel_tol", m.quad.rel_tol},
              {"max_depth", m.quad.max_depth},
              {"node_count", m.quad.node_count}}},
            {"threads", m.threads}};
}

json to_json(const ChainConfig& c) { return chain_json(c); }

json to_json(const Scenario& s) {
    json j{{"name", s.name},
           {"theta", s.theta},
           {"lambda", s.lambda},
           {"alpha", s.alpha},
           {"n_subjects", s.n_subjects},
           {"timeline", timeline_json(s.timeline)},
           {"censoring", censoring_json(s.censoring)},
           {"truncation_mode", to_string(s.truncation_mode)}};
    if (s.covariate)
        j["covariate"] = {{"prevalence", s.covariate->prevalence}, {"theta_when_set", s.covariate->theta_when_set}};
    return j;
}

json to_json(const GridSpec& g) {
    return {{"t_max", g.t_max},
            {"t_step", g.t_step},
            {"contour_max", g.contour_max},
            {"contour_step", g.contour_step},
            {"theta_covariates", g.theta_covariates},
            {"lag_covariates", g.lag_covariates}};
}

json to_json(const SimulateConfig& c) {
    return {{"schema_version", kSchemaVersion}, {"scenario", to_json(c.scenario)}, {"seed", c.seed},
            {"threads", c.threads}};
}

json to_json(const FitConfig& c) {
    json j{{"schema_version", kSchemaVersion},
           {"model", to_json(c.model)},
           {"priors", priors_json(c.priors)},
           {"chain", to_json(c.chain)},
           {"grid", to_json(c.grid)},
           {"hazard_bin_width", c.hazard_bin_width}};
    if (c.dataset) j["dataset"] = c.dataset->generic_string();
    return j;
}

json to_json(const StudyConfig& c) {
    json scenarios = json::array();
    for (const auto& s : c.scenarios) scenarios.push_back(to_json(s));
    return {{"schema_version", kSchemaVersion}, {"scenarios", scenarios}, {"replicates", c.replicates},
            {"seed", c.seed},       {"threads", c.threads},     {"chain", to_json(c.chain)},
            {"model", to_json(c.model)}, {"inject_truth", c.inject_truth}};
}

json to_json(const CurvesConfig& c) { return {{"schema_version", kSchemaVersion}, {"grid", to_json(c.grid)}}; }

ModelConfig model_from_json(const json& j) {
    ModelConfig m;
    read_model(Section(j, "/model"), m);
    checked("/model", [&] { m.validate(); });
    return m;
}

GridSpec grid_from_json(const json& j) {
    GridSpec g;
    read_grid(Section(j, "/grid"), g);
    return g;
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace curescreen
