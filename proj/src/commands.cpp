#include "curescreen/commands.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>

#include "curescreen/io.hpp"
#include "curescreen/quadrature.hpp"

namespace curescreen {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json chain_sidecar(const ChainOutput& c, const FitConfig& config, std::optional<double> seconds) {
    json j{{"chain_index", c.chain_index},
           {"seed", c.seed},
           {"stored_draws", c.draws.size()},
           {"columns", c.parameter_names},
           {"chain", to_json(c.config)},
           {"model", to_json(config.model)},
           {"acceptance_rates", c.acceptance_rates},
           {"flagged_proposals", c.flagged_proposals}};
    if (seconds) j["wall_clock_seconds"] = *seconds;
    return j;
}

json summary_json(const PosteriorSummary& summary, const std::vector<ConvergenceRow>& conv) {
    json params = json::array();
    for (const auto& p : summary.parameters)
        params.push_back({{"name", p.name},
                          {"median", p.median},
                          {"lower", p.lower},
                          {"upper", p.upper},
                          {"mean", p.mean},
                          {"sd", p.sd},
                          {"draws", p.draws}});
    json rows = json::array();
    for (const auto& r : conv) {
        json z = json::array();
        for (const auto& v : r.geweke_z) z.push_back(v ? json(*v) : json(nullptr));
        rows.push_back({{"name", r.name}, {"rhat", r.rhat ? json(*r.rhat) : json(nullptr)}, {"geweke_z", z}});
    }
    return {{"parameters", params}, {"convergence", rows}};
}

void write_manifest(const fs::path& out, const std::string& command, const json& effective, const RunInfo& info,
                    const json& seed, const json& inputs, const std::vector<std::string>& outputs,
                    std::optional<double> seconds) {
    json m{{"command", command},
           {"config_hash", fnv1a_hex(effective.dump())},
           {"config_path", info.config_path},
           {"effective_config", effective},
           {"seed", seed},
           {"inputs", inputs},
           {"outputs", outputs},
           {"versions", {{"curescreen", kVersion}, {"schema_version", kSchemaVersion}}}};
    if (seconds) m["wall_clock_seconds"] = *seconds;
    write_text(out / "manifest.json", dump(m));
}

std::optional<double> elapsed(const RunInfo& info, Clock::time_point start) {
    if (!info.record_timing) return std::nullopt;
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Time from becoming due (or from entry) to the first observed screening.
std::vector<Exposure> first_screening_exposures(const Dataset& data) {
    std::vector<Exposure> out;
    for (const auto& r : data) {
        if (r.screenings.empty())
            out.push_back({r.entry_time, r.exit_time, false});
        else
            out.push_back({r.entry_time, r.screenings.front(), true});
    }
    return out;
}

}  // namespace

void cmd_simulate(const SimulateConfig& config, const fs::path& out, const RunInfo& info) {
    const auto start = Clock::now();
    const auto& sc = config.scenario;
    auto data = generate_dataset(sc, config.seed, config.threads);
    const std::string name = sc.name;
    write_dataset(out / (name + ".csv"), data.records);
    write_truth(out / (name + ".truth.csv"), data);
    json scenario{{"scenario", to_json(sc)}, {"seed", config.seed}, {"subjects", data.records.size()}};
    write_text(out / (name + ".scenario.json"), dump(scenario));
    write_manifest(out, "simulate", to_json(config), info, config.seed, json::object(),
                   {name + ".csv", name + ".truth.csv", name + ".scenario.json"}, elapsed(info, start));
}

void cmd_fit(const FitConfig& config, const fs::path& out, const RunInfo& info) {
    const auto start = Clock::now();
    if (!config.dataset) throw ConfigError("/dataset: no dataset given (use --data or the config's dataset field)");
    auto data = read_dataset(*config.dataset, &config.model.timeline, config.model.ell);
    try {
        validate_dataset(data, config.model);
    } catch (const std::invalid_argument& e) {
        throw IoError(config.dataset->string() + ": " + e.what());
    }
    auto chains = run_chains(data, config.model, config.priors, config.chain);

    std::vector<std::string> outputs;
    for (const auto& c : chains) {
        const std::string stem = "chain_" + std::to_string(c.chain_index + 1);
        write_chain_csv(out / (stem + ".csv"), c);
        write_text(out / (stem + ".json"), dump(chain_sidecar(c, config, elapsed(info, start))));
        outputs.push_back(stem + ".csv");
        outputs.push_back(stem + ".json");
    }
    auto summary = summarize(chains);
    auto conv = convergence_report(chains);
    write_summary_csv(out / "summary.csv", summary);
    write_convergence_csv(out / "convergence.csv", conv);
    write_text(out / "summary.json", dump(summary_json(summary, conv)));
    write_hazard_csv(out / "hazard.csv", empirical_hazard(first_screening_exposures(data), config.hazard_bin_width,
                                                          config.model.timeline.eligibility_length));
    write_text(out / "fit.json", dump(to_json(config)));
    for (const char* f : {"summary.csv", "convergence.csv", "summary.json", "hazard.csv", "fit.json"})
        outputs.push_back(f);
    write_manifest(out, "fit", to_json(config), info, config.chain.seed,
                   {{"dataset", config.dataset->generic_string()}, {"subjects", data.size()}}, outputs,
                   elapsed(info, start));
}

StudyReport cmd_study(const StudyConfig& config, const fs::path& out, const RunInfo& info, std::ostream* log) {
    const auto start = Clock::now();
    fs::create_directories(out);
    std::ofstream stream(out / "replicates.csv", std::ios::binary);
    if (!stream) throw IoError("cannot write " + (out / "replicates.csv").string());
    stream << replicate_csv_header(config) << std::flush;
    const int total = static_cast<int>(config.scenarios.size()) * config.replicates;
    int done = 0;
    auto report = replicate_study(config, [&](const ReplicateResult& r) {
        stream << replicate_csv_row(config, r) << std::flush;
        ++done;
        if (log) {
            *log << "[" << done << "/" << total << "] " << config.scenarios[r.scenario].name << " replicate "
                 << r.replicate + 1 << ": " << (r.ok ? "ok" : "FAILED " + r.error) << "\n";
            log->flush();
        }
    });
    stream.close();
    write_text(out / "study_table.csv", study_table_csv(config, report));
    write_text(out / "study_cells.csv", study_cells_csv(report));
    write_manifest(out, "study", to_json(config), info, config.seed, json::object(),
                   {"replicates.csv", "study_table.csv", "study_cells.csv"}, elapsed(info, start));
    return report;
}

void cmd_curves(const fs::path& fit_dir, const CurvesConfig& config, const fs::path& out, const RunInfo& info) {
    const auto start = Clock::now();
    const json fit = parse_json_text(read_text(fit_dir / "fit.json"), (fit_dir / "fit.json").string());
    if (!fit.contains("model") || !fit.contains("chain"))
        throw IoError((fit_dir / "fit.json").string() + ": not a fit configuration");
    const ModelConfig model = model_from_json(fit["model"]);
    const int n = fit["chain"].value("chains", 0);
    std::vector<ChainOutput> chains;
    for (int c = 1; c <= n; ++c) {
        chains.push_back(read_chain_csv(fit_dir / ("chain_" + std::to_string(c) + ".csv")));
        chains.back().chain_index = c - 1;
    }
    if (chains.empty()) throw IoError(fit_dir.string() + ": no chains found");
    config.grid.validate(model);
    auto bands = survival_bands(chains, model, config.grid);
    write_curves(out / "curves.csv", bands);
    write_manifest(out, "curves", to_json(config), info, nullptr, {{"fit_dir", fit_dir.generic_string()}},
                   {"curves.csv"}, elapsed(info, start));
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Cure survival model for lifetime screening histories"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    struct Common {
        std::string config, out;
        bool record_timing = false;
        Overrides o;
        std::string truncate_lag;
        double max_age = 0.0;
        std::uint64_t seed = 0;
        int threads = 0, chains = 0, iterations = 0, burn_in = 0, thin = 0, ell = 0;
    } c;
    std::string data_path, fit_dir;

    auto add_common = [&](CLI::App* sub, bool chain_flags, bool model_flags) {
        sub->add_option("--config", c.config, "JSON configuration file")->check(CLI::ExistingFile);
        sub->add_option("--out", c.out, "Output directory")->required();
        sub->add_flag("--record-timing", c.record_timing, "Record wall-clock time in the manifest");
        if (!model_flags) return;
        sub->add_option("--seed", c.seed, "Random seed");
        sub->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--truncate-lag", c.truncate_lag, "Maximum lag in years, or none");
        sub->add_option("--max-age", c.max_age, "Maximum eligibility age in years");
        sub->add_option("--ell", c.ell, "Maximum lifetime screenings")->check(CLI::Range(1, 2));
        if (!chain_flags) return;
        sub->add_option("--chains", c.chains, "Number of chains")->check(CLI::PositiveNumber);
        sub->add_option("--iterations", c.iterations, "Iterations per chain")->check(CLI::PositiveNumber);
        sub->add_option("--burn-in", c.burn_in, "Burn-in iterations")->check(CLI::NonNegativeNumber);
        sub->add_option("--thin", c.thin, "Thinning interval")->check(CLI::PositiveNumber);
    };
    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset");
    add_common(simulate, false, true);
    auto* fit = app.add_subcommand("fit", "Sample the posterior for a dataset");
    add_common(fit, true, true);
    fit->add_option("--data", data_path, "Dataset CSV (overrides the config)")->check(CLI::ExistingFile);
    auto* study = app.add_subcommand("study", "Replicated simulation study with bias and RMSE");
    add_common(study, true, true);
    auto* curves = app.add_subcommand("curves", "Survival curve bands from a fit directory");
    add_common(curves, false, false);
    curves->add_option("--fit", fit_dir, "Directory written by fit")->required()->check(CLI::ExistingDirectory);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? 0 : 1;
    }

    auto* sub = app.get_subcommands().front();
    auto given = [&](const char* flag) { return sub->get_option_no_throw(flag) && sub->count(flag) > 0; };
    Overrides& o = c.o;
    if (given("--seed")) o.seed = c.seed;
    if (given("--threads")) o.threads = c.threads;
    if (given("--chains")) o.chains = c.chains;
    if (given("--iterations")) o.iterations = c.iterations;
    if (given("--burn-in")) o.burn_in = c.burn_in;
    if (given("--thin")) o.thin = c.thin;
    if (given("--ell")) o.ell = c.ell;
    if (given("--truncate-lag")) o.truncate_lag = c.truncate_lag;
    if (given("--max-age")) o.max_age = c.max_age;

    RunInfo info{c.config, c.record_timing};
    try {
        json doc = c.config.empty() ? json(nullptr) : parse_json_text(read_text(c.config), c.config);
        if (sub == simulate) {
            auto cfg = parse_simulate_config(doc);
            apply(o, cfg);
            cmd_simulate(cfg, c.out, info);
        } else if (sub == fit) {
            auto cfg = parse_fit_config(doc);
            apply(o, cfg);
            if (!data_path.empty())
                cfg.dataset = data_path;
            else if (cfg.dataset && cfg.dataset->is_relative() && !c.config.empty())
                cfg.dataset = fs::path(c.config).parent_path() / *cfg.dataset;
            cmd_fit(cfg, c.out, info);
        } else if (sub == study) {
            auto cfg = parse_study_config(doc);
            apply(o, cfg);
            auto report = cmd_study(cfg, c.out, info, &err);
            int failed = 0;
            for (const auto& r : report.replicates) failed += r.ok ? 0 : 1;
            if (failed) err << failed << " of " << report.replicates.size() << " replicates failed\n";
            if (failed == static_cast<int>(report.replicates.size())) return 2;
        } else {
            CurvesConfig cfg;
            if (!doc.is_null()) {
                cfg = parse_curves_config(doc);
            } else {
                const json fitted = parse_json_text(read_text(fs::path(fit_dir) / "fit.json"), fit_dir + "/fit.json");
                if (fitted.contains("grid")) cfg.grid = grid_from_json(fitted["grid"]);
            }
            cmd_curves(fit_dir, cfg, c.out, info);
        }
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const QuadratureError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "failure: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace curescreen
