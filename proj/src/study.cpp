#include "curescreen/study.hpp"

#include <cmath>
#include <regex>
#include <sstream>

#include "curescreen/io.hpp"
#include "curescreen/parallel.hpp"
#include "curescreen/random.hpp"

namespace curescreen {

namespace {

struct LayoutKey {
    std::string row_group;  // NLS part, or "" when the names do not split
    std::string column;     // LT part, or the whole name
};

std::vector<LayoutKey> layout_keys(const std::vector<std::string>& names) {
    static const std::regex pattern("^(LT[^-]+)-(NLS.+)$");
    std::vector<LayoutKey> keys;
    for (const auto& n : names) {
        std::smatch m;
        if (!std::regex_match(n, m, pattern)) {
            keys.clear();
            for (const auto& all : names) keys.push_back({"", all});
            return keys;
        }
        keys.push_back({m[2], m[1]});
    }
    return keys;
}

template <class T>
void push_unique(std::vector<T>& v, const T& x) {
    if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
}

}  // namespace

std::vector<std::string> study_parameters(int ell) {
    std::vector<std::string> out;
    for (int j = 0; j <= ell; ++j) out.push_back("theta_" + std::to_string(j));
    for (int j = 1; j <= ell; ++j)
        for (int k = 1; k <= j; ++k) out.push_back("median_lag_" + std::to_string(j) + "_" + std::to_string(k));
    if (ell >= 2) out.push_back("alpha");
    return out;
}

std::vector<double> study_truth(const Scenario& scenario) {
    const int l = scenario.ell();
    std::vector<double> out(scenario.theta.begin(), scenario.theta.end());
    for (int j = 1; j <= l; ++j) {
        auto law = category_law(scenario.lambda[j - 1], scenario.alpha, scenario.timeline);
        for (int k = 1; k <= j; ++k) out.push_back(law.marginal_median(static_cast<std::size_t>(k - 1)));
    }
    if (l >= 2) out.push_back(scenario.alpha);
    return out;
}

BiasRmse bias_rmse(const std::vector<double>& estimates, double truth) {
    BiasRmse out;
    out.count = static_cast<int>(estimates.size());
    if (estimates.empty()) return {std::nan(""), std::nan(""), 0};
    double sum = 0.0, sq = 0.0;
    for (double e : estimates) {
        sum += e - truth;
        sq += (e - truth) * (e - truth);
    }
    out.bias = sum / estimates.size();
    out.rmse = std::sqrt(sq / estimates.size());
    return out;
}

std::uint64_t replicate_seed(std::uint64_t seed, std::size_t scenario, int replicate) {
    return splitmix64(splitmix64(seed) ^ splitmix64((static_cast<std::uint64_t>(scenario) << 32) |
                                                    static_cast<std::uint32_t>(replicate)));
}

ReplicateResult run_replicate(const StudyConfig& config, std::size_t scenario, int replicate, int threads) {
    const Scenario& sc = config.scenarios.at(scenario);
    ReplicateResult r;
    r.scenario = scenario;
    r.replicate = replicate;
    r.data_seed = replicate_seed(config.seed, scenario, replicate);
    r.chain_seed = splitmix64(r.data_seed ^ 0xc3a5c85c97cb3127ull);
    if (config.inject_truth) {
        r.estimates = study_truth(sc);
        r.ok = true;
        return r;
    }
    try {
        auto data = generate_dataset(sc, r.data_seed, threads);
        ModelConfig model = config.model;
        model.ell = sc.ell();
        model.timeline = sc.timeline;
        model.threads = threads;
        ChainConfig chain = config.chain;
        chain.seed = r.chain_seed;
        auto chains = run_chains(data.records, model, PriorConfig::defaults(model.ell), chain);
        auto summary = summarize(chains);
        for (const auto& name : study_parameters(model.ell)) r.estimates.push_back(summary.at(name).median);
        r.ok = true;
    } catch (const std::exception& e) {
        r.ok = false;
        r.error = e.what();
        r.estimates.clear();
    }
    return r;
}

StudyReport score_study(const StudyConfig& config, std::vector<ReplicateResult> results) {
    StudyReport report;
    for (const auto& s : config.scenarios) report.scenario_names.push_back(s.name);
    report.replicates = std::move(results);
    for (std::size_t s = 0; s < config.scenarios.size(); ++s) {
        const auto params = study_parameters(config.scenarios[s].ell());
        const auto truth = study_truth(config.scenarios[s]);
        for (std::size_t p = 0; p < params.size(); ++p) {
            StudyCell cell{config.scenarios[s].name, params[p], truth[p], 0, 0, {}};
            std::vector<double> estimates;
            for (const auto& r : report.replicates) {
                if (r.scenario != s) continue;
                if (r.ok) {
                    estimates.push_back(r.estimates[p]);
                    ++cell.ok;
                } else {
                    ++cell.failed;
                }
            }
            cell.score = bias_rmse(estimates, truth[p]);
            report.cells.push_back(cell);
        }
    }
    return report;
}

StudyReport replicate_study(const StudyConfig& config, const std::function<void(const ReplicateResult&)>& on_result) {
    std::vector<std::pair<std::size_t, int>> jobs;
    for (std::size_t s = 0; s < config.scenarios.size(); ++s)
        for (int r = 0; r < config.replicates; ++r) jobs.emplace_back(s, r);

    // Threads go to whole replicates first; leftovers speed up each fit.
    const int outer = std::max(1, std::min<int>(config.threads, static_cast<int>(jobs.size())));
    const int inner = std::max(1, config.threads / outer);
    std::vector<ReplicateResult> results(jobs.size());
    for (std::size_t start = 0; start < jobs.size(); start += outer) {
        const std::size_t end = std::min(jobs.size(), start + outer);
        parallel_for(end - start, outer, [&](std::size_t i) {
            results[start + i] = run_replicate(config, jobs[start + i].first, jobs[start + i].second, inner);
        });
        if (on_result)
            for (std::size_t i = start; i < end; ++i) on_result(results[i]);
    }
    return score_study(config, std::move(results));
}

std::string study_table_csv(const StudyConfig& config, const StudyReport& report) {
    const auto keys = layout_keys(report.scenario_names);
    std::vector<std::string> groups, columns;
    for (const auto& k : keys) {
        push_unique(groups, k.row_group);
        push_unique(columns, k.column);
    }
    const bool grouped = !groups.front().empty();
    int max_ell = 1;
    for (const auto& s : config.scenarios) max_ell = std::max(max_ell, s.ell());
    const auto params = study_parameters(max_ell);

    // Pooled errors over the scenarios matching (group, column); "" matches all.
    auto score = [&](const std::string& group, const std::string& column, const std::string& param) {
        std::vector<double> errors;
        for (std::size_t s = 0; s < keys.size(); ++s) {
            if (!group.empty() && keys[s].row_group != group) continue;
            if (!column.empty() && keys[s].column != column) continue;
            const auto names = study_parameters(config.scenarios[s].ell());
            auto it = std::find(names.begin(), names.end(), param);
            if (it == names.end()) continue;
            const auto p = static_cast<std::size_t>(it - names.begin());
            const double truth = study_truth(config.scenarios[s])[p];
            for (const auto& r : report.replicates)
                if (r.scenario == s && r.ok) errors.push_back(r.estimates[p] - truth);
        }
        return bias_rmse(errors, 0.0);
    };
    auto cell = [](const BiasRmse& b) {
        if (b.count == 0) return std::string(",");
        return format_exact(b.bias) + "," + format_exact(b.rmse);
    };

    std::ostringstream out;
    out << "group,parameter";
    for (const auto& c : columns) out << ',' << c << "_bias," << c << "_rmse";
    out << ",total_bias,total_rmse\n";
    std::vector<std::string> row_groups = groups;
    if (grouped && groups.size() > 1) row_groups.push_back("");
    for (const auto& g : row_groups) {
        const std::string label = g.empty() ? (grouped ? "total" : "all") : g;
        for (const auto& p : params) {
            out << label << ',' << p;
            for (const auto& c : columns) out << ',' << cell(score(g, c, p));
            out << ',' << cell(score(g, "", p)) << '\n';
        }
    }
    return out.str();
}

std::string study_cells_csv(const StudyReport& report) {
    std::ostringstream out;
    out << "scenario,parameter,truth,replicates_ok,replicates_failed,bias,rmse\n";
    for (const auto& c : report.cells)
        out << c.scenario << ',' << c.parameter << ',' << format_exact(c.truth) << ',' << c.ok << ',' << c.failed
            << ',' << (c.ok ? format_exact(c.score.bias) : "") << ',' << (c.ok ? format_exact(c.score.rmse) : "")
            << '\n';
    return out.str();
}

std::string replicate_csv_header(const StudyConfig&) {
    return "scenario,replicate,data_seed,chain_seed,status,parameter,estimate,truth,error\n";
}

std::string replicate_csv_row(const StudyConfig& config, const ReplicateResult& r) {
    const Scenario& sc = config.scenarios.at(r.scenario);
    std::ostringstream out;
    const std::string prefix =
        sc.name + ',' + std::to_string(r.replicate) + ',' + std::to_string(r.data_seed) + ',' +
        std::to_string(r.chain_seed) + ',';
    if (!r.ok) {
        std::string msg = r.error;
        std::replace_if(msg.begin(), msg.end(), [](char c) { return c == ',' || c == '\n' || c == '\r'; }, ';');
        out << prefix << "failed,,,," << msg << '\n';
        return out.str();
    }
    const auto names = study_parameters(sc.ell());
    const auto truth = study_truth(sc);
    for (std::size_t p = 0; p < names.size(); ++p)
        out << prefix << "ok," << names[p] << ',' << format_exact(r.estimates[p]) << ',' << format_exact(truth[p])
            << ",\n";
    return out.str();
}

}  // namespace curescreen
