#include "curescreen/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace curescreen {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    return in;
}

std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, sep)) out.push_back(trim(field));
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_number(const std::string& text) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || text.empty()) throw IoError("'" + text + "' is not a number");
    return v;
}

// Reads every non-blank line; returns (row number, text) pairs.
std::vector<std::pair<std::size_t, std::string>> read_lines(std::istream& in) {
    std::vector<std::pair<std::size_t, std::string>> out;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        out.emplace_back(row, line);
    }
    return out;
}

void check_field(const std::string& text, const char* what) {
    if (text.find_first_of(",\n\r\"") != std::string::npos)
        throw IoError(std::string(what) + " '" + text + "' contains a comma, quote or line break");
}

}  // namespace

std::string format_number(double value, int min_decimals) {
    if (!std::isfinite(value)) return std::isnan(value) ? "nan" : (value > 0 ? "inf" : "-inf");
    if (value == 0.0) value = 0.0;  // drop the sign of -0
    char buf[400];
    auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed);
    std::string s(buf, res.ptr);
    auto dot = s.find('.');
    int decimals = dot == std::string::npos ? 0 : static_cast<int>(s.size() - dot - 1);
    if (decimals < min_decimals) {
        if (dot == std::string::npos) s += '.';
        s.append(static_cast<std::size_t>(min_decimals - decimals), '0');
    }
    return s;
}

std::string format_exact(double value) {
    if (!std::isfinite(value)) return std::isnan(value) ? "nan" : (value > 0 ? "inf" : "-inf");
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

std::string format_list(std::span<const double> values, int min_decimals) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) s += ';';
        s += format_number(values[i], min_decimals);
    }
    return s;
}

std::vector<double> parse_list(const std::string& field) {
    std::vector<double> out;
    if (trim(field).empty()) return out;
    for (const auto& part : split(field, ';')) out.push_back(parse_number(part));
    return out;
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
    out << kDatasetHeader << '\n';
    for (const auto& r : dataset) {
        check_field(r.id, "id");
        out << r.id << ',' << format_number(r.entry_time) << ',' << format_number(r.exit_time) << ','
            << format_list(r.screenings) << ',' << format_list(r.covariates_theta) << ','
            << format_list(r.covariates_lag) << '\n';
    }
}

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
    auto out = open_out(path);
    write_dataset(out, dataset);
}

Dataset read_dataset(std::istream& in, const std::string& source, const EligibilityTimeline* timeline, int ell) {
    auto lines = read_lines(in);
    if (lines.empty()) throw IoError(source + ": empty file, expected header '" + std::string(kDatasetHeader) + "'");
    std::string header;
    for (const auto& f : split(lines.front().second, ',')) header += (header.empty() ? "" : ",") + f;
    if (header != kDatasetHeader)
        throw IoError(source + ": header must be '" + std::string(kDatasetHeader) + "', found '" + header + "'");

    Dataset out;
    std::vector<std::string> errors;
    std::set<std::string> ids;
    std::optional<std::size_t> theta_width, lag_width;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto& [row, text] = lines[i];
        auto fail = [&](const std::string& why) { errors.push_back("row " + std::to_string(row) + ": " + why); };
        auto fields = split(text, ',');
        if (fields.size() != 6) {
            fail("expected 6 fields, found " + std::to_string(fields.size()));
            continue;
        }
        SubjectRecord r;
        try {
            r.id = fields[0];
            if (r.id.empty()) throw IoError("empty id");
            r.entry_time = parse_number(fields[1]);
            r.exit_time = parse_number(fields[2]);
            r.screenings = parse_list(fields[3]);
            r.covariates_theta = parse_list(fields[4]);
            r.covariates_lag = parse_list(fields[5]);
        } catch (const IoError& e) {
            fail(e.what());
            continue;
        }
        if (!ids.insert(r.id).second) fail("duplicate id '" + r.id + "'");
        if (!theta_width) theta_width = r.covariates_theta.size();
        if (!lag_width) lag_width = r.covariates_lag.size();
        if (r.covariates_theta.size() != *theta_width || r.covariates_lag.size() != *lag_width)
            fail("covariate vector length differs from the first data row");
        if (timeline) {
            try {
                validate_record(r, *timeline);
                if (ell > 0 && enumerate_cases(r, *timeline, ell).empty())
                    throw std::invalid_argument("no trajectory with at most " + std::to_string(ell) +
                                                " screening(s) is compatible with the record");
            } catch (const std::invalid_argument& e) {
                fail(e.what());
            }
        }
        out.push_back(std::move(r));
    }
    if (!errors.empty()) {
        std::string msg = source + ": " + std::to_string(errors.size()) + " malformed row(s)";
        for (std::size_t i = 0; i < errors.size() && i < 20; ++i) msg += "\n  " + errors[i];
        if (errors.size() > 20) msg += "\n  ...";
        throw IoError(msg);
    }
    return out;
}

Dataset read_dataset(const std::filesystem::path& path, const EligibilityTimeline* timeline, int ell) {
    auto in = open_in(path);
    return read_dataset(in, path.string(), timeline, ell);
}

void write_truth(const std::filesystem::path& path, const SimulatedDataset& data) {
    auto out = open_out(path);
    out << "id,m_drawn,m_realized,lag_times,screening_times\n";
    for (std::size_t i = 0; i < data.truth.size(); ++i) {
        const auto& t = data.truth[i];
        out << data.records.at(i).id << ',' << t.m_drawn << ',' << t.m_realized << ',' << format_list(t.lag_times)
            << ',' << format_list(t.screening_times) << '\n';
    }
}

void write_chain_csv(const std::filesystem::path& path, const ChainOutput& chain) {
    auto out = open_out(path);
    for (std::size_t c = 0; c < chain.parameter_names.size(); ++c)
        out << (c ? "," : "") << chain.parameter_names[c];
    out << '\n';
    for (const auto& row : chain.draws) {
        for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_exact(row[c]);
        out << '\n';
    }
}

ChainOutput read_chain_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    auto lines = read_lines(in);
    if (lines.empty()) throw IoError(path.string() + ": empty chain file");
    ChainOutput chain;
    chain.parameter_names = split(lines.front().second, ',');
    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto fields = split(lines[i].second, ',');
        if (fields.size() != chain.parameter_names.size())
            throw IoError(path.string() + ": row " + std::to_string(lines[i].first) + " has " +
                          std::to_string(fields.size()) + " fields, expected " +
                          std::to_string(chain.parameter_names.size()));
        std::vector<double> row;
        try {
            for (const auto& f : fields) row.push_back(parse_number(f));
        } catch (const IoError& e) {
            throw IoError(path.string() + ": row " + std::to_string(lines[i].first) + ": " + e.what());
        }
        chain.draws.push_back(std::move(row));
    }
    return chain;
}

void write_curves(const std::filesystem::path& path, const std::vector<CurveGrid>& grids) {
    auto out = open_out(path);
    out << "kind,time1,time2,value\n";
    for (const auto& g : grids) {
        check_field(g.kind, "curve kind");
        for (const auto& p : g.points)
            out << g.kind << ',' << format_number(p.time1) << ',' << (p.time2 ? format_number(*p.time2) : "") << ','
                << format_exact(p.value) << '\n';
    }
}

std::vector<CurveGrid> read_curves(const std::filesystem::path& path) {
    auto in = open_in(path);
    auto lines = read_lines(in);
    std::vector<CurveGrid> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto f = split(lines[i].second, ',');
        if (f.size() != 4) throw IoError(path.string() + ": row " + std::to_string(lines[i].first) + " malformed");
        if (out.empty() || out.back().kind != f[0]) out.push_back({f[0], {}});
        CurvePoint p{parse_number(f[1]), std::nullopt, parse_number(f[3])};
        if (!f[2].empty()) p.time2 = parse_number(f[2]);
        out.back().points.push_back(p);
    }
    return out;
}

void write_summary_csv(const std::filesystem::path& path, const PosteriorSummary& summary) {
    auto out = open_out(path);
    out << "parameter,median,lower_2.5,upper_97.5,mean,sd,draws\n";
    for (const auto& p : summary.parameters)
        out << p.name << ',' << format_exact(p.median) << ',' << format_exact(p.lower) << ','
            << format_exact(p.upper) << ',' << format_exact(p.mean) << ',' << format_exact(p.sd) << ',' << p.draws
            << '\n';
}

void write_convergence_csv(const std::filesystem::path& path, const std::vector<ConvergenceRow>& rows) {
    auto out = open_out(path);
    const std::size_t chains = rows.empty() ? 0 : rows.front().geweke_z.size();
    out << "parameter,rhat";
    for (std::size_t c = 0; c < chains; ++c) out << ",geweke_z_chain" << c + 1;
    out << '\n';
    for (const auto& r : rows) {
        out << r.name << ',' << (r.rhat ? format_exact(*r.rhat) : "");
        for (const auto& z : r.geweke_z) out << ',' << (z ? format_exact(*z) : "");
        out << '\n';
    }
}

void write_hazard_csv(const std::filesystem::path& path, const std::vector<HazardBin>& bins) {
    auto out = open_out(path);
    out << "lo,hi,events,person_time,hazard\n";
    for (const auto& b : bins)
        out << format_number(b.lo) << ',' << format_number(b.hi) << ',' << format_exact(b.events) << ','
            << format_exact(b.person_time) << ',' << format_exact(b.hazard) << '\n';
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    auto out = open_out(path);
    out << text;
}

std::string read_text(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace curescreen
