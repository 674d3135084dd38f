#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "curescreen/diagnostics.hpp"
#include "curescreen/likelihood.hpp"
#include "curescreen/sampler.hpp"
#include "curescreen/simulator.hpp"

namespace curescreen {

// Malformed input files; the message names the file and every bad row.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shortest decimal that reads back to the same double, padded to at least
// `min_decimals` digits after the point. Never uses exponent notation.
std::string format_number(double value, int min_decimals = 3);
// Shortest round-trip form, exponent allowed; for chain values.
std::string format_exact(double value);

std::string format_list(std::span<const double> values, int min_decimals = 3);
std::vector<double> parse_list(const std::string& field);  // ';'-separated, empty allowed

// --- Datasets -----------------------------------------------------------------

inline constexpr const char* kDatasetHeader = "id,entry_time,exit_time,screenings,covariates_theta,covariates_lag";

void write_dataset(std::ostream& out, const Dataset& dataset);
void write_dataset(const std::filesystem::path& path, const Dataset& dataset);

// Parses the dataset CSV. With a timeline every record is also checked
// against it, and with ell > 0 it must admit a feasible trajectory. Errors
// are collected and reported together by file row (the header is row 1).
Dataset read_dataset(std::istream& in, const std::string& source, const EligibilityTimeline* timeline = nullptr,
                     int ell = 0);
Dataset read_dataset(const std::filesystem::path& path, const EligibilityTimeline* timeline = nullptr, int ell = 0);

void write_truth(const std::filesystem::path& path, const SimulatedDataset& data);

// --- Chains -------------------------------------------------------------------

void write_chain_csv(const std::filesystem::path& path, const ChainOutput& chain);
ChainOutput read_chain_csv(const std::filesystem::path& path);

// --- Reports ------------------------------------------------------------------

void write_curves(const std::filesystem::path& path, const std::vector<CurveGrid>& grids);
std::vector<CurveGrid> read_curves(const std::filesystem::path& path);

void write_summary_csv(const std::filesystem::path& path, const PosteriorSummary& summary);
void write_convergence_csv(const std::filesystem::path& path, const std::vector<ConvergenceRow>& rows);

void write_hazard_csv(const std::filesystem::path& path, const std::vector<HazardBin>& bins);

// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace curescreen
