#pragma once

// CSV datasets, key=value configuration files and run outputs.
//
// Dataset columns (header required, fixed order):
//   lens_id,z_d,z_s,pair_label,delta_hat_days,sigma_delta_days,phi_hat,sigma_phi,phi_unit
// phi_unit is arcsec2 or rad2; values are converted to rad2 on load.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "h0meta/diagnostics.hpp"
#include "h0meta/likelihood.hpp"
#include "h0meta/mcmc.hpp"
#include "h0meta/simulation.hpp"

namespace h0meta {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kDatasetHeader =
    "lens_id,z_d,z_s,pair_label,delta_hat_days,sigma_delta_days,phi_hat,sigma_phi,phi_unit";
/// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "H0META_OUTPUT_DIR";

/// 17 significant digits; round-trips every double.
std::string format_number(double x);

struct LoadOptions {
  /// Accept two-sided uncertainties written "+a/-b" and use max(|a|, |b|).
  bool conservative_se = false;
};

struct LoadedDataset {
  Dataset data;
  std::vector<std::string> diagnostics;
};

/// Larger distance from the estimate to either percentile.
double conservative_standard_error(double plus, double minus);

/// Parses "4.7" or, with conservative_se, "+4.7/-3.0". Throws ParseError.
double parse_uncertainty(const std::string& field, bool conservative_se, std::size_t line);

LoadedDataset parse_dataset(std::istream& in, const LoadOptions& options = {});
LoadedDataset load_dataset(const std::filesystem::path& path, const LoadOptions& options = {});

/// Writes phi in rad2 with 17 significant digits.
void write_dataset(std::ostream& out, const Dataset& data);
void write_dataset(const std::filesystem::path& path, const Dataset& data);

struct RunConfig {
  ErrorModel err = ErrorModel::student_t4;
  SamplerConfig sampler;
  std::filesystem::path output_dir;
  bool conservative_se = false;
};

/// key=value lines, '#' comments. Unknown keys are rejected with the line number.
RunConfig parse_run_config(std::istream& in);
RunConfig load_run_config(const std::filesystem::path& path);
std::string to_text(const RunConfig& config);

struct StudyConfig {
  PopulationSpec population;
  std::vector<double> levels{0.0, 0.1, 0.2, 0.3};
  std::vector<ErrorModel> err_models{ErrorModel::student_t4, ErrorModel::gaussian};
  SamplerConfig sampler;
  std::uint64_t seed = 1;
  std::filesystem::path output_dir;
};

StudyConfig parse_study_config(std::istream& in);
StudyConfig load_study_config(const std::filesystem::path& path);
std::string to_text(const StudyConfig& config);

struct RunManifest {
  std::string command;
  std::string dataset;
  std::string config_text;
};

/// chain_<c>.csv per chain, summary.csv (one row per parameter), study_report.csv
/// when reports are given, and manifest.txt. Throws std::runtime_error naming the path.
void write_outputs(const ChainSet& chains, const PosteriorSummary& summary,
                   std::span<const StudyReport> reports, const std::filesystem::path& dir,
                   const RunManifest& manifest);

void write_summary(std::ostream& out, const PosteriorSummary& summary);
void write_reports(std::ostream& out, std::span<const StudyReport> reports);
void write_ppc(std::ostream& out, const PpcResult& ppc);

/// Reads chain_<c>.csv files back (draws only).
ChainSet read_chains(const std::filesystem::path& dir);

/// Value of `key` in dir/manifest.txt, or empty when absent.
std::string read_manifest_value(const std::filesystem::path& dir, const std::string& key);

}  // namespace h0meta
