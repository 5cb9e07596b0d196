#pragma once

// Synthetic lens populations and outlier-robustness studies.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "h0meta/diagnostics.hpp"
#include "h0meta/likelihood.hpp"
#include "h0meta/mcmc.hpp"

namespace h0meta {

enum class NoiseMode { fix_at_truth, gaussian_noise };
enum class DelaySign { negative, positive, random };

const char* to_string(NoiseMode mode);
NoiseMode parse_noise_mode(const std::string& name);
const char* to_string(DelaySign sign);
DelaySign parse_delay_sign(const std::string& name);

struct Range {
  double lo;
  double hi;
};

struct PopulationSpec {
  std::size_t n_quads = 12;
  std::size_t n_doubles = 4;
  double h0_true = 70.0;
  double omega_true = 0.3;
  double kappa_sd = 0.025;
  double cv_inputs = 0.03;
  NoiseMode noise_mode = NoiseMode::fix_at_truth;
  Range z_d{0.2, 0.8};
  Range z_s{1.0, 3.0};
  /// |delay| is log-uniform over this range, in days.
  Range delay_days{5.0, 120.0};
  DelaySign delay_sign = DelaySign::negative;

  void validate() const;
};

struct PopulationTruth {
  Cosmology cosmo;
  std::vector<double> kappa;
  /// True delays and Fermat differences, per lens, in pair order.
  std::vector<std::vector<double>> delta;
  std::vector<std::vector<double>> phi;
};

struct Population {
  Dataset data;
  PopulationTruth truth;
};

/// Quads come first (pairs AB, AC, AD), then doubles (pair AB).
Population generate_population(const PopulationSpec& spec, Rng& rng);

struct ContaminationPlan {
  /// Flattened pair indices (dataset order).
  std::vector<std::size_t> target_pair_indices;
  double shift_multiplier = 10.0;
};

/// delta_hat += multiplier * sigma_delta on every targeted pair; sigma_delta unchanged.
/// Throws ConfigError for duplicate or out-of-range indices.
Dataset inject_outliers(const Dataset& data, const ContaminationPlan& plan);

/// Flattened indices of the first pair of the first `count` lenses.
std::vector<std::size_t> first_pair_indices(const Dataset& data, std::size_t count);

/// ceil(level * n_pairs), robust to the representation error of `level`.
std::size_t outlier_count(double level, std::size_t n_pairs);

struct StudyCell {
  double level = 0.0;
  std::size_t n_outliers = 0;
  ErrorModel err = ErrorModel::student_t4;
  StudyReport report;
  double h0_rhat = 0.0;
  double h0_ess = 0.0;
  double h0_acceptance = 0.0;
  ChainSet chains;
};

struct StudyResult {
  Population population;
  std::vector<StudyCell> cells;
};

/// For each level x error model: contaminate the first-pair slots, fit, evaluate.
/// The population uses sub-seed 0 of `seed`; cell i uses sub-seed i + 1.
StudyResult run_study(const PopulationSpec& spec, std::span<const double> levels,
                      std::span<const ErrorModel> err_models, const SamplerConfig& sampler,
                      std::uint64_t seed, bool keep_chains = false);

}  // namespace h0meta
