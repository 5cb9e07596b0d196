#pragma once

#include <span>
#include <string>
#include <vector>

#include "h0meta/likelihood.hpp"
#include "h0meta/mcmc.hpp"

namespace h0meta {

/// Classical potential scale reduction factor sqrt(V/W) on retained draws.
/// Throws DomainError for fewer than 2 chains, fewer than 10 draws, unequal
/// lengths or zero within-chain variance.
double gelman_rubin(const std::vector<std::vector<double>>& chains);

/// Geyer initial-positive-sequence ESS of one chain, clamped to (0, N].
/// Throws DomainError for fewer than 100 draws or a constant chain.
double effective_sample_size(std::span<const double> draws);

/// Nearest-rank quantile of sorted data: element at index round(p (N - 1)).
double nearest_rank_quantile(std::span<const double> sorted, double p);

struct Interval {
  double lower;
  double upper;
};

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  Interval central68{};
  Interval central95{};
  double rhat = 0.0;  // NaN when degenerate
  double ess = 0.0;   // NaN when degenerate
  bool degenerate = false;
};

struct PosteriorSummary {
  std::size_t total_draws = 0;
  std::vector<ParameterSummary> parameters;

  const ParameterSummary& operator[](const std::string& name) const;
};

/// Pooled-across-chains moments and quantiles plus per-parameter R-hat and
/// summed per-chain ESS. Degenerate chains are flagged, not fatal.
PosteriorSummary summarize(const ChainSet& chains);

struct PpcResult {
  double global_p = 0.0;
  std::vector<double> pair_p;          // dataset pair order
  std::vector<std::string> pair_names; // "<lens_id>:<pair_label>"
  std::vector<double> t_observed;      // one per thinned posterior draw
  std::vector<double> t_replicated;
  /// Replicated phi_hat, row-major (draw x pair).
  std::vector<double> replicates;
  std::size_t n_draws = 0;
};

/// Chi-square discrepancy T = sum ((phi - location) / scale)^2.
double ppc_discrepancy(const Dataset& data, const ModelParams& params);

/// Posterior predictive check over M = min(max_draws, retained) evenly spaced draws.
/// Replicates phi_hat from the error law with delay estimates held at their observed values.
PpcResult posterior_predictive_check(const ChainSet& chains, const Dataset& data,
                                     ErrorModel err, Rng& rng, std::size_t max_draws = 1000);

struct StudyReport {
  std::string label;
  double h0_true = 0.0;
  double h0_mean = 0.0;
  double h0_sd = 0.0;
  double bias_pct = 0.0;  // signed
  double cv_pct = 0.0;
  double rmse = 0.0;
  double abs_bias_pct() const;
};

StudyReport evaluate_against_truth(double h0_mean, double h0_sd, double h0_true);

}  // namespace h0meta
