#pragma once

#include <span>
#include <string>
#include <vector>

#include "h0meta/likelihood.hpp"

namespace h0meta {

struct MleOptions {
  /// When false the external convergences stay at each start's values.
  bool fit_kappa = true;
  /// Simplex diameter threshold in scaled coordinates (H0/10, Om/0.05, kappa/0.025).
  double tolerance = 1e-6;
  int max_evaluations = 200000;
  /// Curvature eigenvalues below this fraction of the largest count as flat.
  double flat_ratio = 1e-6;
};

struct MleResult {
  ModelParams params;
  double log_likelihood = 0.0;
  /// Eigenvalues of the finite-difference negative Hessian, scaled coordinates, ascending.
  std::vector<double> curvature;
  bool flat_direction = false;
  std::vector<std::string> warnings;
  int evaluations = 0;
};

/// Nelder-Mead maximization of the log likelihood inside the prior box,
/// restarted from each start; the best optimum wins.
/// Throws ConfigError when no start lies inside the support.
MleResult mle_fit(const Dataset& data, ErrorModel err, std::span<const ModelParams> starts,
                  const MleOptions& options = {});

}  // namespace h0meta
