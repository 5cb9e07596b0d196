#pragma once

// Metropolis-Hastings-within-Gibbs sampler for (H0, Omega_m, kappa_1..K).
//
// One sweep updates H0 (Gaussian random walk, or repelling-attracting
// Metropolis for multimodal conditionals), then Omega_m and each kappa_k
// with independence proposals drawn from their priors. The H0 proposal scale
// adapts in windows during burn-in and is frozen afterwards.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "h0meta/likelihood.hpp"

namespace h0meta {

using Rng = std::mt19937_64;

enum class H0Update { random_walk, repelling_attracting };
enum class Phase { burn_in, sampling };

const char* to_string(H0Update kind);
H0Update parse_h0_update(const std::string& name);

struct SamplerConfig {
  std::size_t n_chains = 5;
  std::size_t n_iterations = 10000;
  double burn_in_fraction = 0.5;
  double target_acceptance_rw = 0.40;
  double target_acceptance_ram = 0.10;
  H0Update h0_update = H0Update::random_walk;
  double initial_h0_min = 0.01;
  double initial_h0_max = 150.0;
  double initial_proposal_sd_h0 = 15.0;
  std::size_t adaptation_window = 100;
  double adaptation_exponent = 0.6;
  /// Scale of the diminishing gain: gain_t = adaptation_gain * t^-adaptation_exponent.
  double adaptation_gain = 5.0;
  std::uint64_t seed = 1;
  /// One worker thread per chain. Results do not depend on this flag.
  bool parallel = true;

  void validate() const;
  std::size_t n_burn_in() const;
  std::size_t n_retained() const { return n_iterations - n_burn_in(); }
  /// n_chains evenly spaced starting values over [initial_h0_min, initial_h0_max].
  std::vector<double> initial_h0_grid() const;
  double h0_target_acceptance() const;
};

/// Sub-seed for chain (or study cell) `index`, derived by a SplitMix64 counter scheme.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

struct BlockCounter {
  std::uint64_t proposed = 0;
  std::uint64_t accepted = 0;
  double rate() const { return proposed ? double(accepted) / double(proposed) : 0.0; }
};

struct AcceptanceCounters {
  BlockCounter h0;
  BlockCounter omega;
  std::vector<BlockCounter> kappa;
  std::uint64_t ram_fallbacks = 0;
};

struct ChainState {
  double h0 = 0.0;
  double omega_m = 0.0;
  std::vector<double> kappa;
  /// Distance factors of every lens at omega_m (see PosteriorEvaluator).
  std::vector<double> factors;
  double log_post = 0.0;
  double proposal_sd_h0 = 1.0;
  AcceptanceCounters counters;

  ModelParams params(const PosteriorEvaluator& eval) const {
    return eval.to_params(h0, omega_m, kappa);
  }
};

/// Builds a coherent state (factors and cached log posterior filled in).
ChainState make_state(const PosteriorEvaluator& eval, double h0, double omega_m,
                      std::vector<double> kappa, double proposal_sd_h0);

// --- scalar kernels -------------------------------------------------------

using LogDensity1D = std::function<double(double)>;

struct ScalarMove {
  double value;
  double log_density;
  bool accepted;
  bool fell_back = false;
};

/// Gaussian random-walk Metropolis step.
ScalarMove rw_step(double x, double log_px, double sd, const LogDensity1D& log_p, Rng& rng);

inline constexpr std::size_t kRamMaxAttempts = 10000;

/// Repelling-attracting Metropolis step: forced downhill move, forced uphill
/// move, one auxiliary downhill draw for the acceptance ratio. A stage that
/// exhausts `max_attempts` falls back to one rw_step from x.
ScalarMove ram_step(double x, double log_px, double sd, const LogDensity1D& log_p, Rng& rng,
                    std::size_t max_attempts = kRamMaxAttempts);

// --- block updates --------------------------------------------------------

void rw_update_h0(ChainState& state, const PosteriorEvaluator& eval, Rng& rng);
void ram_update_h0(ChainState& state, const PosteriorEvaluator& eval, Rng& rng);

/// Prior-proposal update of omega_m.
void independence_update_omega(ChainState& state, const PosteriorEvaluator& eval, Rng& rng);
/// Prior-proposal update of kappa for lens index k. Throws ConfigError for k out of range.
void independence_update_kappa(ChainState& state, const PosteriorEvaluator& eval,
                               std::size_t k, Rng& rng);
/// Same, addressed by lens_id.
void independence_update_kappa(ChainState& state, const PosteriorEvaluator& eval,
                               const std::string& lens_id, Rng& rng);

/// sd * exp(gain_t * (window_acceptance - target)) with gain_t = scale * window_index^-exponent
/// during burn-in; unchanged during sampling.
double adapt_proposal_scale(double sd, double window_acceptance, Phase phase,
                            std::size_t window_index, double target,
                            double exponent = 0.6, double scale = 5.0);

/// H0, then Omega_m, then kappa_1..K. Refreshes the cached log posterior.
void gibbs_sweep(ChainState& state, const PosteriorEvaluator& eval, H0Update kind, Rng& rng);

// --- chains ---------------------------------------------------------------

struct Chain {
  std::uint64_t seed = 0;
  std::size_t n_params = 0;
  /// Retained draws, row-major (iteration x parameter).
  std::vector<double> draws;
  std::vector<double> log_post;
  /// Proposal sd after each burn-in adaptation window.
  std::vector<double> tuning_history;
  /// Proposal sd in force at every retained iteration.
  std::vector<double> proposal_sd_trace;
  AcceptanceCounters burn_in;
  AcceptanceCounters sampling;
  /// H0 at the end of burn-in (predecessor of the first retained draw).
  double h0_before_sampling = 0.0;

  std::size_t n_draws() const { return n_params ? draws.size() / n_params : 0; }
  double at(std::size_t iteration, std::size_t param) const {
    return draws[iteration * n_params + param];
  }
  std::vector<double> column(std::size_t param) const;
};

struct ChainSet {
  /// "h0", "omega_m", then "kappa_<lens_id>" in dataset order.
  std::vector<std::string> param_names;
  std::vector<Chain> chains;

  std::size_t n_params() const { return param_names.size(); }
  std::size_t total_draws() const;
  /// Per-chain draws of one parameter.
  std::vector<std::vector<double>> parameter(std::size_t param) const;
  std::size_t index_of(const std::string& name) const;
};

std::vector<std::string> parameter_names(const Dataset& data);

Chain run_chain(const PosteriorEvaluator& eval, const SamplerConfig& config,
                std::size_t chain_index);

ChainSet run_chains(const SamplerConfig& config, const Dataset& data, ErrorModel err);

}  // namespace h0meta
