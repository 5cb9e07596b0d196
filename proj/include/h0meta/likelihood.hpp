#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "h0meta/cosmology.hpp"

namespace h0meta {

/// One (time delay, Fermat potential difference) input with its standard errors.
/// phi values are always radian^2 in memory.
struct PairMeasurement {
  std::string pair_label;
  double delta_hat = 0.0;    // days
  double sigma_delta = 0.0;  // days
  double phi_hat = 0.0;      // rad^2
  double sigma_phi = 0.0;    // rad^2
};

struct LensSystem {
  std::string lens_id;
  RedshiftPair z;
  std::vector<PairMeasurement> pairs;
};

using Dataset = std::vector<LensSystem>;

using KappaMap = std::map<std::string, double>;

struct ModelParams {
  Cosmology cosmo;
  KappaMap kappa_ext;  // keyed by lens_id
};

enum class ErrorModel { student_t4, gaussian };

const char* to_string(ErrorModel err);
ErrorModel parse_error_model(const std::string& name);

/// Degrees of freedom of the robust error law (inverse-Gamma(2,2) variance mixing).
inline constexpr double kStudentDof = 4.0;

namespace prior {
inline constexpr double h0_max = 150.0;
inline constexpr double omega_min = 0.05;
inline constexpr double omega_max = 0.5;
inline constexpr double kappa_scale = 0.025;
}  // namespace prior

struct LocationScale {
  double location;
  double scale;
};

/// Throws ConfigError on an empty lens, duplicate labels/ids or non-positive errors.
void validate(const LensSystem& lens);
void validate(const Dataset& data);
std::size_t count_pairs(const Dataset& data);

/// Location and scale of the predictive law of phi_hat given the delay estimate.
/// `ddt` is the time-delay distance in Mpc (without external convergence).
LocationScale location_scale(const PairMeasurement& pair, double kappa, double ddt) noexcept;

LocationScale location_scale_for_pair(const ModelParams& params, const LensSystem& lens,
                                      const PairMeasurement& pair);

/// Log density of the nu = 4 location-scale Student t. Throws DomainError for scale <= 0.
double student_t_log_density(double x, double location, double scale);
double gaussian_log_density(double x, double location, double scale);
double error_log_density(ErrorModel err, double x, double location, double scale);

double pair_log_likelihood(const ModelParams& params, const LensSystem& lens,
                           const PairMeasurement& pair, ErrorModel err);

/// Sum over all pairs of all lenses. Throws ConfigError if a lens has no kappa entry.
double log_likelihood(const Dataset& data, const ModelParams& params, ErrorModel err);

double log_prior(const ModelParams& params);
double log_posterior(const Dataset& data, const ModelParams& params, ErrorModel err);

/// log Cauchy(kappa; 0, 0.025), or -inf for kappa >= 1.
double kappa_log_prior(double kappa) noexcept;
bool in_support(double h0, double omega_m) noexcept;

/// Dense evaluator used by the sampler and optimizer.
///
/// Parameters are laid out as (h0, omega_m, kappa_1..kappa_K) in dataset order.
/// The H0-free distance factors depend only on Omega_m, so callers keep them
/// alongside the state and refresh them only when Omega_m changes.
class PosteriorEvaluator {
 public:
  PosteriorEvaluator(Dataset data, ErrorModel err,
                     double rel_tol = kDefaultQuadratureTolerance);

  const Dataset& dataset() const noexcept { return data_; }
  ErrorModel error_model() const noexcept { return err_; }
  std::size_t n_lenses() const noexcept { return data_.size(); }
  std::vector<std::string> lens_ids() const;

  /// Per-lens I_d I_s / (I_s - I_d) at this Omega_m.
  std::vector<double> distance_factors(double omega_m) const;

  double lens_log_likelihood(std::size_t k, double h0, double kappa, double factor) const;
  double log_likelihood(double h0, std::span<const double> kappa,
                        std::span<const double> factors) const;
  double log_prior(double h0, double omega_m, std::span<const double> kappa) const;
  /// Full log posterior; recomputes the distance factors.
  double log_posterior(double h0, double omega_m, std::span<const double> kappa) const;

  ModelParams to_params(double h0, double omega_m, std::span<const double> kappa) const;
  /// Throws ConfigError when a lens_id is missing from params.kappa_ext.
  std::vector<double> dense_kappa(const ModelParams& params) const;

 private:
  Dataset data_;
  ErrorModel err_;
  double rel_tol_;
};

}  // namespace h0meta
