#include "h0meta/likelihood.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include "h0meta/errors.hpp"

namespace h0meta {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// log Gamma(5/2) - log Gamma(2) - 0.5 log(4 pi) = log(3/8)
const double kLogStudentNorm = std::log(0.375);
const double kLogSqrtTwoPi = 0.5 * std::log(2.0 * std::numbers::pi);
const double kLogH0Prior = -std::log(prior::h0_max);
const double kLogOmegaPrior = -std::log(prior::omega_max - prior::omega_min);
const double kLogCauchyNorm = -std::log(std::numbers::pi * prior::kappa_scale);

double kappa_for(const ModelParams& params, const std::string& lens_id) {
  auto it = params.kappa_ext.find(lens_id);
  if (it == params.kappa_ext.end())
    throw ConfigError("no external convergence for lens '" + lens_id + "'");
  return it->second;
}

}  // namespace

const char* to_string(ErrorModel err) {
  return err == ErrorModel::student_t4 ? "student_t4" : "gaussian";
}

ErrorModel parse_error_model(const std::string& name) {
  if (name == "student_t4" || name == "t4" || name == "student") return ErrorModel::student_t4;
  if (name == "gaussian" || name == "normal") return ErrorModel::gaussian;
  throw ConfigError("unknown error model '" + name + "' (expected student_t4 or gaussian)");
}

void validate(const LensSystem& lens) {
  if (lens.pairs.empty()) throw ConfigError("lens '" + lens.lens_id + "' has no pairs");
  validate(lens.z);
  std::set<std::string> labels;
  for (const auto& p : lens.pairs) {
    if (!labels.insert(p.pair_label).second)
      throw ConfigError("duplicate pair label '" + p.pair_label + "' in lens '" +
                        lens.lens_id + "'");
    if (!(p.sigma_delta > 0.0) || !(p.sigma_phi > 0.0))
      throw ConfigError("non-positive standard error in lens '" + lens.lens_id + "'");
    if (!std::isfinite(p.delta_hat) || !std::isfinite(p.phi_hat))
      throw ConfigError("non-finite estimate in lens '" + lens.lens_id + "'");
  }
}

void validate(const Dataset& data) {
  std::set<std::string> ids;
  for (const auto& lens : data) {
    if (!ids.insert(lens.lens_id).second)
      throw ConfigError("duplicate lens_id '" + lens.lens_id + "'");
    validate(lens);
  }
}

std::size_t count_pairs(const Dataset& data) {
  std::size_t n = 0;
  for (const auto& lens : data) n += lens.pairs.size();
  return n;
}

LocationScale location_scale(const PairMeasurement& pair, double kappa, double ddt) noexcept {
  const double slope = (1.0 - kappa) * constants::c_mpc_per_day / ddt;
  const double delay_term = slope * pair.sigma_delta;
  return {slope * pair.delta_hat,
          std::sqrt(delay_term * delay_term + pair.sigma_phi * pair.sigma_phi)};
}

LocationScale location_scale_for_pair(const ModelParams& params, const LensSystem& lens,
                                      const PairMeasurement& pair) {
  const double ddt = time_delay_distance(params.cosmo, lens.z);
  return location_scale(pair, kappa_for(params, lens.lens_id), ddt);
}

double student_t_log_density(double x, double location, double scale) {
  if (!(scale > 0.0)) throw DomainError("Student t scale must be positive");
  const double r = (x - location) / scale;
  return kLogStudentNorm - std::log(scale) - 2.5 * std::log1p(0.25 * r * r);
}

double gaussian_log_density(double x, double location, double scale) {
  if (!(scale > 0.0)) throw DomainError("Gaussian scale must be positive");
  const double r = (x - location) / scale;
  return -kLogSqrtTwoPi - std::log(scale) - 0.5 * r * r;
}

double error_log_density(ErrorModel err, double x, double location, double scale) {
  return err == ErrorModel::student_t4 ? student_t_log_density(x, location, scale)
                                       : gaussian_log_density(x, location, scale);
}

double pair_log_likelihood(const ModelParams& params, const LensSystem& lens,
                           const PairMeasurement& pair, ErrorModel err) {
  const auto ls = location_scale_for_pair(params, lens, pair);
  return error_log_density(err, pair.phi_hat, ls.location, ls.scale);
}

double log_likelihood(const Dataset& data, const ModelParams& params, ErrorModel err) {
  double total = 0.0;
  for (const auto& lens : data) {
    const double kappa = kappa_for(params, lens.lens_id);
    const double ddt = time_delay_distance(params.cosmo, lens.z);
    for (const auto& pair : lens.pairs) {
      const auto ls = location_scale(pair, kappa, ddt);
      total += error_log_density(err, pair.phi_hat, ls.location, ls.scale);
    }
  }
  return total;
}

bool in_support(double h0, double omega_m) noexcept {
  return h0 > 0.0 && h0 <= prior::h0_max && omega_m >= prior::omega_min &&
         omega_m <= prior::omega_max;
}

double kappa_log_prior(double kappa) noexcept {
  if (!(kappa < 1.0)) return kNegInf;
  const double r = kappa / prior::kappa_scale;
  return kLogCauchyNorm - std::log1p(r * r);
}

double log_prior(const ModelParams& params) {
  if (!in_support(params.cosmo.h0, params.cosmo.omega_m)) return kNegInf;
  double lp = kLogH0Prior + kLogOmegaPrior;
  for (const auto& [id, kappa] : params.kappa_ext) lp += kappa_log_prior(kappa);
  return lp;
}

double log_posterior(const Dataset& data, const ModelParams& params, ErrorModel err) {
  const double lp = log_prior(params);
  if (lp == kNegInf) return kNegInf;
  return lp + log_likelihood(data, params, err);
}

// ---------------------------------------------------------------------------

PosteriorEvaluator::PosteriorEvaluator(Dataset data, ErrorModel err, double rel_tol)
    : data_(std::move(data)), err_(err), rel_tol_(rel_tol) {
  validate(data_);
}

std::vector<std::string> PosteriorEvaluator::lens_ids() const {
  std::vector<std::string> ids;
  ids.reserve(data_.size());
  for (const auto& lens : data_) ids.push_back(lens.lens_id);
  return ids;
}

std::vector<double> PosteriorEvaluator::distance_factors(double omega_m) const {
  std::vector<double> f;
  f.reserve(data_.size());
  for (const auto& lens : data_) f.push_back(time_delay_distance_factor(omega_m, lens.z, rel_tol_));
  return f;
}

double PosteriorEvaluator::lens_log_likelihood(std::size_t k, double h0, double kappa,
                                               double factor) const {
  const double ddt = constants::c_km_per_s / h0 * factor;
  double total = 0.0;
  for (const auto& pair : data_[k].pairs) {
    const auto ls = location_scale(pair, kappa, ddt);
    total += error_log_density(err_, pair.phi_hat, ls.location, ls.scale);
  }
  return total;
}

double PosteriorEvaluator::log_likelihood(double h0, std::span<const double> kappa,
                                          std::span<const double> factors) const {
  double total = 0.0;
  for (std::size_t k = 0; k < data_.size(); ++k)
    total += lens_log_likelihood(k, h0, kappa[k], factors[k]);
  return total;
}

double PosteriorEvaluator::log_prior(double h0, double omega_m,
                                     std::span<const double> kappa) const {
  if (!in_support(h0, omega_m)) return kNegInf;
  double lp = kLogH0Prior + kLogOmegaPrior;
  for (double k : kappa) lp += kappa_log_prior(k);
  return lp;
}

double PosteriorEvaluator::log_posterior(double h0, double omega_m,
                                         std::span<const double> kappa) const {
  const double lp = log_prior(h0, omega_m, kappa);
  if (lp == kNegInf) return kNegInf;
  const auto factors = distance_factors(omega_m);
  return lp + log_likelihood(h0, kappa, factors);
}

ModelParams PosteriorEvaluator::to_params(double h0, double omega_m,
                                          std::span<const double> kappa) const {
  ModelParams p;
  p.cosmo = {h0, omega_m};
  for (std::size_t k = 0; k < data_.size(); ++k) p.kappa_ext[data_[k].lens_id] = kappa[k];
  return p;
}

std::vector<double> PosteriorEvaluator::dense_kappa(const ModelParams& params) const {
  std::vector<double> out;
  out.reserve(data_.size());
  for (const auto& lens : data_) out.push_back(kappa_for(params, lens.lens_id));
  return out;
}

}  // namespace h0meta
