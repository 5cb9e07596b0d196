#include "h0meta/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "h0meta/errors.hpp"

namespace h0meta {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / double(x.size());
}

double variance_of(std::span<const double> x, double mean) {
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return ss / double(x.size() - 1);
}

double draw_replicate(ErrorModel err, double location, double scale, Rng& rng) {
  if (err == ErrorModel::gaussian) {
    std::normal_distribution<double> d(location, scale);
    return d(rng);
  }
  std::student_t_distribution<double> d(kStudentDof);
  return location + scale * d(rng);
}

}  // namespace

double gelman_rubin(const std::vector<std::vector<double>>& chains) {
  const std::size_t m = chains.size();
  if (m < 2) throw DomainError("gelman_rubin: need at least 2 chains");
  const std::size_t n = chains.front().size();
  if (n < 10) throw DomainError("gelman_rubin: need at least 10 draws per chain");
  for (const auto& c : chains)
    if (c.size() != n) throw DomainError("gelman_rubin: chains must have equal length");

  std::vector<double> means(m), vars(m);
  for (std::size_t j = 0; j < m; ++j) {
    means[j] = mean_of(chains[j]);
    vars[j] = variance_of(chains[j], means[j]);
  }
  const double w = std::accumulate(vars.begin(), vars.end(), 0.0) / double(m);
  if (!(w > 0.0)) throw DomainError("gelman_rubin: zero within-chain variance");
  const double grand = mean_of(means);
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= double(n) / double(m - 1);
  const double v = (double(n) - 1.0) / double(n) * w + b / double(n);
  return std::sqrt(v / w);
}

double effective_sample_size(std::span<const double> draws) {
  const std::size_t n = draws.size();
  if (n < 100) throw DomainError("effective_sample_size: need at least 100 draws");
  const double mu = mean_of(draws);
  std::vector<double> centered(n);
  for (std::size_t i = 0; i < n; ++i) centered[i] = draws[i] - mu;
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += centered[i] * centered[i + lag];
    return s / double(n);
  };
  const double c0 = autocov(0);
  if (!(c0 > 0.0)) throw DomainError("effective_sample_size: constant chain");

  // Sum of Gamma_m = rho(2m) + rho(2m+1) while positive, forced monotone.
  double sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t lag = 0; lag + 1 < n; lag += 2) {
    double gamma = (autocov(lag) + autocov(lag + 1)) / c0;
    if (!(gamma > 0.0)) break;
    gamma = std::min(gamma, prev);
    prev = gamma;
    sum += gamma;
  }
  const double tau = -1.0 + 2.0 * sum;
  const double ess = double(n) / std::max(tau, 1e-12);
  return std::min(ess, double(n));
}

double nearest_rank_quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw DomainError("quantile of empty data");
  const auto idx = static_cast<std::size_t>(std::llround(p * double(sorted.size() - 1)));
  return sorted[std::min(idx, sorted.size() - 1)];
}

const ParameterSummary& PosteriorSummary::operator[](const std::string& name) const {
  for (const auto& p : parameters)
    if (p.name == name) return p;
  throw ConfigError("no summary for parameter '" + name + "'");
}

PosteriorSummary summarize(const ChainSet& chains) {
  if (chains.chains.empty() || chains.total_draws() == 0)
    throw DomainError("summarize: no retained draws");
  PosteriorSummary out;
  out.total_draws = chains.total_draws();
  for (std::size_t j = 0; j < chains.n_params(); ++j) {
    const auto per_chain = chains.parameter(j);
    std::vector<double> pooled;
    pooled.reserve(out.total_draws);
    for (const auto& c : per_chain) pooled.insert(pooled.end(), c.begin(), c.end());

    ParameterSummary s;
    s.name = chains.param_names[j];
    s.mean = mean_of(pooled);
    s.sd = pooled.size() > 1 ? std::sqrt(variance_of(pooled, s.mean)) : 0.0;
    std::sort(pooled.begin(), pooled.end());
    s.central68 = {nearest_rank_quantile(pooled, 0.16), nearest_rank_quantile(pooled, 0.84)};
    s.central95 = {nearest_rank_quantile(pooled, 0.025), nearest_rank_quantile(pooled, 0.975)};

    try {
      s.rhat = gelman_rubin(per_chain);
    } catch (const DomainError&) {
      s.rhat = kNaN;
      s.degenerate = true;
    }
    try {
      double ess = 0.0;
      for (const auto& c : per_chain) ess += effective_sample_size(c);
      s.ess = ess;
    } catch (const DomainError&) {
      s.ess = kNaN;
      s.degenerate = true;
    }
    out.parameters.push_back(std::move(s));
  }
  return out;
}

double ppc_discrepancy(const Dataset& data, const ModelParams& params) {
  double t = 0.0;
  for (const auto& lens : data)
    for (const auto& pair : lens.pairs) {
      const auto ls = location_scale_for_pair(params, lens, pair);
      const double r = (pair.phi_hat - ls.location) / ls.scale;
      t += r * r;
    }
  return t;
}

PpcResult posterior_predictive_check(const ChainSet& chains, const Dataset& data,
                                     ErrorModel err, Rng& rng, std::size_t max_draws) {
  const std::size_t total = chains.total_draws();
  if (total < 100) throw DomainError("posterior_predictive_check: need at least 100 draws");
  if (chains.n_params() != 2 + data.size())
    throw ConfigError("chain parameters do not match the dataset");
  const PosteriorEvaluator eval(data, err);

  std::vector<std::pair<std::size_t, std::size_t>> index;  // (chain, iteration)
  for (std::size_t c = 0; c < chains.chains.size(); ++c)
    for (std::size_t i = 0; i < chains.chains[c].n_draws(); ++i) index.emplace_back(c, i);

  const std::size_t m = std::min(max_draws, total);
  const std::size_t n_pairs = count_pairs(data);
  PpcResult res;
  res.n_draws = m;
  res.pair_p.assign(n_pairs, 0.0);
  res.replicates.reserve(m * n_pairs);
  for (const auto& lens : data)
    for (const auto& pair : lens.pairs) res.pair_names.push_back(lens.lens_id + ":" + pair.pair_label);

  std::size_t global_hits = 0;
  std::vector<std::size_t> pair_hits(n_pairs, 0);
  std::vector<double> kappa(data.size());
  for (std::size_t d = 0; d < m; ++d) {
    const auto [c, i] = index[(d * total) / m];
    const Chain& chain = chains.chains[c];
    const double h0 = chain.at(i, 0);
    const double om = chain.at(i, 1);
    for (std::size_t k = 0; k < data.size(); ++k) kappa[k] = chain.at(i, 2 + k);
    const auto factors = eval.distance_factors(om);

    double t_obs = 0.0, t_rep = 0.0;
    std::size_t p = 0;
    for (std::size_t k = 0; k < data.size(); ++k) {
      const double ddt = constants::c_km_per_s / h0 * factors[k];
      for (const auto& pair : data[k].pairs) {
        const auto ls = location_scale(pair, kappa[k], ddt);
        const double rep = draw_replicate(err, ls.location, ls.scale, rng);
        res.replicates.push_back(rep);
        const double r_obs = (pair.phi_hat - ls.location) / ls.scale;
        const double r_rep = (rep - ls.location) / ls.scale;
        t_obs += r_obs * r_obs;
        t_rep += r_rep * r_rep;
        if (r_rep * r_rep >= r_obs * r_obs) ++pair_hits[p];
        ++p;
      }
    }
    res.t_observed.push_back(t_obs);
    res.t_replicated.push_back(t_rep);
    if (t_rep >= t_obs) ++global_hits;
  }
  res.global_p = double(global_hits) / double(m);
  for (std::size_t p = 0; p < n_pairs; ++p) res.pair_p[p] = double(pair_hits[p]) / double(m);
  return res;
}

double StudyReport::abs_bias_pct() const { return std::abs(bias_pct); }

StudyReport evaluate_against_truth(double h0_mean, double h0_sd, double h0_true) {
  if (!(h0_true > 0.0)) throw DomainError("true H0 must be positive");
  StudyReport r;
  r.h0_true = h0_true;
  r.h0_mean = h0_mean;
  r.h0_sd = h0_sd;
  const double err = h0_mean - h0_true;
  r.bias_pct = 100.0 * err / h0_true;
  r.cv_pct = 100.0 * h0_sd / h0_true;
  r.rmse = std::hypot(err, h0_sd);
  return r;
}

}  // namespace h0meta
