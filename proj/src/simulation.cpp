#include "h0meta/simulation.hpp"

#include <cmath>
#include <future>
#include <set>

#include "h0meta/errors.hpp"

namespace h0meta {

namespace {

std::string numbered(const char* prefix, std::size_t i) {
  std::string n = std::to_string(i + 1);
  if (n.size() < 2) n.insert(0, "0");
  return prefix + n;
}

double uniform(Range r, Rng& rng) {
  std::uniform_real_distribution<double> d(r.lo, r.hi);
  return d(rng);
}

}  // namespace

const char* to_string(NoiseMode mode) {
  return mode == NoiseMode::fix_at_truth ? "fix_at_truth" : "gaussian_noise";
}

NoiseMode parse_noise_mode(const std::string& name) {
  if (name == "fix_at_truth") return NoiseMode::fix_at_truth;
  if (name == "gaussian_noise") return NoiseMode::gaussian_noise;
  throw ConfigError("unknown noise mode '" + name + "'");
}

const char* to_string(DelaySign sign) {
  switch (sign) {
    case DelaySign::negative: return "negative";
    case DelaySign::positive: return "positive";
    case DelaySign::random: return "random";
  }
  return "?";
}

DelaySign parse_delay_sign(const std::string& name) {
  if (name == "negative") return DelaySign::negative;
  if (name == "positive") return DelaySign::positive;
  if (name == "random") return DelaySign::random;
  throw ConfigError("unknown delay sign convention '" + name + "'");
}

void PopulationSpec::validate() const {
  if (n_quads + n_doubles == 0) throw ConfigError("population has no lenses");
  if (!(cv_inputs > 0.0)) throw ConfigError("cv_inputs must be positive");
  if (!(kappa_sd >= 0.0)) throw ConfigError("kappa_sd must be non-negative");
  if (!(h0_true > 0.0 && h0_true <= prior::h0_max)) throw ConfigError("h0_true outside (0, 150]");
  if (!(omega_true > 0.0 && omega_true < 1.0)) throw ConfigError("omega_true outside (0, 1)");
  if (!(z_d.lo > 0.0 && z_d.lo <= z_d.hi && z_s.lo <= z_s.hi && z_d.hi < z_s.lo))
    throw ConfigError("redshift ranges must satisfy 0 < z_d < z_s");
  if (!(delay_days.lo > 0.0 && delay_days.lo <= delay_days.hi))
    throw ConfigError("delay range must be positive and ordered");
}

Population generate_population(const PopulationSpec& spec, Rng& rng) {
  spec.validate();
  Population pop;
  pop.truth.cosmo = {spec.h0_true, spec.omega_true};
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double log_lo = std::log(spec.delay_days.lo);
  const double log_hi = std::log(spec.delay_days.hi);
  static const char* const kQuadLabels[] = {"AB", "AC", "AD"};

  const std::size_t n_lenses = spec.n_quads + spec.n_doubles;
  for (std::size_t i = 0; i < n_lenses; ++i) {
    const bool quad = i < spec.n_quads;
    LensSystem lens;
    lens.lens_id = quad ? numbered("quad_", i) : numbered("double_", i - spec.n_quads);
    lens.z = {uniform(spec.z_d, rng), uniform(spec.z_s, rng)};
    double kappa = spec.kappa_sd * unit(rng);
    while (!(kappa < 1.0)) kappa = spec.kappa_sd * unit(rng);
    const double ddt_ext = external_time_delay_distance(pop.truth.cosmo, lens.z, kappa);

    std::vector<double> deltas, phis;
    for (std::size_t p = 0; p < (quad ? 3u : 1u); ++p) {
      double delta = std::exp(log_lo + (log_hi - log_lo) * unif(rng));
      switch (spec.delay_sign) {
        case DelaySign::negative: delta = -delta; break;
        case DelaySign::positive: break;
        case DelaySign::random:
          if (unif(rng) < 0.5) delta = -delta;
          break;
      }
      const double phi = constants::c_mpc_per_day * delta / ddt_ext;
      PairMeasurement m;
      m.pair_label = quad ? kQuadLabels[p] : "AB";
      m.sigma_delta = spec.cv_inputs * std::abs(delta);
      m.sigma_phi = spec.cv_inputs * std::abs(phi);
      m.delta_hat = delta;
      m.phi_hat = phi;
      if (spec.noise_mode == NoiseMode::gaussian_noise) {
        m.delta_hat += m.sigma_delta * unit(rng);
        m.phi_hat += m.sigma_phi * unit(rng);
      }
      lens.pairs.push_back(m);
      deltas.push_back(delta);
      phis.push_back(phi);
    }
    pop.data.push_back(std::move(lens));
    pop.truth.kappa.push_back(kappa);
    pop.truth.delta.push_back(std::move(deltas));
    pop.truth.phi.push_back(std::move(phis));
  }
  return pop;
}

Dataset inject_outliers(const Dataset& data, const ContaminationPlan& plan) {
  const std::size_t n_pairs = count_pairs(data);
  std::set<std::size_t> targets;
  for (auto idx : plan.target_pair_indices) {
    if (idx >= n_pairs) throw ConfigError("contamination index out of range");
    if (!targets.insert(idx).second) throw ConfigError("duplicate contamination index");
  }
  Dataset out = data;
  std::size_t flat = 0;
  for (auto& lens : out)
    for (auto& pair : lens.pairs) {
      if (targets.count(flat)) pair.delta_hat += plan.shift_multiplier * pair.sigma_delta;
      ++flat;
    }
  return out;
}

std::vector<std::size_t> first_pair_indices(const Dataset& data, std::size_t count) {
  if (count > data.size())
    throw ConfigError("requested more first-pair slots than there are lenses");
  std::vector<std::size_t> idx;
  std::size_t flat = 0;
  for (std::size_t k = 0; k < count; ++k) {
    idx.push_back(flat);
    flat += data[k].pairs.size();
  }
  return idx;
}

std::size_t outlier_count(double level, std::size_t n_pairs) {
  if (!(level >= 0.0 && level <= 1.0)) throw ConfigError("contamination level outside [0, 1]");
  return static_cast<std::size_t>(std::ceil(level * double(n_pairs) - 1e-9));
}

StudyResult run_study(const PopulationSpec& spec, std::span<const double> levels,
                      std::span<const ErrorModel> err_models, const SamplerConfig& sampler,
                      std::uint64_t seed, bool keep_chains) {
  sampler.validate();
  StudyResult result;
  {
    Rng rng(derive_seed(seed, 0));
    result.population = generate_population(spec, rng);
  }
  const Dataset& clean = result.population.data;
  const std::size_t n_pairs = count_pairs(clean);

  struct Job {
    double level;
    std::size_t n_out;
    ErrorModel err;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (double level : levels) {
    const std::size_t n_out = outlier_count(level, n_pairs);
    first_pair_indices(clean, n_out);  // validates the count up front
    for (ErrorModel err : err_models)
      jobs.push_back({level, n_out, err, derive_seed(seed, jobs.size() + 1)});
  }

  auto run_cell = [&](const Job& job) {
    ContaminationPlan plan;
    plan.target_pair_indices = first_pair_indices(clean, job.n_out);
    const Dataset data = inject_outliers(clean, plan);
    SamplerConfig cfg = sampler;
    cfg.seed = job.seed;
    cfg.parallel = false;
    ChainSet chains = run_chains(cfg, data, job.err);

    StudyCell cell;
    cell.level = job.level;
    cell.n_outliers = job.n_out;
    cell.err = job.err;
    const PosteriorSummary summary = summarize(chains);
    const auto& h0 = summary["h0"];
    cell.report = evaluate_against_truth(h0.mean, h0.sd, spec.h0_true);
    cell.report.label = std::string(to_string(job.err)) + " " + std::to_string(job.n_out) + "/" +
                        std::to_string(n_pairs);
    cell.h0_rhat = h0.rhat;
    cell.h0_ess = h0.ess;
    std::uint64_t acc = 0, prop = 0;
    for (const auto& c : chains.chains) {
      acc += c.sampling.h0.accepted;
      prop += c.sampling.h0.proposed;
    }
    cell.h0_acceptance = prop ? double(acc) / double(prop) : 0.0;
    if (keep_chains) cell.chains = std::move(chains);
    return cell;
  };

  std::vector<std::future<StudyCell>> futures;
  for (const auto& job : jobs)
    futures.push_back(std::async(sampler.parallel ? std::launch::async : std::launch::deferred,
                                 run_cell, job));
  for (auto& f : futures) result.cells.push_back(f.get());
  return result;
}

}  // namespace h0meta
