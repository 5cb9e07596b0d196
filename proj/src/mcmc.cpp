#include "h0meta/mcmc.hpp"

#include <cmath>
#include <future>
#include <limits>

#include "h0meta/errors.hpp"

namespace h0meta {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log min(1, p(a) / p(b)) with the 0/0 = 1 convention of the epsilon-regularized ratio.
double log_capped_ratio(double log_a, double log_b) {
  if (log_b == kNegInf) return 0.0;
  if (log_a == kNegInf) return kNegInf;
  return std::min(0.0, log_a - log_b);
}

bool accept(double log_alpha, Rng& rng) {
  if (log_alpha >= 0.0) return true;
  if (log_alpha == kNegInf || std::isnan(log_alpha)) return false;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  return std::log(unif(rng)) < log_alpha;
}

double draw_omega(Rng& rng) {
  std::uniform_real_distribution<double> d(prior::omega_min, prior::omega_max);
  return d(rng);
}

double draw_kappa(Rng& rng) {
  std::cauchy_distribution<double> d(0.0, prior::kappa_scale);
  return d(rng);
}

double refresh_log_post(const ChainState& s, const PosteriorEvaluator& eval) {
  const double lp = eval.log_prior(s.h0, s.omega_m, s.kappa);
  if (lp == kNegInf) return kNegInf;
  return lp + eval.log_likelihood(s.h0, s.kappa, s.factors);
}

LogDensity1D h0_conditional(const ChainState& s, const PosteriorEvaluator& eval) {
  return [&s, &eval](double h0) {
    const double lp = eval.log_prior(h0, s.omega_m, s.kappa);
    if (lp == kNegInf) return kNegInf;
    return lp + eval.log_likelihood(h0, s.kappa, s.factors);
  };
}

void apply_h0_move(ChainState& s, const ScalarMove& m) {
  ++s.counters.h0.proposed;
  if (m.fell_back) ++s.counters.ram_fallbacks;
  if (m.accepted) {
    ++s.counters.h0.accepted;
    s.h0 = m.value;
    s.log_post = m.log_density;
  }
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

const char* to_string(H0Update kind) {
  return kind == H0Update::random_walk ? "random_walk" : "repelling_attracting";
}

H0Update parse_h0_update(const std::string& name) {
  if (name == "random_walk" || name == "rw" || name == "metropolis") return H0Update::random_walk;
  if (name == "repelling_attracting" || name == "ram") return H0Update::repelling_attracting;
  throw ConfigError("unknown H0 update '" + name + "' (expected random_walk or repelling_attracting)");
}

void SamplerConfig::validate() const {
  if (n_chains < 2) throw ConfigError("n_chains must be at least 2");
  if (n_iterations < 2) throw ConfigError("n_iterations must be at least 2");
  if (!(burn_in_fraction > 0.0 && burn_in_fraction < 1.0))
    throw ConfigError("burn_in_fraction must lie in (0, 1)");
  if (!(target_acceptance_rw > 0.0 && target_acceptance_rw < 1.0) ||
      !(target_acceptance_ram > 0.0 && target_acceptance_ram < 1.0))
    throw ConfigError("target acceptance rates must lie in (0, 1)");
  if (!(initial_h0_min > 0.0 && initial_h0_min < initial_h0_max &&
        initial_h0_max <= prior::h0_max))
    throw ConfigError("initial H0 grid must lie inside (0, 150]");
  if (!(initial_proposal_sd_h0 > 0.0)) throw ConfigError("initial proposal sd must be positive");
  if (adaptation_window == 0) throw ConfigError("adaptation_window must be positive");
  if (!(adaptation_gain > 0.0) || !(adaptation_exponent > 0.0))
    throw ConfigError("adaptation gain and exponent must be positive");
  if (n_retained() == 0 || n_burn_in() == 0)
    throw ConfigError("burn-in split leaves no burn-in or no retained draws");
}

std::size_t SamplerConfig::n_burn_in() const {
  return static_cast<std::size_t>(std::llround(double(n_iterations) * burn_in_fraction));
}

std::vector<double> SamplerConfig::initial_h0_grid() const {
  std::vector<double> grid(n_chains);
  const double step = (initial_h0_max - initial_h0_min) / double(n_chains - 1);
  for (std::size_t c = 0; c < n_chains; ++c) grid[c] = initial_h0_min + step * double(c);
  grid.back() = initial_h0_max;
  return grid;
}

double SamplerConfig::h0_target_acceptance() const {
  return h0_update == H0Update::random_walk ? target_acceptance_rw : target_acceptance_ram;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) + index);
}

ChainState make_state(const PosteriorEvaluator& eval, double h0, double omega_m,
                      std::vector<double> kappa, double proposal_sd_h0) {
  if (kappa.size() != eval.n_lenses())
    throw ConfigError("kappa vector does not match the number of lenses");
  ChainState s;
  s.h0 = h0;
  s.omega_m = omega_m;
  s.kappa = std::move(kappa);
  s.factors = eval.distance_factors(omega_m);
  s.proposal_sd_h0 = proposal_sd_h0;
  s.counters.kappa.assign(eval.n_lenses(), {});
  s.log_post = refresh_log_post(s, eval);
  return s;
}

// --- scalar kernels -------------------------------------------------------

ScalarMove rw_step(double x, double log_px, double sd, const LogDensity1D& log_p, Rng& rng) {
  std::normal_distribution<double> step(0.0, sd);
  const double y = x + step(rng);
  const double log_py = log_p(y);
  if (accept(log_capped_ratio(log_py, log_px), rng) && log_py != kNegInf)
    return {y, log_py, true};
  return {x, log_px, false};
}

ScalarMove ram_step(double x, double log_px, double sd, const LogDensity1D& log_p, Rng& rng,
                    std::size_t max_attempts) {
  std::normal_distribution<double> step(0.0, sd);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // Draws from `from` until the acceptance test passes; false on exhaustion.
  auto forced = [&](double from, double log_from, bool downhill, double& out, double& log_out) {
    for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
      const double y = from + step(rng);
      const double log_y = log_p(y);
      const double log_r =
          downhill ? log_capped_ratio(log_from, log_y) : log_capped_ratio(log_y, log_from);
      if (log_r >= 0.0 || std::log(unif(rng)) < log_r) {
        out = y;
        log_out = log_y;
        return true;
      }
    }
    return false;
  };

  auto fallback = [&] {
    ScalarMove m = rw_step(x, log_px, sd, log_p, rng);
    m.fell_back = true;
    return m;
  };

  double down, log_down, up, log_up, aux, log_aux;
  if (!forced(x, log_px, true, down, log_down)) return fallback();
  if (!forced(down, log_down, false, up, log_up)) return fallback();
  if (!forced(up, log_up, true, aux, log_aux)) return fallback();
  if (log_up == kNegInf) return {x, log_px, false};

  const double log_alpha =
      log_up - log_px + log_capped_ratio(log_px, log_aux) - log_capped_ratio(log_up, log_aux);
  if (accept(log_alpha, rng)) return {up, log_up, true};
  return {x, log_px, false};
}

// --- block updates --------------------------------------------------------

void rw_update_h0(ChainState& state, const PosteriorEvaluator& eval, Rng& rng) {
  const auto target = h0_conditional(state, eval);
  apply_h0_move(state, rw_step(state.h0, state.log_post, state.proposal_sd_h0, target, rng));
}

void ram_update_h0(ChainState& state, const PosteriorEvaluator& eval, Rng& rng) {
  const auto target = h0_conditional(state, eval);
  apply_h0_move(state, ram_step(state.h0, state.log_post, state.proposal_sd_h0, target, rng));
}

void independence_update_omega(ChainState& state, const PosteriorEvaluator& eval, Rng& rng) {
  ++state.counters.omega.proposed;
  const double proposal = draw_omega(rng);
  auto factors = eval.distance_factors(proposal);
  const double ll_old = eval.log_likelihood(state.h0, state.kappa, state.factors);
  const double ll_new = eval.log_likelihood(state.h0, state.kappa, factors);
  // The prior proposal density cancels the prior: the ratio is a likelihood ratio.
  if (accept(log_capped_ratio(ll_new, ll_old), rng) && ll_new != kNegInf) {
    ++state.counters.omega.accepted;
    state.log_post += ll_new - ll_old;
    state.omega_m = proposal;
    state.factors = std::move(factors);
  }
}

void independence_update_kappa(ChainState& state, const PosteriorEvaluator& eval,
                               std::size_t k, Rng& rng) {
  if (k >= eval.n_lenses()) throw ConfigError("kappa block index out of range");
  auto& counter = state.counters.kappa[k];
  ++counter.proposed;
  const double proposal = draw_kappa(rng);
  if (!(proposal < 1.0)) return;
  const double ll_old = eval.lens_log_likelihood(k, state.h0, state.kappa[k], state.factors[k]);
  const double ll_new = eval.lens_log_likelihood(k, state.h0, proposal, state.factors[k]);
  if (accept(log_capped_ratio(ll_new, ll_old), rng) && ll_new != kNegInf) {
    ++counter.accepted;
    state.log_post += (ll_new - ll_old) + kappa_log_prior(proposal) -
                      kappa_log_prior(state.kappa[k]);
    state.kappa[k] = proposal;
  }
}

void independence_update_kappa(ChainState& state, const PosteriorEvaluator& eval,
                               const std::string& lens_id, Rng& rng) {
  const auto& data = eval.dataset();
  for (std::size_t k = 0; k < data.size(); ++k)
    if (data[k].lens_id == lens_id) return independence_update_kappa(state, eval, k, rng);
  throw ConfigError("unknown lens_id '" + lens_id + "'");
}

double adapt_proposal_scale(double sd, double window_acceptance, Phase phase,
                            std::size_t window_index, double target, double exponent,
                            double scale) {
  if (phase == Phase::sampling || window_index == 0) return sd;
  const double gain = scale * std::pow(double(window_index), -exponent);
  return sd * std::exp(gain * (window_acceptance - target));
}

void gibbs_sweep(ChainState& state, const PosteriorEvaluator& eval, H0Update kind, Rng& rng) {
  if (kind == H0Update::random_walk)
    rw_update_h0(state, eval, rng);
  else
    ram_update_h0(state, eval, rng);
  independence_update_omega(state, eval, rng);
  for (std::size_t k = 0; k < eval.n_lenses(); ++k) independence_update_kappa(state, eval, k, rng);
  state.log_post = refresh_log_post(state, eval);
}

// --- chains ---------------------------------------------------------------

std::vector<double> Chain::column(std::size_t param) const {
  std::vector<double> out(n_draws());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = at(i, param);
  return out;
}

std::size_t ChainSet::total_draws() const {
  std::size_t n = 0;
  for (const auto& c : chains) n += c.n_draws();
  return n;
}

std::vector<std::vector<double>> ChainSet::parameter(std::size_t param) const {
  std::vector<std::vector<double>> out;
  out.reserve(chains.size());
  for (const auto& c : chains) out.push_back(c.column(param));
  return out;
}

std::size_t ChainSet::index_of(const std::string& name) const {
  for (std::size_t j = 0; j < param_names.size(); ++j)
    if (param_names[j] == name) return j;
  throw ConfigError("no parameter named '" + name + "'");
}

std::vector<std::string> parameter_names(const Dataset& data) {
  std::vector<std::string> names{"h0", "omega_m"};
  for (const auto& lens : data) names.push_back("kappa_" + lens.lens_id);
  return names;
}

Chain run_chain(const PosteriorEvaluator& eval, const SamplerConfig& config,
                std::size_t chain_index) {
  config.validate();
  if (chain_index >= config.n_chains) throw ConfigError("chain index out of range");

  Chain chain;
  chain.seed = derive_seed(config.seed, chain_index);
  chain.n_params = 2 + eval.n_lenses();
  Rng rng(chain.seed);

  const double h0_start = config.initial_h0_grid()[chain_index];
  const double omega_start = draw_omega(rng);
  std::vector<double> kappa_start(eval.n_lenses());
  for (auto& k : kappa_start) {
    do {
      k = draw_kappa(rng);
    } while (!(k < 1.0));
  }
  ChainState state =
      make_state(eval, h0_start, omega_start, std::move(kappa_start), config.initial_proposal_sd_h0);

  const std::size_t n_burn = config.n_burn_in();
  const double target = config.h0_target_acceptance();
  chain.draws.reserve(config.n_retained() * chain.n_params);
  chain.log_post.reserve(config.n_retained());
  chain.proposal_sd_trace.reserve(config.n_retained());

  std::uint64_t window_start_proposed = 0, window_start_accepted = 0;
  std::size_t window_index = 0;
  for (std::size_t it = 1; it <= config.n_iterations; ++it) {
    gibbs_sweep(state, eval, config.h0_update, rng);

    if (it <= n_burn) {
      if (it % config.adaptation_window == 0) {
        const auto proposed = state.counters.h0.proposed - window_start_proposed;
        const auto accepted = state.counters.h0.accepted - window_start_accepted;
        const double rate = proposed ? double(accepted) / double(proposed) : 0.0;
        state.proposal_sd_h0 = adapt_proposal_scale(state.proposal_sd_h0, rate, Phase::burn_in,
                                                     ++window_index, target,
                                                     config.adaptation_exponent,
                                                     config.adaptation_gain);
        chain.tuning_history.push_back(state.proposal_sd_h0);
        window_start_proposed = state.counters.h0.proposed;
        window_start_accepted = state.counters.h0.accepted;
      }
      if (it == n_burn) {
        chain.burn_in = state.counters;
        state.counters = AcceptanceCounters{};
        state.counters.kappa.assign(eval.n_lenses(), {});
        chain.h0_before_sampling = state.h0;
      }
      continue;
    }

    chain.draws.push_back(state.h0);
    chain.draws.push_back(state.omega_m);
    chain.draws.insert(chain.draws.end(), state.kappa.begin(), state.kappa.end());
    chain.log_post.push_back(state.log_post);
    chain.proposal_sd_trace.push_back(state.proposal_sd_h0);
  }
  chain.sampling = state.counters;
  return chain;
}

ChainSet run_chains(const SamplerConfig& config, const Dataset& data, ErrorModel err) {
  config.validate();
  const PosteriorEvaluator eval(data, err);
  ChainSet set;
  set.param_names = parameter_names(data);
  set.chains.resize(config.n_chains);
  if (config.parallel) {
    std::vector<std::future<Chain>> jobs;
    for (std::size_t c = 0; c < config.n_chains; ++c)
      jobs.push_back(std::async(std::launch::async, [&, c] { return run_chain(eval, config, c); }));
    for (std::size_t c = 0; c < config.n_chains; ++c) set.chains[c] = jobs[c].get();
  } else {
    for (std::size_t c = 0; c < config.n_chains; ++c) set.chains[c] = run_chain(eval, config, c);
  }
  return set;
}

}  // namespace h0meta
