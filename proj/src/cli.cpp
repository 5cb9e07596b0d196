#include "h0meta/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include "h0meta/diagnostics.hpp"
#include "h0meta/errors.hpp"
#include "h0meta/io.hpp"
#include "h0meta/simulation.hpp"

namespace fs = std::filesystem;

namespace h0meta {

namespace {

fs::path resolve_output_dir(const std::string& flag, const fs::path& configured) {
  if (!flag.empty()) return flag;
  if (!configured.empty()) return configured;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return "h0meta_out";
}

void print_summary(std::ostream& out, const PosteriorSummary& s) {
  for (const auto& p : s.parameters) {
    out << p.name << ": mean " << format_number(p.mean) << ", sd " << format_number(p.sd)
        << ", 68% [" << format_number(p.central68.lower) << ", " << format_number(p.central68.upper)
        << "], R-hat " << format_number(p.rhat) << ", ESS " << format_number(p.ess);
    if (p.degenerate) out << " (degenerate chains)";
    out << '\n';
  }
}

struct FitArgs {
  std::string dataset, config, out_dir, error_model, h0_update;
  std::optional<std::uint64_t> seed;
  bool conservative_se = false;
};

int run_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig cfg = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  if (!a.error_model.empty()) cfg.err = parse_error_model(a.error_model);
  if (!a.h0_update.empty()) cfg.sampler.h0_update = parse_h0_update(a.h0_update);
  if (a.seed) cfg.sampler.seed = *a.seed;
  if (a.conservative_se) cfg.conservative_se = true;
  const fs::path dir = resolve_output_dir(a.out_dir, cfg.output_dir);

  const auto loaded = load_dataset(a.dataset, LoadOptions{cfg.conservative_se});
  for (const auto& d : loaded.diagnostics) err << "warning: " << d << '\n';
  if (loaded.data.empty()) throw ConfigError("dataset '" + a.dataset + "' contains no lenses");

  const ChainSet chains = run_chains(cfg.sampler, loaded.data, cfg.err);
  const PosteriorSummary summary = summarize(chains);
  write_outputs(chains, summary, {}, dir, {"fit", a.dataset, to_text(cfg)});
  print_summary(out, summary);
  out << "outputs written to " << dir.string() << '\n';
  return 0;
}

struct SimulateArgs {
  std::string spec, out_dir;
  std::optional<std::uint64_t> seed;
};

int run_simulate(const SimulateArgs& a, std::ostream& out, std::ostream&) {
  StudyConfig cfg = a.spec.empty() ? StudyConfig{} : load_study_config(a.spec);
  if (a.seed) cfg.seed = *a.seed;
  const fs::path dir = resolve_output_dir(a.out_dir, cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir.string() + "'");

  const StudyResult result =
      run_study(cfg.population, cfg.levels, cfg.err_models, cfg.sampler, cfg.seed);
  write_dataset(dir / "population.csv", result.population.data);

  std::vector<StudyReport> reports;
  for (const auto& c : result.cells) reports.push_back(c.report);
  {
    std::ofstream f(dir / "study_report.csv");
    write_reports(f, reports);
    if (!f) throw std::runtime_error("cannot write '" + (dir / "study_report.csv").string() + "'");
  }
  {
    std::ofstream f(dir / "study_cells.csv");
    f << "level,n_outliers,error_model,h0_mean,h0_sd,bias_pct,cv_pct,rmse,h0_rhat,h0_ess,h0_acceptance\n";
    for (const auto& c : result.cells)
      f << format_number(c.level) << ',' << c.n_outliers << ',' << to_string(c.err) << ','
        << format_number(c.report.h0_mean) << ',' << format_number(c.report.h0_sd) << ','
        << format_number(c.report.bias_pct) << ',' << format_number(c.report.cv_pct) << ','
        << format_number(c.report.rmse) << ',' << format_number(c.h0_rhat) << ','
        << format_number(c.h0_ess) << ',' << format_number(c.h0_acceptance) << '\n';
    if (!f) throw std::runtime_error("cannot write '" + (dir / "study_cells.csv").string() + "'");
  }
  {
    std::ofstream f(dir / "manifest.txt");
    f << "version=" << kVersion << "\ncommand=simulate\n# configuration\n" << to_text(cfg);
    if (!f) throw std::runtime_error("cannot write '" + (dir / "manifest.txt").string() + "'");
  }
  write_reports(out, reports);
  out << "outputs written to " << dir.string() << '\n';
  return 0;
}

struct PpcArgs {
  std::string dataset, chains_dir, error_model;
  std::uint64_t seed = 1;
  std::size_t max_draws = 1000;
  bool conservative_se = false;
};

int run_ppc(const PpcArgs& a, std::ostream& out, std::ostream& err) {
  std::string model = a.error_model;
  if (model.empty()) model = read_manifest_value(a.chains_dir, "error_model");
  if (model.empty()) model = "student_t4";
  const auto loaded = load_dataset(a.dataset, LoadOptions{a.conservative_se});
  for (const auto& d : loaded.diagnostics) err << "warning: " << d << '\n';
  const ChainSet chains = read_chains(a.chains_dir);
  if (chains.param_names != parameter_names(loaded.data))
    throw ConfigError("chain columns do not match the lenses in '" + a.dataset + "'");
  Rng rng(a.seed);
  const PpcResult ppc =
      posterior_predictive_check(chains, loaded.data, parse_error_model(model), rng, a.max_draws);
  const fs::path path = fs::path(a.chains_dir) / "ppc.csv";
  std::ofstream f(path);
  write_ppc(f, ppc);
  f.close();
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  write_ppc(out, ppc);
  return 0;
}

int run_summarize(const std::string& dir, std::ostream& out) {
  const ChainSet chains = read_chains(dir);
  const PosteriorSummary summary = summarize(chains);
  const fs::path path = fs::path(dir) / "summary.csv";
  std::ofstream f(path);
  write_summary(f, summary);
  f.close();
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  print_summary(out, summary);
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robust meta-analysis of strong-lens time delays for the Hubble constant", "h0meta"};
  app.require_subcommand(1);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Sample the posterior of (H0, Omega_m, kappa_ext)");
  fit_cmd->add_option("dataset", fit.dataset, "Dataset CSV")->required();
  fit_cmd->add_option("--config", fit.config, "key=value run configuration");
  fit_cmd->add_option("--out", fit.out_dir, "Output directory");
  fit_cmd->add_option("--seed", fit.seed, "Master RNG seed");
  fit_cmd->add_option("--error-model", fit.error_model, "student_t4 or gaussian");
  fit_cmd->add_option("--h0-update", fit.h0_update, "random_walk or repelling_attracting");
  fit_cmd->add_flag("--conservative-se", fit.conservative_se,
                    "Accept +a/-b uncertainties and use the larger side");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Run an outlier-robustness simulation study");
  sim_cmd->add_option("--spec", sim.spec, "key=value study specification");
  sim_cmd->add_option("--out", sim.out_dir, "Output directory");
  sim_cmd->add_option("--seed", sim.seed, "Master RNG seed");

  PpcArgs ppc;
  auto* ppc_cmd = app.add_subcommand("ppc", "Posterior predictive check of a finished fit");
  ppc_cmd->add_option("dataset", ppc.dataset, "Dataset CSV")->required();
  ppc_cmd->add_option("chains-dir", ppc.chains_dir, "Directory written by fit")->required();
  ppc_cmd->add_option("--error-model", ppc.error_model, "Defaults to the model recorded by fit");
  ppc_cmd->add_option("--seed", ppc.seed, "RNG seed for replicates");
  ppc_cmd->add_option("--max-draws", ppc.max_draws, "Thinned posterior draws");
  ppc_cmd->add_flag("--conservative-se", ppc.conservative_se,
                    "Accept +a/-b uncertainties and use the larger side");

  std::string summarize_dir;
  auto* sum_cmd = app.add_subcommand("summarize", "Recompute diagnostics from chain files");
  sum_cmd->add_option("chains-dir", summarize_dir, "Directory written by fit")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*fit_cmd) return run_fit(fit, out, err);
    if (*sim_cmd) return run_simulate(sim, out, err);
    if (*ppc_cmd) return run_ppc(ppc, out, err);
    if (*sum_cmd) return run_summarize(summarize_dir, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace h0meta
