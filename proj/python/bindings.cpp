#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "h0meta/cosmology.hpp"
#include "h0meta/diagnostics.hpp"
#include "h0meta/errors.hpp"
#include "h0meta/io.hpp"
#include "h0meta/likelihood.hpp"
#include "h0meta/mcmc.hpp"
#include "h0meta/mle.hpp"
#include "h0meta/simulation.hpp"

namespace py = pybind11;
using namespace h0meta;

namespace {

ModelParams make_params(double h0, double omega_m, const KappaMap& kappa) {
  return ModelParams{Cosmology{h0, omega_m}, kappa};
}

py::dict chains_to_dict(const ChainSet& set) {
  const std::size_t n_chains = set.chains.size();
  const std::size_t n_draws = n_chains ? set.chains.front().n_draws() : 0;
  const std::size_t n_params = set.n_params();
  py::array_t<double> draws({n_chains, n_draws, n_params});
  py::array_t<double> log_post({n_chains, n_draws});
  auto d = draws.mutable_unchecked<3>();
  auto lp = log_post.mutable_unchecked<2>();
  py::list acceptance;
  for (std::size_t c = 0; c < n_chains; ++c) {
    const Chain& chain = set.chains[c];
    for (std::size_t i = 0; i < n_draws; ++i) {
      for (std::size_t j = 0; j < n_params; ++j) d(c, i, j) = chain.at(i, j);
      lp(c, i) = i < chain.log_post.size() ? chain.log_post[i] : 0.0;
    }
    acceptance.append(py::dict(py::arg("h0") = chain.sampling.h0.rate(),
                               py::arg("omega_m") = chain.sampling.omega.rate(),
                               py::arg("proposal_sd_h0") = chain.proposal_sd_trace.empty()
                                                               ? 0.0
                                                               : chain.proposal_sd_trace.back()));
  }
  return py::dict(py::arg("param_names") = set.param_names, py::arg("draws") = draws,
                  py::arg("log_post") = log_post, py::arg("acceptance") = acceptance);
}

ChainSet dict_to_chains(const std::vector<std::string>& names,
                        py::array_t<double, py::array::c_style | py::array::forcecast> draws) {
  if (draws.ndim() != 3 || std::size_t(draws.shape(2)) != names.size())
    throw std::invalid_argument("draws must have shape (n_chains, n_draws, n_params)");
  auto d = draws.unchecked<3>();
  ChainSet set;
  set.param_names = names;
  for (py::ssize_t c = 0; c < d.shape(0); ++c) {
    Chain chain;
    chain.n_params = names.size();
    for (py::ssize_t i = 0; i < d.shape(1); ++i)
      for (py::ssize_t j = 0; j < d.shape(2); ++j) chain.draws.push_back(d(c, i, j));
    set.chains.push_back(std::move(chain));
  }
  return set;
}

py::dict report_to_dict(const StudyReport& r) {
  return py::dict(py::arg("label") = r.label, py::arg("h0_true") = r.h0_true,
                  py::arg("h0_mean") = r.h0_mean, py::arg("h0_sd") = r.h0_sd,
                  py::arg("bias_pct") = r.bias_pct, py::arg("abs_bias_pct") = r.abs_bias_pct(),
                  py::arg("cv_pct") = r.cv_pct, py::arg("rmse") = r.rmse);
}

}  // namespace

PYBIND11_MODULE(_h0meta, m) {
  m.doc() = "Robust Student-t meta-analysis of lens time delays for the Hubble constant";
  m.attr("__version__") = kVersion;
  m.attr("C_MPC_PER_DAY") = constants::c_mpc_per_day;
  m.attr("RAD2_PER_ARCSEC2") = constants::rad2_per_arcsec2;

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<GeometryError>(m, "GeometryError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  // distances
  m.def("inverse_expansion_rate", &inverse_expansion_rate, py::arg("u"), py::arg("omega_m"));
  m.def("comoving_integral",
        &comoving_integral, py::arg("z"),
        py::arg("omega_m"), py::arg("rel_tol") = kDefaultQuadratureTolerance);
  m.def(
      "angular_diameter_distances",
      [](double h0, double omega_m, double z_d, double z_s) {
        const auto d = angular_diameter_distances({h0, omega_m}, {z_d, z_s});
        return py::make_tuple(d.d_d, d.d_s, d.d_ds);
      },
      py::arg("h0"), py::arg("omega_m"), py::arg("z_d"), py::arg("z_s"));
  m.def(
      "time_delay_distance",
      [](double h0, double omega_m, double z_d, double z_s) {
        return time_delay_distance({h0, omega_m}, {z_d, z_s});
      },
      py::arg("h0"), py::arg("omega_m"), py::arg("z_d"), py::arg("z_s"));
  m.def(
      "external_time_delay_distance",
      [](double h0, double omega_m, double z_d, double z_s, double kappa) {
        return external_time_delay_distance({h0, omega_m}, {z_d, z_s}, kappa);
      },
      py::arg("h0"), py::arg("omega_m"), py::arg("z_d"), py::arg("z_s"), py::arg("kappa_ext"));

  // data
  py::class_<PairMeasurement>(m, "PairMeasurement")
      .def(py::init<>())
      .def(py::init([](std::string label, double dh, double sd, double ph, double sp) {
             return PairMeasurement{std::move(label), dh, sd, ph, sp};
           }),
           py::arg("pair_label"), py::arg("delta_hat"), py::arg("sigma_delta"),
           py::arg("phi_hat"), py::arg("sigma_phi"))
      .def_readwrite("pair_label", &PairMeasurement::pair_label)
      .def_readwrite("delta_hat", &PairMeasurement::delta_hat)
      .def_readwrite("sigma_delta", &PairMeasurement::sigma_delta)
      .def_readwrite("phi_hat", &PairMeasurement::phi_hat)
      .def_readwrite("sigma_phi", &PairMeasurement::sigma_phi);

  py::class_<LensSystem>(m, "LensSystem")
      .def(py::init<>())
      .def(py::init([](std::string id, double z_d, double z_s, std::vector<PairMeasurement> p) {
             return LensSystem{std::move(id), {z_d, z_s}, std::move(p)};
           }),
           py::arg("lens_id"), py::arg("z_d"), py::arg("z_s"), py::arg("pairs"))
      .def_readwrite("lens_id", &LensSystem::lens_id)
      .def_property(
          "z_d", [](const LensSystem& l) { return l.z.z_d; },
          [](LensSystem& l, double v) { l.z.z_d = v; })
      .def_property(
          "z_s", [](const LensSystem& l) { return l.z.z_s; },
          [](LensSystem& l, double v) { l.z.z_s = v; })
      .def_readwrite("pairs", &LensSystem::pairs);

  m.def(
      "load_dataset",
      [](const std::filesystem::path& path, bool conservative_se) {
        auto loaded = load_dataset(path, LoadOptions{conservative_se});
        return py::make_tuple(loaded.data, loaded.diagnostics);
      },
      py::arg("path"), py::arg("conservative_se") = false);
  m.def("write_dataset", py::overload_cast<const std::filesystem::path&, const Dataset&>(&write_dataset),
        py::arg("path"), py::arg("dataset"));

  // likelihood
  m.def("student_t_log_density", &student_t_log_density, py::arg("x"), py::arg("location"),
        py::arg("scale"));
  m.def(
      "location_scale_for_pair",
      [](double h0, double omega_m, const LensSystem& lens, const PairMeasurement& pair,
         double kappa) {
        const auto ls = location_scale_for_pair(make_params(h0, omega_m, {{lens.lens_id, kappa}}),
                                                lens, pair);
        return py::make_tuple(ls.location, ls.scale);
      },
      py::arg("h0"), py::arg("omega_m"), py::arg("lens"), py::arg("pair"), py::arg("kappa_ext") = 0.0);
  m.def(
      "log_likelihood",
      [](const Dataset& data, double h0, double omega_m, const KappaMap& kappa,
         const std::string& err) {
        return log_likelihood(data, make_params(h0, omega_m, kappa), parse_error_model(err));
      },
      py::arg("dataset"), py::arg("h0"), py::arg("omega_m"), py::arg("kappa_ext"),
      py::arg("error_model") = "student_t4");
  m.def(
      "log_prior",
      [](double h0, double omega_m, const KappaMap& kappa) {
        return log_prior(make_params(h0, omega_m, kappa));
      },
      py::arg("h0"), py::arg("omega_m"), py::arg("kappa_ext"));
  m.def(
      "log_posterior",
      [](const Dataset& data, double h0, double omega_m, const KappaMap& kappa,
         const std::string& err) {
        return log_posterior(data, make_params(h0, omega_m, kappa), parse_error_model(err));
      },
      py::arg("dataset"), py::arg("h0"), py::arg("omega_m"), py::arg("kappa_ext"),
      py::arg("error_model") = "student_t4");
  m.def(
      "mle_fit",
      [](const Dataset& data, const std::string& err, double h0, double omega_m,
         const KappaMap& kappa, bool fit_kappa) {
        MleOptions opt;
        opt.fit_kappa = fit_kappa;
        const std::vector<ModelParams> starts{make_params(h0, omega_m, kappa)};
        const auto r = mle_fit(data, parse_error_model(err), starts, opt);
        return py::dict(py::arg("h0") = r.params.cosmo.h0,
                        py::arg("omega_m") = r.params.cosmo.omega_m,
                        py::arg("kappa_ext") = r.params.kappa_ext,
                        py::arg("log_likelihood") = r.log_likelihood,
                        py::arg("flat_direction") = r.flat_direction,
                        py::arg("warnings") = r.warnings);
      },
      py::arg("dataset"), py::arg("error_model"), py::arg("h0"), py::arg("omega_m"),
      py::arg("kappa_ext"), py::arg("fit_kappa") = true);

  // sampler
  py::class_<SamplerConfig>(m, "SamplerConfig")
      .def(py::init<>())
      .def_readwrite("n_chains", &SamplerConfig::n_chains)
      .def_readwrite("n_iterations", &SamplerConfig::n_iterations)
      .def_readwrite("burn_in_fraction", &SamplerConfig::burn_in_fraction)
      .def_readwrite("target_acceptance_rw", &SamplerConfig::target_acceptance_rw)
      .def_readwrite("target_acceptance_ram", &SamplerConfig::target_acceptance_ram)
      .def_property(
          "h0_update", [](const SamplerConfig& c) { return std::string(to_string(c.h0_update)); },
          [](SamplerConfig& c, const std::string& v) { c.h0_update = parse_h0_update(v); })
      .def_readwrite("initial_proposal_sd_h0", &SamplerConfig::initial_proposal_sd_h0)
      .def_readwrite("adaptation_gain", &SamplerConfig::adaptation_gain)
      .def_readwrite("seed", &SamplerConfig::seed)
      .def_readwrite("parallel", &SamplerConfig::parallel);

  m.def(
      "run_chains",
      [](const SamplerConfig& cfg, const Dataset& data, const std::string& err) {
        ChainSet set;
        {
          py::gil_scoped_release release;
          set = run_chains(cfg, data, parse_error_model(err));
        }
        return chains_to_dict(set);
      },
      py::arg("config"), py::arg("dataset"), py::arg("error_model") = "student_t4");

  // diagnostics
  m.def("gelman_rubin", &gelman_rubin, py::arg("chains"));
  m.def(
      "effective_sample_size",
      [](const std::vector<double>& x) { return effective_sample_size(x); }, py::arg("draws"));
  m.def(
      "summarize",
      [](const std::vector<std::string>& names, py::array_t<double> draws) {
        const auto s = summarize(dict_to_chains(names, draws));
        py::list out;
        for (const auto& p : s.parameters)
          out.append(py::dict(py::arg("name") = p.name, py::arg("mean") = p.mean,
                              py::arg("sd") = p.sd,
                              py::arg("central68") = py::make_tuple(p.central68.lower, p.central68.upper),
                              py::arg("central95") = py::make_tuple(p.central95.lower, p.central95.upper),
                              py::arg("rhat") = p.rhat, py::arg("ess") = p.ess));
        return out;
      },
      py::arg("param_names"), py::arg("draws"));
  m.def(
      "posterior_predictive_check",
      [](const std::vector<std::string>& names, py::array_t<double> draws, const Dataset& data,
         const std::string& err, std::uint64_t seed, std::size_t max_draws) {
        Rng rng(seed);
        const auto r = posterior_predictive_check(dict_to_chains(names, draws), data,
                                                  parse_error_model(err), rng, max_draws);
        return py::dict(py::arg("global_p") = r.global_p, py::arg("pair_p") = r.pair_p,
                        py::arg("pair_names") = r.pair_names);
      },
      py::arg("param_names"), py::arg("draws"), py::arg("dataset"),
      py::arg("error_model") = "student_t4", py::arg("seed") = 1, py::arg("max_draws") = 1000);
  m.def(
      "evaluate_against_truth",
      [](double mean, double sd, double truth) {
        return report_to_dict(evaluate_against_truth(mean, sd, truth));
      },
      py::arg("h0_mean"), py::arg("h0_sd"), py::arg("h0_true"));

  // simulation
  py::class_<PopulationSpec>(m, "PopulationSpec")
      .def(py::init<>())
      .def_readwrite("n_quads", &PopulationSpec::n_quads)
      .def_readwrite("n_doubles", &PopulationSpec::n_doubles)
      .def_readwrite("h0_true", &PopulationSpec::h0_true)
      .def_readwrite("omega_true", &PopulationSpec::omega_true)
      .def_readwrite("kappa_sd", &PopulationSpec::kappa_sd)
      .def_readwrite("cv_inputs", &PopulationSpec::cv_inputs)
      .def_property(
          "noise_mode", [](const PopulationSpec& s) { return std::string(to_string(s.noise_mode)); },
          [](PopulationSpec& s, const std::string& v) { s.noise_mode = parse_noise_mode(v); })
      .def_property(
          "delay_sign", [](const PopulationSpec& s) { return std::string(to_string(s.delay_sign)); },
          [](PopulationSpec& s, const std::string& v) { s.delay_sign = parse_delay_sign(v); });

  m.def(
      "generate_population",
      [](const PopulationSpec& spec, std::uint64_t seed) {
        Rng rng(seed);
        auto pop = generate_population(spec, rng);
        py::dict truth(py::arg("h0") = pop.truth.cosmo.h0,
                       py::arg("omega_m") = pop.truth.cosmo.omega_m,
                       py::arg("kappa_ext") = pop.truth.kappa, py::arg("delta") = pop.truth.delta,
                       py::arg("phi") = pop.truth.phi);
        return py::make_tuple(pop.data, truth);
      },
      py::arg("spec"), py::arg("seed"));
  m.def(
      "inject_outliers",
      [](const Dataset& data, std::vector<std::size_t> indices, double multiplier) {
        return inject_outliers(data, ContaminationPlan{std::move(indices), multiplier});
      },
      py::arg("dataset"), py::arg("pair_indices"), py::arg("shift_multiplier") = 10.0);
  m.def(
      "run_study",
      [](const PopulationSpec& spec, const std::vector<double>& levels,
         const std::vector<std::string>& models, const SamplerConfig& cfg, std::uint64_t seed) {
        std::vector<ErrorModel> errs;
        for (const auto& s : models) errs.push_back(parse_error_model(s));
        StudyResult r;
        {
          py::gil_scoped_release release;
          r = run_study(spec, levels, errs, cfg, seed);
        }
        py::list out;
        for (const auto& c : r.cells) {
          py::dict d = report_to_dict(c.report);
          d["level"] = c.level;
          d["n_outliers"] = c.n_outliers;
          d["error_model"] = to_string(c.err);
          d["h0_rhat"] = c.h0_rhat;
          d["h0_ess"] = c.h0_ess;
          out.append(d);
        }
        return out;
      },
      py::arg("spec"), py::arg("levels"), py::arg("error_models"), py::arg("config"),
      py::arg("seed"));
}
