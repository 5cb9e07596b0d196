#include "h0meta/io.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include "h0meta/errors.hpp"

namespace fs = std::filesystem;

namespace h0meta {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(s);
  while (std::getline(in, field, delim)) out.push_back(trim(field));
  if (!s.empty() && s.back() == delim) out.emplace_back();
  return out;
}

double parse_number(const std::string& field, const char* what, std::size_t line) {
  if (field.empty()) throw ParseError(std::string("empty ") + what, line);
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (end != field.c_str() + field.size() || errno == ERANGE || !std::isfinite(v))
    throw ParseError(std::string("invalid ") + what + " '" + field + "'", line);
  return v;
}

std::uint64_t parse_count(const std::string& field, const char* what, std::size_t line) {
  if (field.empty() || field.find_first_not_of("0123456789") != std::string::npos)
    throw ParseError(std::string("invalid ") + what + " '" + field + "'", line);
  return std::stoull(field);
}

bool parse_bool(const std::string& field, std::size_t line) {
  if (field == "true" || field == "1" || field == "yes") return true;
  if (field == "false" || field == "0" || field == "no") return false;
  throw ParseError("invalid boolean '" + field + "'", line);
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "': file not found or unreadable");
  return in;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

void close_checked(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw std::runtime_error("I/O error while writing '" + path.string() + "'");
}

// Iterates key=value lines, skipping blanks and '#' comments.
template <class Fn>
void for_each_setting(std::istream& in, Fn&& fn) {
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value", line);
    fn(trim(text.substr(0, eq)), trim(text.substr(eq + 1)), line);
  }
}

bool apply_sampler_key(SamplerConfig& s, const std::string& key, const std::string& value,
                       std::size_t line) {
  if (key == "n_chains") s.n_chains = parse_count(value, "n_chains", line);
  else if (key == "n_iterations") s.n_iterations = parse_count(value, "n_iterations", line);
  else if (key == "burn_in_fraction") s.burn_in_fraction = parse_number(value, "burn_in_fraction", line);
  else if (key == "target_acceptance_rw") s.target_acceptance_rw = parse_number(value, key.c_str(), line);
  else if (key == "target_acceptance_ram") s.target_acceptance_ram = parse_number(value, key.c_str(), line);
  else if (key == "h0_update") s.h0_update = parse_h0_update(value);
  else if (key == "initial_h0_min") s.initial_h0_min = parse_number(value, key.c_str(), line);
  else if (key == "initial_h0_max") s.initial_h0_max = parse_number(value, key.c_str(), line);
  else if (key == "initial_proposal_sd_h0") s.initial_proposal_sd_h0 = parse_number(value, key.c_str(), line);
  else if (key == "adaptation_window") s.adaptation_window = parse_count(value, key.c_str(), line);
  else if (key == "adaptation_exponent") s.adaptation_exponent = parse_number(value, key.c_str(), line);
  else if (key == "adaptation_gain") s.adaptation_gain = parse_number(value, key.c_str(), line);
  else if (key == "seed") s.seed = parse_count(value, "seed", line);
  else if (key == "parallel") s.parallel = parse_bool(value, line);
  else return false;
  return true;
}

void sampler_text(std::ostream& out, const SamplerConfig& s) {
  out << "n_chains=" << s.n_chains << '\n'
      << "n_iterations=" << s.n_iterations << '\n'
      << "burn_in_fraction=" << format_number(s.burn_in_fraction) << '\n'
      << "target_acceptance_rw=" << format_number(s.target_acceptance_rw) << '\n'
      << "target_acceptance_ram=" << format_number(s.target_acceptance_ram) << '\n'
      << "h0_update=" << to_string(s.h0_update) << '\n'
      << "initial_h0_min=" << format_number(s.initial_h0_min) << '\n'
      << "initial_h0_max=" << format_number(s.initial_h0_max) << '\n'
      << "initial_proposal_sd_h0=" << format_number(s.initial_proposal_sd_h0) << '\n'
      << "adaptation_window=" << s.adaptation_window << '\n'
      << "adaptation_exponent=" << format_number(s.adaptation_exponent) << '\n'
      << "adaptation_gain=" << format_number(s.adaptation_gain) << '\n'
      << "seed=" << s.seed << '\n'
      << "parallel=" << (s.parallel ? "true" : "false") << '\n';
}

template <class T, class Parse>
std::vector<T> parse_list(const std::string& value, Parse&& parse) {
  std::vector<T> out;
  for (const auto& item : split(value, ','))
    if (!item.empty()) out.push_back(parse(item));
  return out;
}

}  // namespace

std::string format_number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double conservative_standard_error(double plus, double minus) {
  return std::max(std::abs(plus), std::abs(minus));
}

double parse_uncertainty(const std::string& field, bool conservative_se, std::size_t line) {
  const auto slash = field.find('/');
  if (slash == std::string::npos) return parse_number(field, "standard error", line);
  if (!conservative_se)
    throw ParseError("two-sided uncertainty '" + field + "' requires --conservative-se", line);
  const std::string plus = trim(field.substr(0, slash));
  const std::string minus = trim(field.substr(slash + 1));
  if (plus.empty() || plus[0] != '+' || minus.empty() || minus[0] != '-')
    throw ParseError("two-sided uncertainty must be written +a/-b, got '" + field + "'", line);
  return conservative_standard_error(parse_number(plus.substr(1), "upper uncertainty", line),
                                     parse_number(minus.substr(1), "lower uncertainty", line));
}

LoadedDataset parse_dataset(std::istream& in, const LoadOptions& options) {
  LoadedDataset out;
  std::string raw;
  std::size_t line = 0;
  bool header_seen = false;
  std::map<std::string, std::size_t> index;

  while (std::getline(in, raw)) {
    ++line;
    const std::string text = trim(raw);
    if (text.empty()) continue;
    if (!header_seen) {
      if (text != kDatasetHeader)
        throw ParseError(std::string("expected header '") + kDatasetHeader + "'", line);
      header_seen = true;
      continue;
    }
    const auto f = split(text, ',');
    if (f.size() != 9) throw ParseError("expected 9 columns, found " + std::to_string(f.size()), line);
    if (f[0].empty()) throw ParseError("empty lens_id", line);
    if (f[3].empty()) throw ParseError("empty pair_label", line);

    const RedshiftPair z{parse_number(f[1], "z_d", line), parse_number(f[2], "z_s", line)};
    if (!(z.z_d > 0.0 && z.z_d < z.z_s))
      throw ParseError("redshifts must satisfy 0 < z_d < z_s", line);

    double unit = 1.0;
    if (f[8] == "arcsec2") unit = constants::rad2_per_arcsec2;
    else if (f[8] != "rad2") throw ParseError("phi_unit must be arcsec2 or rad2, got '" + f[8] + "'", line);

    PairMeasurement m;
    m.pair_label = f[3];
    m.delta_hat = parse_number(f[4], "delta_hat_days", line);
    m.sigma_delta = parse_uncertainty(f[5], options.conservative_se, line);
    m.phi_hat = parse_number(f[6], "phi_hat", line) * unit;
    m.sigma_phi = parse_uncertainty(f[7], options.conservative_se, line) * unit;
    if (!(m.sigma_delta > 0.0)) throw ParseError("sigma_delta_days must be positive", line);
    if (!(m.sigma_phi > 0.0)) throw ParseError("sigma_phi must be positive", line);

    auto it = index.find(f[0]);
    if (it == index.end()) {
      it = index.emplace(f[0], out.data.size()).first;
      out.data.push_back(LensSystem{f[0], z, {}});
    }
    LensSystem& lens = out.data[it->second];
    if (lens.z.z_d != z.z_d || lens.z.z_s != z.z_s)
      throw ParseError("inconsistent redshifts for lens '" + f[0] + "'", line);
    for (const auto& p : lens.pairs)
      if (p.pair_label == m.pair_label)
        throw ParseError("duplicate pair '" + m.pair_label + "' in lens '" + f[0] + "'", line);

    if (m.delta_hat * m.phi_hat < 0.0)
      out.diagnostics.push_back("line " + std::to_string(line) + ": " + f[0] + ":" + m.pair_label +
                                " time delay and Fermat difference have opposite signs");
    lens.pairs.push_back(std::move(m));
  }
  if (!header_seen) throw ParseError("missing header row", 0);

  for (const auto& lens : out.data) {
    if (lens.z.z_d == 0.5 && lens.z.z_s == 2.0)
      out.diagnostics.push_back(lens.lens_id +
                                ": redshifts equal the fiducial placeholder (0.5, 2.0)");
    else if (lens.z.z_d > 1.5 || lens.z.z_s > 6.0)
      out.diagnostics.push_back(lens.lens_id + ": redshifts outside the usual lensed-quasar range");
  }
  return out;
}

LoadedDataset load_dataset(const fs::path& path, const LoadOptions& options) {
  auto in = open_input(path);
  try {
    return parse_dataset(in, options);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

void write_dataset(std::ostream& out, const Dataset& data) {
  out << kDatasetHeader << '\n';
  for (const auto& lens : data)
    for (const auto& p : lens.pairs)
      out << lens.lens_id << ',' << format_number(lens.z.z_d) << ',' << format_number(lens.z.z_s)
          << ',' << p.pair_label << ',' << format_number(p.delta_hat) << ','
          << format_number(p.sigma_delta) << ',' << format_number(p.phi_hat) << ','
          << format_number(p.sigma_phi) << ",rad2\n";
}

void write_dataset(const fs::path& path, const Dataset& data) {
  auto out = open_output(path);
  write_dataset(out, data);
  close_checked(out, path);
}

RunConfig parse_run_config(std::istream& in) {
  RunConfig c;
  for_each_setting(in, [&](const std::string& key, const std::string& value, std::size_t line) {
    if (apply_sampler_key(c.sampler, key, value, line)) return;
    if (key == "error_model") c.err = parse_error_model(value);
    else if (key == "output_dir") c.output_dir = value;
    else if (key == "conservative_se") c.conservative_se = parse_bool(value, line);
    else throw ParseError("unknown configuration key '" + key + "'", line);
  });
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  auto in = open_input(path);
  return parse_run_config(in);
}

std::string to_text(const RunConfig& c) {
  std::ostringstream out;
  out << "error_model=" << to_string(c.err) << '\n';
  sampler_text(out, c.sampler);
  if (!c.output_dir.empty()) out << "output_dir=" << c.output_dir.string() << '\n';
  out << "conservative_se=" << (c.conservative_se ? "true" : "false") << '\n';
  return out.str();
}

StudyConfig parse_study_config(std::istream& in) {
  StudyConfig c;
  auto& p = c.population;
  for_each_setting(in, [&](const std::string& key, const std::string& value, std::size_t line) {
    if (key == "seed") {
      c.seed = parse_count(value, "seed", line);
      return;
    }
    if (apply_sampler_key(c.sampler, key, value, line)) return;
    const char* k = key.c_str();
    if (key == "n_quads") p.n_quads = parse_count(value, k, line);
    else if (key == "n_doubles") p.n_doubles = parse_count(value, k, line);
    else if (key == "h0_true") p.h0_true = parse_number(value, k, line);
    else if (key == "omega_true") p.omega_true = parse_number(value, k, line);
    else if (key == "kappa_sd") p.kappa_sd = parse_number(value, k, line);
    else if (key == "cv_inputs") p.cv_inputs = parse_number(value, k, line);
    else if (key == "noise_mode") p.noise_mode = parse_noise_mode(value);
    else if (key == "z_d_min") p.z_d.lo = parse_number(value, k, line);
    else if (key == "z_d_max") p.z_d.hi = parse_number(value, k, line);
    else if (key == "z_s_min") p.z_s.lo = parse_number(value, k, line);
    else if (key == "z_s_max") p.z_s.hi = parse_number(value, k, line);
    else if (key == "delay_min_days") p.delay_days.lo = parse_number(value, k, line);
    else if (key == "delay_max_days") p.delay_days.hi = parse_number(value, k, line);
    else if (key == "delay_sign") p.delay_sign = parse_delay_sign(value);
    else if (key == "levels")
      c.levels = parse_list<double>(value, [&](const std::string& s) { return parse_number(s, "level", line); });
    else if (key == "error_models")
      c.err_models = parse_list<ErrorModel>(value, [](const std::string& s) { return parse_error_model(s); });
    else if (key == "output_dir") c.output_dir = value;
    else throw ParseError("unknown configuration key '" + key + "'", line);
  });
  return c;
}

StudyConfig load_study_config(const fs::path& path) {
  auto in = open_input(path);
  return parse_study_config(in);
}

std::string to_text(const StudyConfig& c) {
  std::ostringstream out;
  const auto& p = c.population;
  out << "n_quads=" << p.n_quads << '\n'
      << "n_doubles=" << p.n_doubles << '\n'
      << "h0_true=" << format_number(p.h0_true) << '\n'
      << "omega_true=" << format_number(p.omega_true) << '\n'
      << "kappa_sd=" << format_number(p.kappa_sd) << '\n'
      << "cv_inputs=" << format_number(p.cv_inputs) << '\n'
      << "noise_mode=" << to_string(p.noise_mode) << '\n'
      << "z_d_min=" << format_number(p.z_d.lo) << "\nz_d_max=" << format_number(p.z_d.hi) << '\n'
      << "z_s_min=" << format_number(p.z_s.lo) << "\nz_s_max=" << format_number(p.z_s.hi) << '\n'
      << "delay_min_days=" << format_number(p.delay_days.lo) << '\n'
      << "delay_max_days=" << format_number(p.delay_days.hi) << '\n'
      << "delay_sign=" << to_string(p.delay_sign) << '\n';
  out << "levels=";
  for (std::size_t i = 0; i < c.levels.size(); ++i) out << (i ? "," : "") << format_number(c.levels[i]);
  out << "\nerror_models=";
  for (std::size_t i = 0; i < c.err_models.size(); ++i) out << (i ? "," : "") << to_string(c.err_models[i]);
  out << '\n';
  SamplerConfig s = c.sampler;
  s.seed = c.seed;
  sampler_text(out, s);
  if (!c.output_dir.empty()) out << "output_dir=" << c.output_dir.string() << '\n';
  return out.str();
}

void write_summary(std::ostream& out, const PosteriorSummary& summary) {
  out << "parameter,mean,sd,q2.5,q16,q84,q97.5,rhat,ess\n";
  for (const auto& p : summary.parameters)
    out << p.name << ',' << format_number(p.mean) << ',' << format_number(p.sd) << ','
        << format_number(p.central95.lower) << ',' << format_number(p.central68.lower) << ','
        << format_number(p.central68.upper) << ',' << format_number(p.central95.upper) << ','
        << format_number(p.rhat) << ',' << format_number(p.ess) << '\n';
}

void write_reports(std::ostream& out, std::span<const StudyReport> reports) {
  out << "label,h0_true,h0_mean,h0_sd,bias_pct,abs_bias_pct,cv_pct,rmse\n";
  for (const auto& r : reports)
    out << r.label << ',' << format_number(r.h0_true) << ',' << format_number(r.h0_mean) << ','
        << format_number(r.h0_sd) << ',' << format_number(r.bias_pct) << ','
        << format_number(r.abs_bias_pct()) << ',' << format_number(r.cv_pct) << ','
        << format_number(r.rmse) << '\n';
}

void write_ppc(std::ostream& out, const PpcResult& ppc) {
  out << "pair,p_value\n";
  out << "global," << format_number(ppc.global_p) << '\n';
  for (std::size_t i = 0; i < ppc.pair_p.size(); ++i)
    out << ppc.pair_names[i] << ',' << format_number(ppc.pair_p[i]) << '\n';
}

void write_outputs(const ChainSet& chains, const PosteriorSummary& summary,
                   std::span<const StudyReport> reports, const fs::path& dir,
                   const RunManifest& manifest) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir.string() + "': " + ec.message());

  for (std::size_t c = 0; c < chains.chains.size(); ++c) {
    const fs::path path = dir / ("chain_" + std::to_string(c + 1) + ".csv");
    auto out = open_output(path);
    out << "iteration";
    for (const auto& name : chains.param_names) out << ',' << name;
    out << '\n';
    const Chain& chain = chains.chains[c];
    for (std::size_t i = 0; i < chain.n_draws(); ++i) {
      out << (i + 1);
      for (std::size_t j = 0; j < chain.n_params; ++j) out << ',' << format_number(chain.at(i, j));
      out << '\n';
    }
    close_checked(out, path);
  }
  {
    const fs::path path = dir / "summary.csv";
    auto out = open_output(path);
    write_summary(out, summary);
    close_checked(out, path);
  }
  if (!reports.empty()) {
    const fs::path path = dir / "study_report.csv";
    auto out = open_output(path);
    write_reports(out, reports);
    close_checked(out, path);
  }
  const fs::path path = dir / "manifest.txt";
  auto out = open_output(path);
  out << "version=" << kVersion << '\n' << "command=" << manifest.command << '\n';
  if (!manifest.dataset.empty()) out << "dataset=" << manifest.dataset << '\n';
  out << "n_chains=" << chains.chains.size() << '\n';
  for (std::size_t c = 0; c < chains.chains.size(); ++c)
    out << "chain_" << (c + 1) << "_seed=" << chains.chains[c].seed << '\n';
  out << "# configuration\n" << manifest.config_text;
  close_checked(out, path);
}

ChainSet read_chains(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("'" + dir.string() + "' is not a directory");
  std::vector<std::pair<std::size_t, fs::path>> files;
  static const std::regex pattern(R"(chain_(\d+)\.csv)");
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) files.emplace_back(std::stoul(m[1]), entry.path());
  }
  if (files.empty()) throw std::runtime_error("no chain_<n>.csv files in '" + dir.string() + "'");
  std::sort(files.begin(), files.end());

  ChainSet set;
  for (const auto& [idx, path] : files) {
    auto in = open_input(path);
    std::string raw;
    std::size_t line = 0;
    Chain chain;
    while (std::getline(in, raw)) {
      ++line;
      const std::string text = trim(raw);
      if (text.empty()) continue;
      auto f = split(text, ',');
      if (line == 1) {
        if (f.empty() || f[0] != "iteration") throw ParseError(path.string() + ": bad header", 1);
        std::vector<std::string> names(f.begin() + 1, f.end());
        if (set.param_names.empty()) set.param_names = names;
        else if (names != set.param_names)
          throw ParseError(path.string() + ": parameter columns differ between chains", 1);
        chain.n_params = names.size();
        continue;
      }
      if (f.size() != chain.n_params + 1)
        throw ParseError(path.string() + ": wrong number of columns", line);
      for (std::size_t j = 1; j < f.size(); ++j)
        chain.draws.push_back(parse_number(f[j], "draw", line));
    }
    set.chains.push_back(std::move(chain));
  }
  return set;
}

std::string read_manifest_value(const fs::path& dir, const std::string& key) {
  std::ifstream in(dir / "manifest.txt");
  std::string raw;
  while (std::getline(in, raw)) {
    const auto eq = raw.find('=');
    if (eq != std::string::npos && trim(raw.substr(0, eq)) == key) return trim(raw.substr(eq + 1));
  }
  return {};
}

}  // namespace h0meta
