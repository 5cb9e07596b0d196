#include "h0meta/mle.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "h0meta/errors.hpp"

namespace h0meta {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kH0Unit = 10.0;
constexpr double kOmegaUnit = 0.05;
constexpr double kKappaUnit = prior::kappa_scale;

using Vec = std::vector<double>;

// Maps scaled coordinates to dense parameters. Fixed kappas are carried separately.
struct Problem {
  const PosteriorEvaluator& eval;
  bool fit_kappa;
  Vec fixed_kappa;
  int evaluations = 0;

  std::size_t dim() const { return 2 + (fit_kappa ? eval.n_lenses() : 0); }

  void unpack(const Vec& x, double& h0, double& om, Vec& kappa) const {
    h0 = x[0] * kH0Unit;
    om = x[1] * kOmegaUnit;
    if (fit_kappa) {
      kappa.resize(eval.n_lenses());
      for (std::size_t k = 0; k < kappa.size(); ++k) kappa[k] = x[2 + k] * kKappaUnit;
    } else {
      kappa = fixed_kappa;
    }
  }

  // Negative log likelihood, +inf outside the prior box.
  double operator()(const Vec& x) {
    ++evaluations;
    double h0, om;
    Vec kappa;
    unpack(x, h0, om, kappa);
    if (!in_support(h0, om)) return kInf;
    for (double k : kappa)
      if (!(k < 1.0)) return kInf;
    const auto factors = eval.distance_factors(om);
    const double ll = eval.log_likelihood(h0, kappa, factors);
    return std::isfinite(ll) ? -ll : kInf;
  }
};

struct Simplex {
  std::vector<Vec> pts;
  Vec vals;
};

double diameter(const Simplex& s) {
  double d = 0.0;
  for (std::size_t i = 1; i < s.pts.size(); ++i)
    for (std::size_t j = 0; j < s.pts[i].size(); ++j)
      d = std::max(d, std::abs(s.pts[i][j] - s.pts[0][j]));
  return d;
}

Vec nelder_mead(Problem& f, Vec x0, double tol, int max_evals) {
  const std::size_t n = x0.size();
  Simplex s;
  s.pts.push_back(x0);
  for (std::size_t i = 0; i < n; ++i) {
    Vec p = x0;
    p[i] += 1.0;
    if (!std::isfinite(f(p))) p[i] = x0[i] - 1.0;
    s.pts.push_back(p);
  }
  for (const auto& p : s.pts) s.vals.push_back(f(p));

  std::vector<std::size_t> order(n + 1);
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return s.vals[a] < s.vals[b]; });
    Simplex sorted;
    for (auto i : order) {
      sorted.pts.push_back(s.pts[i]);
      sorted.vals.push_back(s.vals[i]);
    }
    s = std::move(sorted);
  };

  auto along = [&](const Vec& c, const Vec& w, double t) {
    Vec r(n);
    for (std::size_t j = 0; j < n; ++j) r[j] = c[j] + t * (w[j] - c[j]);
    return r;
  };

  sort_simplex();
  while (diameter(s) > tol && f.evaluations < max_evals) {
    Vec centroid(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) centroid[j] += s.pts[i][j] / double(n);

    const Vec& worst = s.pts[n];
    Vec xr = along(centroid, worst, -1.0);
    const double fr = f(xr);
    if (fr < s.vals[0]) {
      Vec xe = along(centroid, worst, -2.0);
      const double fe = f(xe);
      if (fe < fr) {
        s.pts[n] = xe;
        s.vals[n] = fe;
      } else {
        s.pts[n] = xr;
        s.vals[n] = fr;
      }
    } else if (fr < s.vals[n - 1]) {
      s.pts[n] = xr;
      s.vals[n] = fr;
    } else {
      const bool outside = fr < s.vals[n];
      Vec xc = outside ? along(centroid, worst, -0.5) : along(centroid, worst, 0.5);
      const double fc = f(xc);
      if (fc < std::min(fr, s.vals[n])) {
        s.pts[n] = xc;
        s.vals[n] = fc;
      } else {
        for (std::size_t i = 1; i <= n; ++i) {
          s.pts[i] = along(s.pts[0], s.pts[i], 0.5);
          s.vals[i] = f(s.pts[i]);
        }
      }
    }
    sort_simplex();
  }
  return s.pts[0];
}

Eigen::VectorXd curvature_eigenvalues(Problem& f, const Vec& x) {
  const std::size_t n = x.size();
  const double h = 1e-3;
  const double f0 = f(x);
  Eigen::MatrixXd hess(n, n);
  auto eval_at = [&](std::size_t i, double di, std::size_t j, double dj) {
    Vec y = x;
    y[i] += di;
    y[j] += dj;
    return f(y);
  };
  for (std::size_t i = 0; i < n; ++i) {
    hess(i, i) = (eval_at(i, h, i, 0.0) - 2.0 * f0 + eval_at(i, -h, i, 0.0)) / (h * h);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = (eval_at(i, h, j, h) - eval_at(i, h, j, -h) - eval_at(i, -h, j, h) +
                        eval_at(i, -h, j, -h)) /
                       (4.0 * h * h);
      hess(i, j) = hess(j, i) = v;
    }
  }
  if (!hess.allFinite()) return {};
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(hess, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

}  // namespace

MleResult mle_fit(const Dataset& data, ErrorModel err, std::span<const ModelParams> starts,
                  const MleOptions& options) {
  PosteriorEvaluator eval(data, err);
  MleResult best;
  best.log_likelihood = -kInf;
  bool any_valid = false;
  Problem best_problem{eval, options.fit_kappa, {}};
  Vec best_x;
  int total_evals = 0;

  for (const auto& start : starts) {
    if (!std::isfinite(log_prior(start)) || !in_support(start.cosmo.h0, start.cosmo.omega_m))
      continue;
    const Vec kappa = eval.dense_kappa(start);
    Problem problem{eval, options.fit_kappa, kappa};
    Vec x0{start.cosmo.h0 / kH0Unit, start.cosmo.omega_m / kOmegaUnit};
    if (options.fit_kappa)
      for (double k : kappa) x0.push_back(k / kKappaUnit);
    const double f_start = problem(x0);
    if (!std::isfinite(f_start)) continue;
    any_valid = true;

    // A restart from the first optimum guards against a collapsed simplex.
    Vec x = nelder_mead(problem, x0, options.tolerance, options.max_evaluations);
    x = nelder_mead(problem, x, options.tolerance, options.max_evaluations);
    const double ll = -problem(x);
    total_evals += problem.evaluations;
    if (ll > best.log_likelihood) {
      best.log_likelihood = ll;
      best_x = x;
      best_problem.fixed_kappa = problem.fixed_kappa;
    }
  }
  if (!any_valid) throw ConfigError("mle_fit: no start point inside the prior support");

  double h0, om;
  Vec kappa;
  best_problem.unpack(best_x, h0, om, kappa);
  best.params = eval.to_params(h0, om, kappa);
  best.evaluations = total_evals;
  if (total_evals >= options.max_evaluations * int(starts.size()))
    best.warnings.push_back("evaluation budget exhausted before simplex convergence");

  const Eigen::VectorXd eig = curvature_eigenvalues(best_problem, best_x);
  if (eig.size() == 0) {
    best.warnings.push_back("curvature unavailable: optimum touches the support boundary");
  } else {
    best.curvature.assign(eig.data(), eig.data() + eig.size());
    const double largest = eig.cwiseAbs().maxCoeff();
    const double smallest = eig.cwiseAbs().minCoeff();
    if (smallest <= options.flat_ratio * largest) {
      best.flat_direction = true;
      std::ostringstream msg;
      msg << "flat direction: curvature eigenvalue " << smallest << " vs largest " << largest
          << "; the maximum is not unique (H0 and kappa enter only through their product)";
      best.warnings.push_back(msg.str());
    }
  }
  return best;
}

}  // namespace h0meta
