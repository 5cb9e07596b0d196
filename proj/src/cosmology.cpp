#include "h0meta/cosmology.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <sstream>

#include "h0meta/errors.hpp"

namespace h0meta {

namespace {

// 2^15 leaf intervals; the integrand is smooth so this is never approached in practice.
constexpr unsigned kMaxDepth = 15;

double integrate_inverse_w(double a, double b, double omega_m, double rel_tol) {
  if (!(rel_tol > 0.0)) throw DomainError("quadrature tolerance must be positive");
  if (a == b) return 0.0;
  auto f = [omega_m](double u) { return 1.0 / inverse_expansion_rate(u, omega_m); };
  double err = 0.0;
  const double value =
      boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, kMaxDepth,
                                                                    rel_tol, &err);
  const double achieved = err / std::abs(value);
  if (!(achieved <= rel_tol)) {
    std::ostringstream msg;
    msg << "comoving integral over [" << a << ", " << b << "] did not converge (achieved "
        << achieved << ", requested " << rel_tol << ")";
    throw NumericalError(msg.str(), achieved);
  }
  return value;
}

}  // namespace

void validate(const Cosmology& cosmo) {
  if (!(cosmo.h0 > 0.0) || !std::isfinite(cosmo.h0))
    throw DomainError("H0 must be positive and finite");
  if (!(cosmo.omega_m > 0.0 && cosmo.omega_m < 1.0))
    throw DomainError("Omega_m must lie in (0, 1)");
}

void validate(const RedshiftPair& z) {
  if (!(z.z_d > 0.0)) throw DomainError("deflector redshift must be positive");
  if (!(z.z_d < z.z_s))
    throw GeometryError("deflector redshift must be below source redshift (z_d < z_s)");
}

double inverse_expansion_rate(double u, double omega_m) {
  if (!(u >= 0.0)) throw DomainError("inverse_expansion_rate: u must be >= 0");
  const double a = 1.0 + u;
  return std::sqrt(a * a * a * omega_m + (1.0 - omega_m));
}

double comoving_integral(double z, double omega_m, double rel_tol) {
  if (!(z >= 0.0)) throw DomainError("comoving_integral: z must be >= 0");
  return integrate_inverse_w(0.0, z, omega_m, rel_tol);
}

double comoving_integral_between(double z1, double z2, double omega_m, double rel_tol) {
  if (!(z1 >= 0.0) || !(z2 >= z1))
    throw DomainError("comoving_integral_between: require 0 <= z1 <= z2");
  return integrate_inverse_w(z1, z2, omega_m, rel_tol);
}

AngularDistances angular_diameter_distances(const Cosmology& cosmo, const RedshiftPair& z,
                                            double rel_tol) {
  validate(cosmo);
  validate(z);
  const double i_d = comoving_integral(z.z_d, cosmo.omega_m, rel_tol);
  const double i_s = comoving_integral(z.z_s, cosmo.omega_m, rel_tol);
  const double hubble = constants::c_km_per_s / cosmo.h0;
  AngularDistances d{};
  d.d_d = hubble * i_d / (1.0 + z.z_d);
  d.d_s = hubble * i_s / (1.0 + z.z_s);
  d.d_ds = hubble * (i_s - i_d) / (1.0 + z.z_s);
  if (!(d.d_ds > 0.0)) throw GeometryError("non-positive deflector-source distance");
  return d;
}

double time_delay_distance_factor(double omega_m, const RedshiftPair& z, double rel_tol) {
  validate(z);
  const double i_d = comoving_integral(z.z_d, omega_m, rel_tol);
  const double i_s = comoving_integral(z.z_s, omega_m, rel_tol);
  const double gap = i_s - i_d;
  if (!(gap > 0.0)) throw GeometryError("non-positive deflector-source distance");
  return i_d * i_s / gap;
}

double time_delay_distance(const Cosmology& cosmo, const RedshiftPair& z, double rel_tol) {
  validate(cosmo);
  return constants::c_km_per_s / cosmo.h0 *
         time_delay_distance_factor(cosmo.omega_m, z, rel_tol);
}

double external_time_delay_distance(const Cosmology& cosmo, const RedshiftPair& z,
                                    double kappa_ext, double rel_tol) {
  if (!(kappa_ext < 1.0))
    throw DomainError("external convergence must be below 1");
  return time_delay_distance(cosmo, z, rel_tol) / (1.0 - kappa_ext);
}

}  // namespace h0meta
