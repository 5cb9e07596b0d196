#pragma once

// Flat Lambda-CDM distances used by the time-delay likelihood.
//
// All distances are in Mpc. H0 enters only as a c/H0 prefactor, so the
// H0-free part of the time-delay distance is exposed separately
// (time_delay_distance_factor) for callers that cache it per Omega_m.

namespace h0meta {

namespace constants {
inline constexpr double c_km_per_s = 299792.458;
inline constexpr double seconds_per_day = 86400.0;
inline constexpr double km_per_mpc = 3.0856775814913673e19;
/// Speed of light in Mpc per day.
inline constexpr double c_mpc_per_day = c_km_per_s * seconds_per_day / km_per_mpc;
/// One square arcsecond in steradian (radian^2).
inline constexpr double rad2_per_arcsec2 =
    (3.14159265358979323846 / 648000.0) * (3.14159265358979323846 / 648000.0);
}  // namespace constants

inline constexpr double kDefaultQuadratureTolerance = 1e-8;

struct Cosmology {
  double h0 = 70.0;       // km s^-1 Mpc^-1
  double omega_m = 0.3;   // Omega_Lambda = 1 - omega_m

  double omega_lambda() const noexcept { return 1.0 - omega_m; }
};

struct RedshiftPair {
  double z_d = 0.5;  // deflector
  double z_s = 2.0;  // source
};

struct AngularDistances {
  double d_d;
  double d_s;
  double d_ds;
};

/// W(u) = sqrt((1+u)^3 Om + (1 - Om)). Throws DomainError for u < 0.
double inverse_expansion_rate(double u, double omega_m);

/// Integral of 1/W(u) over [0, z] by adaptive Gauss-Kronrod.
/// Throws NumericalError if rel_tol is not reached within the subdivision cap.
double comoving_integral(double z, double omega_m,
                                 double rel_tol = kDefaultQuadratureTolerance);

/// Integral of 1/W(u) over [z1, z2], z2 >= z1 >= 0.
double comoving_integral_between(double z1, double z2, double omega_m,
                                 double rel_tol = kDefaultQuadratureTolerance);

AngularDistances angular_diameter_distances(const Cosmology& cosmo, const RedshiftPair& z,
                                            double rel_tol = kDefaultQuadratureTolerance);

/// I_d * I_s / (I_s - I_d), so that D_dt = (c / H0) * factor.
double time_delay_distance_factor(double omega_m, const RedshiftPair& z,
                                  double rel_tol = kDefaultQuadratureTolerance);

/// D_dt = (1 + z_d) D_d D_s / D_ds, evaluated in the simplified single-fraction form.
double time_delay_distance(const Cosmology& cosmo, const RedshiftPair& z,
                           double rel_tol = kDefaultQuadratureTolerance);

/// D_dt / (1 - kappa_ext). Throws DomainError for kappa_ext >= 1.
double external_time_delay_distance(const Cosmology& cosmo, const RedshiftPair& z,
                                    double kappa_ext,
                                    double rel_tol = kDefaultQuadratureTolerance);

void validate(const Cosmology& cosmo);
void validate(const RedshiftPair& z);

}  // namespace h0meta
