#pragma once

// Weighted least-squares estimators for the decay, Rabi and fringe
// observables. Uncertainties are one sigma from the linearized covariance
// (J^T W J)^-1 with the supplied sigmas taken as absolute.

#include <Eigen/Dense>

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace afc {

struct Estimate {
  double value = 0.0;
  double sigma = 0.0;
};

struct FitReport {
  std::vector<std::string> names;  // parameter order of `covariance`
  std::map<std::string, Estimate> estimates;
  Eigen::MatrixXd covariance;
  double residual_norm = 0.0;  // sqrt(chi^2)
  std::size_t dof = 0;
  int iterations = 0;
  bool converged = false;
  bool at_boundary = false;  // an estimate was clamped to its allowed range
  bool degenerate = false;   // normal matrix was singular; affected sigmas are infinite

  const Estimate& at(const std::string& name) const;
};

// eta(T) = eta0 * exp(-(gamma T)^2 pi^2 / (2 ln 2)). Estimates "eta0",
// "gamma_is_mhz" and the fitted "gamma_sq" (which may go negative on noise).
FitReport fit_gaussian_decay(std::span<const double> ts_us, std::span<const double> etas,
                             std::span<const double> sigmas);

struct RabiFitSetup {
  double duration_us = 0.8;
  double power_ref_mw = 5.7;
  // Known multiplier on the three-level curve (e.g. the spin decay at the
  // storage time used); 1 reproduces the bare two-level-atom model.
  double spin_factor = 1.0;
  std::optional<double> initial_rabi_mhz;
  std::vector<double> afc_sigmas;  // empty: unit weights, covariance scaled by chi^2/dof
  std::vector<double> tle_sigmas;
};

// Simultaneous fit of A(P) = A_in (eta/2)(1 + cos th) and
// eta3(P) = s (eta/4)(1 - cos th)^2, th = 2 pi rabi sqrt(P/P_ref) t.
// Estimates "rabi_mhz", "eta_afc", "input_area". Five starts spread around
// the initial Rabi frequency; the lowest chi^2 wins.
FitReport fit_rabi(std::span<const double> powers_mw, std::span<const double> afc_areas,
                   std::span<const double> tle_effs, const RabiFitSetup& setup = {});

// areas = A (1 + V cos(phi - phi0)), solved as a weighted linear problem in
// (A, A V cos phi0, A V sin phi0). Estimates "amplitude", "visibility",
// "phase_rad". V is clamped to [0, 1] with at_boundary set. Sigmas <= 0 are
// floored at 1e-9 of the mean area.
FitReport fit_fringe(std::span<const double> phases, std::span<const double> areas,
                     std::span<const double> sigmas);

}  // namespace afc
