#include "afc/fit.hpp"

#include "afc/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

namespace afc {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Fills weighted residuals r = (y - model)/sigma and their Jacobian with
// respect to the parameters (d r / d p).
using ResidualFn = std::function<void(const VectorXd& p, VectorXd& r, MatrixXd& J)>;

struct LmOutcome {
  VectorXd p;
  double chi2 = 0.0;
  int iterations = 0;
  bool converged = false;
};

LmOutcome levenberg_marquardt(const ResidualFn& fn, VectorXd p, int max_iter = 500) {
  VectorXd r;
  MatrixXd J;
  fn(p, r, J);
  double chi2 = r.squaredNorm();
  double lambda = 1e-3;
  LmOutcome out;
  for (int it = 1; it <= max_iter; ++it) {
    out.iterations = it;
    const MatrixXd A = J.transpose() * J;
    const VectorXd g = J.transpose() * r;
    if (g.lpNorm<Eigen::Infinity>() <= 1e-15 * std::max(1.0, chi2)) {
      out.converged = true;
      break;
    }
    bool improved = false;
    while (lambda < 1e16) {
      MatrixXd damped = A;
      for (Eigen::Index i = 0; i < A.rows(); ++i) damped(i, i) += lambda * std::max(A(i, i), 1e-12);
      const VectorXd step = damped.ldlt().solve(-g);
      const VectorXd trial = p + step;
      VectorXd rt;
      MatrixXd Jt;
      fn(trial, rt, Jt);
      const double chi2t = rt.squaredNorm();
      if (std::isfinite(chi2t) && chi2t <= chi2) {
        const double drop = chi2 - chi2t;
        const double step_rel = step.norm() / (p.norm() + 1e-12);
        p = trial;
        r = rt;
        J = Jt;
        chi2 = chi2t;
        lambda = std::max(lambda * 0.3, 1e-12);
        improved = true;
        if (drop <= 1e-14 * std::max(chi2, 1e-300) || step_rel < 1e-13 || chi2 == 0.0) out.converged = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!improved) {
      // No descent direction left: already at a minimum to working precision.
      out.converged = true;
      break;
    }
    if (out.converged) break;
  }
  out.p = p;
  out.chi2 = chi2;
  return out;
}

// (J^T J)^-1 at p; rank-deficient directions get infinite variance.
MatrixXd covariance_at(const ResidualFn& fn, const VectorXd& p, bool& degenerate) {
  VectorXd r;
  MatrixXd J;
  fn(p, r, J);
  const MatrixXd A = J.transpose() * J;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(A);
  const VectorXd& ev = eig.eigenvalues();
  const MatrixXd& V = eig.eigenvectors();
  const double cutoff = 1e-12 * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  MatrixXd cov = MatrixXd::Zero(A.rows(), A.cols());
  degenerate = false;
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    if (ev(k) > cutoff) {
      cov += V.col(k) * V.col(k).transpose() / ev(k);
    } else {
      degenerate = true;
      for (Eigen::Index i = 0; i < A.rows(); ++i)
        if (std::abs(V(i, k)) > 1e-8) cov(i, i) = std::numeric_limits<double>::infinity();
    }
  }
  return cov;
}

void require_sizes(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw Error(errc::kDegenerateData, std::string(what) + " arrays differ in length");
}

const double kDecayScale = std::numbers::pi * std::numbers::pi / (2.0 * std::numbers::ln2);

}  // namespace

const Estimate& FitReport::at(const std::string& name) const {
  const auto it = estimates.find(name);
  if (it == estimates.end()) throw Error(errc::kDomain, "fit report has no estimate '" + name + "'");
  return it->second;
}

FitReport fit_gaussian_decay(std::span<const double> ts, std::span<const double> etas,
                             std::span<const double> sigmas) {
  require_sizes(ts.size(), etas.size(), "decay");
  require_sizes(ts.size(), sigmas.size(), "decay");
  const std::size_t n = ts.size();
  if (n < 4) throw Error(errc::kDegenerateData, "decay fit needs at least 4 points");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(ts[i]) || !std::isfinite(etas[i]) || !(sigmas[i] > 0.0))
      throw Error(errc::kDegenerateData, "decay fit needs finite data and positive sigmas");
  }
  if (std::all_of(ts.begin(), ts.end(), [&](double t) { return t * t == ts[0] * ts[0]; }))
    throw Error(errc::kDegenerateData, "decay fit needs at least two distinct |T_S|");

  auto fn = [&](const VectorXd& p, VectorXd& r, MatrixXd& J) {
    r.resize(static_cast<Eigen::Index>(n));
    J.resize(static_cast<Eigen::Index>(n), 2);
    for (std::size_t i = 0; i < n; ++i) {
      const double k = kDecayScale * ts[i] * ts[i];
      const double e = std::exp(-p(1) * k);
      const auto row = static_cast<Eigen::Index>(i);
      r(row) = (etas[i] - p(0) * e) / sigmas[i];
      J(row, 0) = -e / sigmas[i];
      J(row, 1) = p(0) * k * e / sigmas[i];
    }
  };

  // Start from a weighted log-linear fit when all points are positive.
  VectorXd p0(2);
  p0 << *std::max_element(etas.begin(), etas.end()), 0.0;
  if (std::all_of(etas.begin(), etas.end(), [](double e) { return e > 0.0; })) {
    MatrixXd X(static_cast<Eigen::Index>(n), 2);
    VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const double w = etas[i] / sigmas[i];
      const auto row = static_cast<Eigen::Index>(i);
      X(row, 0) = w;
      X(row, 1) = -w * kDecayScale * ts[i] * ts[i];
      y(row) = w * std::log(etas[i]);
    }
    const VectorXd b = X.colPivHouseholderQr().solve(y);
    if (b.allFinite()) p0 << std::exp(b(0)), b(1);
  }

  const auto lm = levenberg_marquardt(fn, p0);
  if (!lm.converged || !lm.p.allFinite()) throw Error(errc::kNonConvergence, "decay fit did not converge");

  FitReport rep;
  rep.names = {"eta0", "gamma_sq"};
  rep.covariance = covariance_at(fn, lm.p, rep.degenerate);
  rep.iterations = lm.iterations;
  rep.converged = true;
  rep.residual_norm = std::sqrt(lm.chi2);
  rep.dof = n - 2;
  const double u = lm.p(1);
  const double su = std::sqrt(rep.covariance(1, 1));
  rep.estimates["eta0"] = {lm.p(0), std::sqrt(rep.covariance(0, 0))};
  rep.estimates["gamma_sq"] = {u, su};
  // Delta method away from zero; near zero the sigma becomes sqrt(sigma_u).
  const double g = std::sqrt(std::max(u, 0.0));
  const double sg = (g * g > su) ? su / (2.0 * g) : std::sqrt(su);
  rep.estimates["gamma_is_mhz"] = {g, sg};
  rep.at_boundary = u < 0.0;
  return rep;
}

FitReport fit_rabi(std::span<const double> powers, std::span<const double> afc, std::span<const double> tle,
                   const RabiFitSetup& s) {
  require_sizes(powers.size(), afc.size(), "rabi");
  require_sizes(powers.size(), tle.size(), "rabi");
  const std::size_t n = powers.size();
  if (n < 5) throw Error(errc::kDegenerateData, "rabi fit needs at least 5 points");
  if (!(s.duration_us > 0.0) || !(s.power_ref_mw > 0.0) || !(s.spin_factor > 0.0))
    throw Error(errc::kDomain, "rabi fit needs positive duration, reference power and spin factor");
  for (std::size_t i = 0; i < n; ++i)
    if (!(powers[i] >= 0.0) || !std::isfinite(afc[i]) || !std::isfinite(tle[i]))
      throw Error(errc::kDegenerateData, "rabi fit needs finite data and non-negative powers");
  const bool weighted = !s.afc_sigmas.empty() || !s.tle_sigmas.empty();
  if (weighted) {
    require_sizes(s.afc_sigmas.size(), n, "rabi sigma");
    require_sizes(s.tle_sigmas.size(), n, "rabi sigma");
    for (std::size_t i = 0; i < n; ++i)
      if (!(s.afc_sigmas[i] > 0.0) || !(s.tle_sigmas[i] > 0.0))
        throw Error(errc::kDegenerateData, "rabi sigmas must be positive");
  }
  auto sa = [&](std::size_t i) { return weighted ? s.afc_sigmas[i] : 1.0; };
  auto st = [&](std::size_t i) { return weighted ? s.tle_sigmas[i] : 1.0; };

  // p = (rabi, eta, input_area)
  auto fn = [&](const VectorXd& p, VectorXd& r, MatrixXd& J) {
    r.resize(static_cast<Eigen::Index>(2 * n));
    J.setZero(static_cast<Eigen::Index>(2 * n), 3);
    for (std::size_t i = 0; i < n; ++i) {
      const double k = 2.0 * std::numbers::pi * std::sqrt(powers[i] / s.power_ref_mw) * s.duration_us;
      const double th = k * p(0);
      const double c = std::cos(th), sn = std::sin(th);
      const auto a = static_cast<Eigen::Index>(i);
      const auto b = static_cast<Eigen::Index>(n + i);
      r(a) = (afc[i] - p(2) * p(1) * 0.5 * (1.0 + c)) / sa(i);
      J(a, 0) = p(2) * p(1) * 0.5 * sn * k / sa(i);
      J(a, 1) = -p(2) * 0.5 * (1.0 + c) / sa(i);
      J(a, 2) = -p(1) * 0.5 * (1.0 + c) / sa(i);
      const double q = 1.0 - c;
      r(b) = (tle[i] - s.spin_factor * p(1) * 0.25 * q * q) / st(i);
      J(b, 0) = -s.spin_factor * p(1) * 0.5 * q * sn * k / st(i);
      J(b, 1) = -s.spin_factor * 0.25 * q * q / st(i);
    }
  };

  const double max_power = *std::max_element(powers.begin(), powers.end());
  if (!(max_power > 0.0)) throw Error(errc::kDegenerateData, "rabi fit needs at least one non-zero power");
  const double k_max = 2.0 * std::numbers::pi * std::sqrt(max_power / s.power_ref_mw) * s.duration_us;
  const double omega0 = s.initial_rabi_mhz.value_or(std::numbers::pi / k_max);
  const std::size_t i_min = static_cast<std::size_t>(std::min_element(powers.begin(), powers.end()) - powers.begin());

  std::optional<LmOutcome> best;
  for (double f : {0.3, 0.55, 1.0, 1.8, 3.3}) {
    VectorXd p0(3);
    // eta from the largest 3LE value assuming full transfer, A_in from the
    // lowest-power AFC area.
    const double eta_guess =
        std::max(*std::max_element(tle.begin(), tle.end()) / s.spin_factor, 1e-6);
    p0 << f * omega0, eta_guess, afc[i_min] / eta_guess;
    const auto lm = levenberg_marquardt(fn, p0);
    if (lm.p.allFinite() && (!best || lm.chi2 < best->chi2)) best = lm;
  }
  if (!best || !best->converged) throw Error(errc::kNonConvergence, "rabi fit did not converge");

  FitReport rep;
  rep.names = {"rabi_mhz", "eta_afc", "input_area"};
  VectorXd p = best->p;
  p(0) = std::abs(p(0));  // the model is even in the Rabi frequency
  rep.covariance = covariance_at(fn, p, rep.degenerate);
  rep.dof = 2 * n - 3;
  if (!weighted && rep.dof > 0) rep.covariance *= best->chi2 / static_cast<double>(rep.dof);
  rep.iterations = best->iterations;
  rep.converged = true;
  rep.residual_norm = std::sqrt(best->chi2);
  for (Eigen::Index i = 0; i < 3; ++i)
    rep.estimates[rep.names[static_cast<std::size_t>(i)]] = {p(i), std::sqrt(std::max(rep.covariance(i, i), 0.0))};
  return rep;
}

FitReport fit_fringe(std::span<const double> phases, std::span<const double> areas, std::span<const double> sigmas) {
  require_sizes(phases.size(), areas.size(), "fringe");
  require_sizes(phases.size(), sigmas.size(), "fringe");
  const std::size_t n = phases.size();
  if (n < 8) throw Error(errc::kDegenerateData, "fringe fit needs at least 8 phases");
  const auto [pmin, pmax] = std::minmax_element(phases.begin(), phases.end());
  if (*pmax - *pmin < 2.0 * std::numbers::pi * (1.0 - 1.0 / static_cast<double>(n)) - 1e-9)
    throw Error(errc::kDegenerateData, "fringe phases must span a full period");
  double mean = 0.0;
  for (double a : areas) {
    if (!std::isfinite(a)) throw Error(errc::kDegenerateData, "fringe areas must be finite");
    mean += std::abs(a) / static_cast<double>(n);
  }
  const double floor = std::max(1e-9 * mean, 1e-300);

  MatrixXd X(static_cast<Eigen::Index>(n), 3);
  VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 1.0 / std::max(sigmas[i], floor);
    const auto row = static_cast<Eigen::Index>(i);
    X(row, 0) = w;
    X(row, 1) = w * std::cos(phases[i]);
    X(row, 2) = w * std::sin(phases[i]);
    y(row) = w * areas[i];
  }
  const MatrixXd A = X.transpose() * X;
  Eigen::LDLT<MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success || !(std::abs(ldlt.vectorD().minCoeff()) > 0.0))
    throw Error(errc::kNonConvergence, "fringe normal equations are singular");
  const VectorXd b = ldlt.solve(X.transpose() * y);
  const MatrixXd cov_lin = ldlt.solve(MatrixXd::Identity(3, 3));
  if (!b.allFinite() || !(b(0) > 0.0)) throw Error(errc::kNonConvergence, "fringe mean area must be positive");

  const double amp = std::hypot(b(1), b(2));
  double v = amp / b(0);
  // Gradients of V and phi0 with respect to (a, b, c) for the delta method.
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(3, 3);
  G(0, 0) = 1.0;
  if (amp > 0.0) {
    G(1, 0) = -v / b(0);
    G(1, 1) = b(1) / (amp * b(0));
    G(1, 2) = b(2) / (amp * b(0));
    G(2, 1) = -b(2) / (amp * amp);
    G(2, 2) = b(1) / (amp * amp);
  } else {
    // V = |(b, c)| / a is not differentiable at zero; use the radial sigma.
    G(1, 1) = 1.0 / b(0);
  }

  FitReport rep;
  rep.names = {"amplitude", "visibility", "phase_rad"};
  rep.covariance = G * cov_lin * G.transpose();
  rep.converged = true;
  rep.iterations = 1;
  rep.dof = n - 3;
  rep.residual_norm = (X * b - y).norm();
  if (v > 1.0) {
    v = 1.0;
    rep.at_boundary = true;
  }
  rep.estimates["amplitude"] = {b(0), std::sqrt(rep.covariance(0, 0))};
  rep.estimates["visibility"] = {v, std::sqrt(rep.covariance(1, 1))};
  rep.estimates["phase_rad"] = {std::atan2(b(2), b(1)), std::sqrt(rep.covariance(2, 2))};
  return rep;
}

}  // namespace afc
