#include "afc/spectral.hpp"

#include "afc/error.hpp"
#include "afc/fft.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace afc {
namespace {

bool finite_nonneg(double x) { return std::isfinite(x) && x >= 0.0; }

constexpr double kGridSlack = 1.0 + 1e-9;

}  // namespace

void SpectralGrid::validate() const {
  if (num_points < 2 || !fft::is_power_of_two(num_points))
    throw Error(errc::kDomain, "spectral grid num_points must be a power of two >= 2");
  if (!(span_mhz > 0.0) || !std::isfinite(span_mhz))
    throw Error(errc::kDomain, "spectral grid span must be positive");
  if (!std::isfinite(center_mhz)) throw Error(errc::kDomain, "spectral grid center must be finite");
}

void CombSpec::validate() const {
  if (!(delta_mhz > 0.0) || !std::isfinite(delta_mhz))
    throw Error(errc::kDomain, "delta_mhz must be positive");
  if (!(tooth_fwhm_mhz > 0.0) || !std::isfinite(tooth_fwhm_mhz))
    throw Error(errc::kDomain, "tooth_fwhm_mhz must be positive");
  if (finesse() < 1.0 - 1e-12) throw Error(errc::kDomain, "finesse delta/tooth_fwhm must be >= 1");
  if (num_teeth < 1) throw Error(errc::kDomain, "num_teeth must be >= 1");
  if (!finite_nonneg(peak_depth)) throw Error(errc::kDomain, "peak_depth must be >= 0");
  if (!finite_nonneg(background_depth)) throw Error(errc::kDomain, "background_depth must be >= 0");
}

double OpticalDepthProfile::mean_depth() const {
  if (depth.empty()) return 0.0;
  return std::accumulate(depth.begin(), depth.end(), 0.0) / static_cast<double>(depth.size());
}

double OpticalDepthProfile::integrated_depth() const {
  return std::accumulate(depth.begin(), depth.end(), 0.0) * grid.resolution();
}

SpectralGrid grid_for_comb(const CombSpec& spec, double span_factor) {
  spec.validate();
  if (!(span_factor >= 1.0)) throw Error(errc::kDomain, "span_factor must be >= 1");
  SpectralGrid grid;
  grid.center_mhz = 0.0;
  grid.span_mhz = span_factor * spec.bandwidth_mhz();
  const double max_resolution = spec.tooth_fwhm_mhz / 8.0;
  const auto needed = static_cast<std::size_t>(std::ceil(grid.span_mhz / max_resolution));
  grid.num_points = fft::next_power_of_two(std::max<std::size_t>(needed, 2));
  return grid;
}

OpticalDepthProfile build_comb_profile(const CombSpec& spec, const SpectralGrid& grid) {
  spec.validate();
  grid.validate();
  if (grid.resolution() > spec.tooth_fwhm_mhz / 8.0 * kGridSlack)
    throw Error(errc::kGridTooCoarse, "grid resolution " + std::to_string(grid.resolution()) +
                                          " MHz exceeds tooth_fwhm/8");
  if (spec.bandwidth_mhz() > grid.span_mhz * kGridSlack)
    throw Error(errc::kCombExceedsSpan, "comb bandwidth exceeds grid span");

  OpticalDepthProfile profile;
  profile.grid = grid;
  profile.feature_fwhm_mhz = spec.tooth_fwhm_mhz;
  profile.depth.assign(grid.num_points, spec.background_depth);

  const double a = 4.0 * std::log(2.0) / (spec.tooth_fwhm_mhz * spec.tooth_fwhm_mhz);
  const double reach = 10.0 * spec.tooth_fwhm_mhz;
  const double res = grid.resolution();
  for (int k = 0; k < spec.num_teeth; ++k) {
    const double c = grid.center_mhz + spec.tooth_center(k);
    const auto lo = static_cast<long>(std::floor((c - reach - grid.start()) / res));
    const auto hi = static_cast<long>(std::ceil((c + reach - grid.start()) / res));
    for (long i = std::max(0L, lo); i <= std::min<long>(hi, grid.num_points - 1); ++i) {
      const double x = grid.frequency(static_cast<std::size_t>(i)) - c;
      profile.depth[i] += spec.peak_depth * std::exp(-a * x * x);
    }
  }
  return profile;
}

double afc_echo_efficiency(double d, double finesse, double d0) {
  if (!finite_nonneg(d)) throw Error(errc::kDomain, "d must be >= 0");
  if (!finite_nonneg(d0)) throw Error(errc::kDomain, "d0 must be >= 0");
  if (!std::isfinite(finesse) || finesse < 1.0) throw Error(errc::kDomain, "finesse must be >= 1");
  const double dt = d / finesse;
  return dt * dt * std::exp(-7.0 / (finesse * finesse)) * std::exp(-dt) * std::exp(-d0);
}

double three_level_efficiency(double eta_afc, double eta_t) {
  auto in_unit = [](double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; };
  if (!in_unit(eta_afc) || !in_unit(eta_t))
    throw Error(errc::kDomain, "efficiencies must lie in [0, 1]");
  return eta_afc * eta_t * eta_t;
}

FinesseOptimum optimize_finesse(double d, double d0, double f_lo, double f_hi) {
  if (!std::isfinite(f_lo) || !std::isfinite(f_hi) || f_lo < 1.0 || f_hi > 100.0 || !(f_lo < f_hi))
    throw Error(errc::kBadBounds, "finesse bounds must satisfy 1 <= lo < hi <= 100");
  auto objective = [&](double f) { return afc_echo_efficiency(d, f, d0); };

  FinesseOptimum best;
  if (objective(f_lo) == 0.0 && objective(f_hi) == 0.0 && objective(0.5 * (f_lo + f_hi)) == 0.0) {
    best.finesse = f_lo;
    best.efficiency = 0.0;
    best.degenerate = true;
    return best;
  }

  // The objective's log-derivative has the sign of -2F^2 + dF + 14, so it is
  // unimodal on F > 0 and golden-section search converges to the maximum.
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = f_lo, b = f_hi;
  double c = b - inv_phi * (b - a);
  double e = a + inv_phi * (b - a);
  double fc = objective(c), fe = objective(e);
  while (b - a > 1e-9 * std::max(1.0, std::abs(a))) {
    if (fc >= fe) {
      b = e;
      e = c;
      fe = fc;
      c = b - inv_phi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = e;
      fc = fe;
      e = a + inv_phi * (b - a);
      fe = objective(e);
    }
  }
  best.finesse = 0.5 * (a + b);
  best.efficiency = objective(best.finesse);
  for (double endpoint : {f_lo, f_hi}) {
    const double v = objective(endpoint);
    if (v > best.efficiency) {
      best.finesse = endpoint;
      best.efficiency = v;
    }
  }
  return best;
}

CombDesign plan_multimode(const MultimodeRequest& r) {
  auto positive = [](double x) { return std::isfinite(x) && x > 0.0; };
  if (!positive(r.bandwidth_mhz) || !positive(r.min_tooth_fwhm_mhz) || !positive(r.mode_duration_us) ||
      !positive(r.control_duration_us) || r.n_modes < 1)
    throw Error(errc::kDomain, "multimode plan needs positive durations, frequencies and n_modes >= 1");

  const double storage_time = r.n_modes * r.mode_duration_us + r.control_duration_us;
  const double delta = 1.0 / storage_time;
  const int teeth = static_cast<int>(std::floor(r.bandwidth_mhz / delta + 1e-9));
  if (teeth < 1) throw Error(errc::kBandwidthTooSmall, "bandwidth holds no comb tooth at the required spacing");
  if (teeth < r.n_modes)
    throw Error(errc::kCapacityInfeasible, std::to_string(teeth) + " teeth cannot hold " +
                                               std::to_string(r.n_modes) + " modes");

  CombDesign design;
  design.comb.delta_mhz = delta;
  const double finesse = std::max(1.0, delta / r.min_tooth_fwhm_mhz);
  design.comb.tooth_fwhm_mhz = delta / finesse;
  design.comb.num_teeth = teeth;
  design.comb.peak_depth = r.peak_depth;
  design.comb.background_depth = r.background_depth;
  design.predicted_afc_efficiency = afc_echo_efficiency(r.peak_depth, finesse, r.background_depth);
  design.predicted_3le_efficiency =
      three_level_efficiency(design.predicted_afc_efficiency, r.transfer_efficiency);
  const int time_limited =
      static_cast<int>(std::floor((storage_time - r.control_duration_us) / r.mode_duration_us + 1e-9));
  design.mode_capacity = std::min(teeth, time_limited);
  return design;
}

}  // namespace afc
