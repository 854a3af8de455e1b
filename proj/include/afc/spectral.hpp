#pragma once

// Comb geometry, spectral grids and the closed-form efficiency model.
//
// Units throughout the library: ordinary (not angular) frequencies in MHz,
// times in microseconds, powers in mW. Detuning 0 is the input carrier.

#include <cstddef>
#include <vector>

namespace afc {

// Uniform, periodic frequency grid. Sample i sits at
// center - span/2 + i * span/num_points.
struct SpectralGrid {
  double center_mhz = 0.0;
  double span_mhz = 1.0;
  std::size_t num_points = 2;

  double resolution() const { return span_mhz / static_cast<double>(num_points); }
  double start() const { return center_mhz - 0.5 * span_mhz; }
  double frequency(std::size_t i) const { return start() + static_cast<double>(i) * resolution(); }

  // num_points >= 2 and a power of two, span > 0.
  void validate() const;
};

enum class ToothShape { gaussian };

struct CombSpec {
  double delta_mhz = 0.5;        // tooth spacing
  double tooth_fwhm_mhz = 0.125; // tooth full width at half maximum
  int num_teeth = 5;
  double peak_depth = 4.12;      // optical depth of a tooth above background
  double background_depth = 0.45;
  ToothShape tooth_shape = ToothShape::gaussian;

  double finesse() const { return delta_mhz / tooth_fwhm_mhz; }
  double bandwidth_mhz() const { return num_teeth * delta_mhz; }
  double storage_time_us() const { return 1.0 / delta_mhz; }
  double tooth_center(int k) const { return (k - 0.5 * (num_teeth - 1)) * delta_mhz; }

  void validate() const;
};

// sqrt(pi / ln 16): integral of a unit-height Gaussian divided by its FWHM.
inline constexpr double kGaussianAreaFactor = 1.0644670194312262;

struct OpticalDepthProfile {
  SpectralGrid grid;
  std::vector<double> depth;
  // Narrowest spectral feature (FWHM) the grid must resolve; 0 if unknown.
  double feature_fwhm_mhz = 0.0;

  double mean_depth() const;
  double integrated_depth() const;  // sum(depth) * resolution, MHz
};

struct CombDesign {
  CombSpec comb;
  double predicted_afc_efficiency = 0.0;
  double predicted_3le_efficiency = 0.0;
  int mode_capacity = 0;
};

// Picks a grid centred on the comb: span >= span_factor * bandwidth and at
// least 8 points per tooth FWHM (rounded up to a power of two).
SpectralGrid grid_for_comb(const CombSpec& spec, double span_factor = 4.0);

OpticalDepthProfile build_comb_profile(const CombSpec& spec, const SpectralGrid& grid);

// Forward AFC echo efficiency for Gaussian teeth:
//   dt^2 exp(-7/F^2) exp(-dt) exp(-d0),   dt = d / F.
double afc_echo_efficiency(double d, double finesse, double d0);

// Upper bound of afc_echo_efficiency over d and F at d0 = 0: 4 / e^2.
inline constexpr double kForwardEfficiencyBound = 0.54134113294645081;

// eta_afc * eta_t^2
double three_level_efficiency(double eta_afc, double eta_t);

struct FinesseOptimum {
  double finesse = 0.0;
  double efficiency = 0.0;
  bool degenerate = false;  // objective is flat (no absorbers)
};

// Maximizes afc_echo_efficiency over F in [f_lo, f_hi] (a subset of [1, 100])
// with golden-section search, then compares against the endpoints.
FinesseOptimum optimize_finesse(double d, double d0, double f_lo, double f_hi);

struct MultimodeRequest {
  double bandwidth_mhz = 2.0;
  double min_tooth_fwhm_mhz = 0.1;
  double mode_duration_us = 1.0;
  double control_duration_us = 2.0;
  int n_modes = 5;
  double peak_depth = 4.12;
  double background_depth = 0.45;
  double transfer_efficiency = 1.0;  // per control pulse, used for the 3LE prediction
};

CombDesign plan_multimode(const MultimodeRequest& request);

}  // namespace afc
