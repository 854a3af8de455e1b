#pragma once

// Scripted reproductions of the storage experiments (presets fig2a, fig2b,
// fig3, fig4, fig5) and the data tables / report they emit.

#include "afc/fit.hpp"
#include "afc/io.hpp"
#include "afc/propagation.hpp"
#include "afc/spinwave.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace afc {

// Comb of the two-level demonstration: delta 0.5 MHz, gamma 125 kHz, d 4.12, d0 0.45.
CombSpec fig2a_comb();

struct TwoLevelParams {
  CombSpec comb = fig2a_comb();
  double pulse_fwhm_us = 0.84;
  double window_us = kDefaultWindowUs;
  bool apply_optical_t2 = false;
  double t2_us = 111.0;
};

struct TwoLevelResult {
  FieldTrace reference;  // through an empty medium
  FieldTrace output;
  double efficiency = 0.0;        // echo window / reference window
  double transmitted = 0.0;       // transmitted window / reference window
  double echo_time_us = 0.0;      // echo peak minus transmitted peak
  double predicted_efficiency = 0.0;  // closed form
};

TwoLevelResult exp_two_level_afc(const TwoLevelParams& p);

struct DecayParams {
  CombSpec comb = fig2a_comb();
  MaterialParams material;
  double pulse_fwhm_us = 0.84;
  double transfer_center_us = 1.0;
  double control_duration_us = 0.8;
  double control_power_mw = 5.7;
  std::vector<double> ts_us{2, 4, 6, 8, 10, 12, 14, 16, 18, 20};
  double relative_sigma = 0.01;  // weights handed to the fitter
  double window_us = kDefaultWindowUs;
};

struct DecayResult {
  std::vector<double> ts_us;
  std::vector<double> efficiency;            // windowed area / input area
  std::vector<double> amplitude_efficiency;  // peak intensity ratio
  double efficiency_t0 = 0.0;                // simulated at T_S -> 0 limit (no decay)
  FitReport fit;
};

DecayResult exp_spinwave_decay(const DecayParams& p);

struct RabiParams {
  CombSpec comb = fig2a_comb();
  MaterialParams material;
  double pulse_fwhm_us = 0.84;
  double transfer_center_us = 1.0;
  double control_duration_us = 0.8;
  double max_power_mw = 5.7;
  std::size_t num_powers = 16;  // uniform in sqrt(power), starting at 0
  double ts_us = 4.0;
  double window_us = kDefaultWindowUs;
};

struct RabiResult {
  std::vector<double> powers_mw;
  std::vector<double> afc_area;  // two-level echo window area
  std::vector<double> tle_efficiency;
  double input_area = 0.0;       // reference window area
  double eta_afc = 0.0;          // zero-power echo / input
  double spin_factor = 1.0;      // closed-form decay at ts_us
  FitReport fit;
};

RabiResult exp_rabi_sweep(const RabiParams& p);

// Two square 0.7 us bins 1 us apart, a pi transfer-in 3 us after the first
// bin, a pi/2 readout after T_S and a pi readout 1 us later.
StorageSequence fig4_sequence(double ts_us, const MaterialParams& material, double linewidth_mhz,
                              std::uint64_t seed);

struct TimebinParams {
  MaterialParams material;
  double linewidth_mhz = 0.0555;
  std::vector<double> ts_us{8, 10, 12, 14, 16};
  std::size_t num_phases = 12;
  std::size_t trials_per_phase = 10;
  PhaseSweep sweep = PhaseSweep::bin;
  std::uint64_t seed = 0;
};

struct TimebinPoint {
  double ts_us = 0.0;
  VisibilityResult visibility;
  double mean_area = 0.0;  // central window, averaged over the fringe
};

struct TimebinResult {
  std::vector<TimebinPoint> points;
  double mean_visibility = 0.0;
  double slope_per_us = 0.0;
  double slope_sigma = 0.0;
  bool slope_consistent_with_zero = false;  // |slope| <= 1.96 sigma
};

TimebinResult exp_timebin(const TimebinParams& p, unsigned workers = 1);

struct MultimodeParams {
  MaterialParams material;
  int n_modes = 5;
  double delta_mhz = 1.0 / 7.0;
  int num_teeth = 15;
  double tooth_fwhm_mhz = 0.1;
  double peak_depth = 4.12;
  double background_depth = 0.45;
  double bin_fwhm_us = 0.4;
  double bin_spacing_us = 1.0;
  double control_duration_us = 0.8;
  double control_power_mw = 5.7;
  double ts_us = 7.0;
  double window_us = kDefaultWindowUs;
  // Efficiency-vs-N series under the tau = (2 + N) us schedule.
  double series_bandwidth_mhz = 2.0;
  int series_max_modes = 5;
  // Optional photon-counting histogram of the N = n_modes output.
  bool poisson = false;
  double photons_per_pulse = 2e4;
  double attenuation_od = 6.5;
  std::size_t poisson_trials = 500;
  std::uint64_t seed = 0;
};

struct MultimodeResult {
  FieldTrace output;
  std::vector<double> mode_times_us;
  std::vector<double> mode_areas;          // per-mode windowed three-level echo area
  std::vector<double> crosstalk;           // largest leak into a neighbouring window / own area
  std::vector<double> gap_areas;           // retrieved field between mode windows
  double reference_area = 0.0;             // one input bin through an empty medium
  std::vector<int> series_modes;
  std::vector<double> series_efficiency;   // mean per-mode efficiency for N modes
  std::optional<PhotonHistogram> histogram;
};

MultimodeResult exp_multimode(const MultimodeParams& p, unsigned workers = 1);

struct ExperimentConfig {
  std::string preset = "fig2a";
  std::uint64_t seed = 0;
  unsigned workers = 1;
  MaterialParams material;
  std::optional<double> linewidth_mhz;      // fig4 override
  std::optional<std::size_t> trials_per_phase;
  bool poisson = false;                     // fig5 photon histogram
};

struct ExperimentResult {
  std::string preset;
  nlohmann::json report;  // inputs, seeds and estimates
  std::vector<Table> tables;
};

const std::vector<std::string>& experiment_presets();

// Throws domain-error for an unknown preset.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

nlohmann::json to_json(const FitReport& fit);

}  // namespace afc
