#pragma once

// Three-level (spin-wave) storage: control-pulse transfer, spin dephasing,
// partial readouts and laser phase noise on top of the linear AFC engine.

#include "afc/fit.hpp"
#include "afc/propagation.hpp"
#include "afc/rng.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace afc {

struct MaterialParams {
  std::array<double, 2> ground_splittings_mhz{10.2, 17.3};  // 1/2g-3/2g, 3/2g-5/2g
  std::array<double, 2> excited_splittings_mhz{4.8, 4.6};
  double t1_excited_us = 164.0;
  double t2_excited_us = 111.0;
  double gamma_is_mhz = 0.0256;
  double alpha_per_cm = 23.0;
  double length_cm = 0.3;
  double rabi_ref_mhz = 0.34;
  double power_ref_mw = 5.7;
  // branching[e][g]: probability that excited level e decays to ground g.
  std::array<std::array<double, 3>, 3> branching{{{1.0 / 3, 1.0 / 3, 1.0 / 3},
                                                  {1.0 / 3, 1.0 / 3, 1.0 / 3},
                                                  {1.0 / 3, 1.0 / 3, 1.0 / 3}}};

  double d_full() const { return alpha_per_cm * length_cm; }
  void validate() const;
};

enum class ControlRole { transfer_in, readout };

struct ControlPulse {
  double start_us = 0.0;
  double duration_us = 0.8;
  double power_mw = 5.7;
  double phase_rad = 0.0;
  ControlRole role = ControlRole::readout;

  double center_us() const { return start_us + 0.5 * duration_us; }
  void validate() const;
};

enum class NoiseTarget { inputs, controls, both };

struct PhaseNoiseModel {
  double linewidth_mhz = 0.0;  // Lorentzian FWHM
  std::uint64_t seed = 0;
  NoiseTarget apply_to = NoiseTarget::inputs;
};

struct StorageFlags {
  bool apply_optical_t2 = false;
  std::size_t mc_spins = 0;  // > 0: Monte Carlo spin dephasing instead of the closed form
};

struct StorageSequence {
  std::vector<Pulse> bins;
  std::vector<ControlPulse> controls;  // transfer_in first, then readouts in time order
  CombSpec comb;
  MaterialParams material;
  PhaseNoiseModel noise;
  double t_w_us = 1000.0;
  StorageFlags flags;
  double window_us = kDefaultWindowUs;
  double min_span_us = 0.0;  // lower bound on the simulated time span (shared grids across runs)

  // Throws sequence-invariant-violation.
  void validate() const;
};

// 2 pi rabi_ref sqrt(P / P_ref) t
double pulse_area(double power_mw, double duration_us, const MaterialParams& material);
// Power giving area theta in the given duration.
double power_for_area(double theta, double duration_us, const MaterialParams& material);
// sin^2(theta / 2)
double transfer_efficiency(double theta);
// A_in (eta/2)(1 + cos theta)
double afc_area_vs_power(double theta, double eta_afc, double input_area);
// (eta/4)(1 - cos theta)^2
double three_level_vs_power(double theta, double eta_afc);
// exp(-(gamma T)^2 pi^2 / (2 ln 2)), an intensity factor.
double spin_decay_factor(double gamma_is_mhz, double t_s_us);
// T_S at which spin_decay_factor = 1/2.
double spin_half_decay_time(double gamma_is_mhz);

// Mean of exp(i 2 pi delta T) over `samples` Gaussian spin detunings of
// FWHM gamma.
cplx mc_spin_coherence(double gamma_is_mhz, double t_s_us, std::size_t samples, std::uint64_t seed);
// |mc_spin_coherence|^2
double mc_spin_decay(double gamma_is_mhz, double t_s_us, std::size_t samples, std::uint64_t seed);

// Wiener phase at each time, starting from 0 at times[0]; increments have
// variance 2 pi linewidth dt. Throws unsorted-times.
std::vector<double> sample_laser_phase(double linewidth_mhz, std::span<const double> times_us, Rng& rng);
std::vector<double> sample_laser_phase(const PhaseNoiseModel& noise, std::span<const double> times_us);

struct Emission {
  std::size_t bin = 0;
  std::size_t readout = 0;  // index among readouts
  double time_us = 0.0;
  cplx amplitude;           // complex coefficient times sqrt(echo energy)
  double energy = 0.0;
};

struct ModeRecord {
  std::size_t bin = 0;
  double arrival_us = 0.0;
  double input_energy = 0.0;
  double absorbed_energy = 0.0;     // input minus transmitted pulse energy
  double echo_energy = 0.0;         // full two-level rephased emission of this bin
  cplx spin_amplitude;              // after transfer-in
  double stored_energy = 0.0;       // |spin_amplitude|^2
  std::vector<double> residual_energy;  // spin energy left after each readout
};

struct ModeLedger {
  std::vector<ModeRecord> modes;
  std::vector<Emission> emissions;
  std::vector<EchoWindow> windows;  // one per distinct emission time (or the plain echo)
};

struct StorageResult {
  FieldTrace trace;
  ModeLedger ledger;
};

// Precomputes one output waveform per linear component (each bin's direct
// propagation, and each bin's echo released by each readout) so that noise
// trials and phase sweeps reduce to complex coefficient sums.
class StorageSimulator {
 public:
  explicit StorageSimulator(const StorageSequence& seq);

  const StorageSequence& sequence() const { return seq_; }
  const TimeGrid& grid() const { return grid_; }
  std::size_t num_components() const { return waveforms_.size(); }
  std::size_t num_readouts() const { return readout_index_.size(); }
  double storage_time_us() const { return seq_.comb.storage_time_us(); }

  // Component index for the direct part of bin j and for bin j released by
  // readout k.
  std::size_t direct_component(std::size_t bin) const { return bin; }
  std::size_t echo_component(std::size_t bin, std::size_t readout) const;
  // Emission time of bin j released by readout k.
  double emission_time(std::size_t bin, std::size_t readout) const;

  // Coefficients for one realization: laser phases drawn from trial `trial`
  // of the sequence's noise model. bin_phases / control_phases default to
  // those stored in the sequence.
  std::vector<cplx> coefficients(std::uint64_t trial, std::span<const double> bin_phases = {},
                                 std::span<const double> control_phases = {}) const;

  FieldTrace trace(std::span<const cplx> coefficients) const;

  // Gram matrix G[a][b] = sum_window conj(u_a) u_b dt; window area is
  // Re(c^H G c).
  Eigen::MatrixXcd gram(double center_us, double width_us) const;
  static double area(const Eigen::MatrixXcd& gram, std::span<const cplx> coefficients);
  // Area of a single component with unit coefficient.
  double component_area(std::size_t component, double center_us, double width_us) const;

  ModeLedger ledger(std::span<const cplx> coefficients) const;

 private:
  StorageSequence seq_;
  TimeGrid grid_;
  std::vector<std::vector<cplx>> waveforms_;
  std::vector<std::size_t> readout_index_;  // control index of each readout
  std::vector<double> thetas_;              // per control
  std::vector<cplx> spin_factor_;           // per readout, amplitude
  std::vector<double> component_energy_;
  std::vector<double> transmitted_energy_;
  double t1_ = 0.0;
};

StorageResult run_storage_sequence(const StorageSequence& seq);

enum class PhaseSweep { bin, readout };

struct FringePoint {
  double phase_rad = 0.0;
  double mean_area = 0.0;
  double sem = 0.0;
};

struct VisibilityResult {
  std::vector<FringePoint> fringe;
  FitReport fit;
  double visibility = 0.0;
  double visibility_sigma = 0.0;
  double window_center_us = 0.0;
};

// Two bins, a transfer-in and two readouts. Sweeps the phase of the second
// bin (or of the last readout), integrates the central window over
// trials_per_phase noise realizations per phase and fits the fringe.
// Throws fit-failure when the fringe amplitude is below twice its sigma.
VisibilityResult interference_visibility(const StorageSequence& seq, std::span<const double> phases,
                                         std::size_t trials_per_phase, PhaseSweep sweep = PhaseSweep::bin,
                                         unsigned workers = 1);

}  // namespace afc
