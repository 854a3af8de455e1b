#pragma once

// Spectral tailoring by optical pumping: a population-only rate model over
// ion classes with three ground and three excited hyperfine levels.
//
// A class is labelled by x, the frequency of its 1/2g -> 3/2e transition.
// Transition g -> e of class x sits at x + offset(g, e).

#include "afc/spectral.hpp"
#include "afc/spinwave.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace afc {

using Branching = std::array<std::array<double, 3>, 3>;  // [excited][ground]

struct TransitionTable {
  std::array<std::array<double, 3>, 3> strength{{{1.0 / 3, 1.0 / 3, 1.0 / 3},
                                                 {1.0 / 3, 1.0 / 3, 1.0 / 3},
                                                 {1.0 / 3, 1.0 / 3, 1.0 / 3}}};  // [ground][excited]
  std::array<double, 3> ground_energy_mhz{0.0, 10.2, 27.5};
  std::array<double, 3> excited_energy_mhz{0.0, 4.8, 9.4};

  double offset(int g, int e) const { return (excited_energy_mhz[e] - excited_energy_mhz[1]) - ground_energy_mhz[g]; }
  void validate() const;
};

TransitionTable transition_table_from(const MaterialParams& material);

struct IonEnsemble {
  std::vector<double> detuning_mhz;                 // class axis x, uniform
  std::vector<std::array<double, 3>> populations;  // per class: 1/2g, 3/2g, 5/2g
  std::vector<double> weights;                      // inhomogeneous profile

  // Thermal (equal) populations, unit weights, x in [lo, hi] with the given step.
  static IonEnsemble uniform(double lo_mhz, double hi_mhz, double step_mhz);
  double step_mhz() const;
  void validate() const;
};

enum class LineShape { top_hat, lorentzian };

struct Excitation {
  double bandwidth_mhz = 0.1;  // full width (top hat) or FWHM (lorentzian)
  double rate_per_us = 1.0;    // pumping rate at line centre for unit strength
  LineShape shape = LineShape::top_hat;
  double cutoff_mhz = 0.0;     // lorentzian: no excitation beyond this detuning (0 = 10 FWHM)

  double profile(double detuning_mhz) const;
  double reach_mhz() const;
  void validate() const;
};

// One pumping interval at a fixed laser frequency. Each resonant
// (class, ground, excited) channel moves population out of the ground level
// at rate x strength x lineshape; it returns through the branching matrix
// (the excited state relaxes fully in between).
IonEnsemble burn_step(const IonEnsemble& ensemble, double laser_frequency_mhz, const Excitation& laser,
                      double duration_us, const TransitionTable& table, const Branching& branching);

struct SweepStage {
  double center_mhz = 0.0;
  double span_mhz = 12.0;
  int repeats = 100;
  double pass_us = 500.0;   // duration of one pass across the span
  double step_mhz = 0.1;    // laser frequency discretization
  Excitation laser;
};

struct BurnBackPulse {
  double frequency_mhz = 0.0;  // laser frequency
  double duration_us = 100.0;
  int repeats = 100;
};

struct BurnBackStage {
  std::vector<BurnBackPulse> pulses;
  Excitation laser;
};

struct PrepSequence {
  std::optional<SweepStage> pit;
  BurnBackStage burn_back;
  std::optional<SweepStage> clean;
  double t_prep_us = 200000.0;
  double t_w_us = 1000.0;

  double total_pulse_time_us() const;
  void validate() const;  // throws sequence-invariant-violation
};

// Pit centred on 0, one burn-back pulse per comb tooth driving 5/2g -> 3/2e
// of the tooth's class, and a clean sweep over the 3/2g -> 3/2e control line
// of the comb classes.
PrepSequence default_prep_sequence(const CombSpec& comb, const TransitionTable& table = {});

struct PrepStage {
  std::string name;
  IonEnsemble ensemble;
};

struct PrepResult {
  IonEnsemble ensemble;
  std::vector<PrepStage> stages;  // snapshot after each stage that ran
};

PrepResult run_preparation(const IonEnsemble& ensemble, const PrepSequence& seq, const TransitionTable& table,
                           const Branching& branching);

// Class axis that covers every class contributing to a probe window
// [lo, hi], with margin.
IonEnsemble ensemble_for_window(double lo_mhz, double hi_mhz, const TransitionTable& table, double step_mhz = 0.01);

struct AbsorptionOptions {
  std::array<bool, 3> ground_mask{true, true, true};
};

// d(nu) = d_full * sum_{g,e} s_ge w(x) p_g(x) / sum_{g,e} (s_ge / 3), x = nu - offset(g, e),
// with linear interpolation in x. An unburned ensemble gives d_full.
// Throws window-out-of-range when a needed class lies off the axis.
OpticalDepthProfile absorption_spectrum(const IonEnsemble& ensemble, const TransitionTable& table, double d_full,
                                        const SpectralGrid& window, const AbsorptionOptions& options = {});

}  // namespace afc
