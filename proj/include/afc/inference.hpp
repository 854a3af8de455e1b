#pragma once

// Inversion of a measured (transmission, echo efficiency) pair to comb
// depths, using the propagation engine as the forward model.

#include "afc/propagation.hpp"

namespace afc {

// Forward-model settings: a Gaussian input at t = 0 through a comb of
// num_teeth teeth, both observables measured as windowed areas relative to
// the same pulse sent through an empty medium.
struct ObservableSetup {
  double delta_mhz = 0.5;
  int num_teeth = 5;
  double pulse_fwhm_us = 0.84;
  double window_us = kDefaultWindowUs;
};

struct CombObservables {
  double transmitted_fraction = 0.0;
  double echo_efficiency = 0.0;
};

CombObservables simulate_comb_observables(double d, double finesse, double d0,
                                          const ObservableSetup& setup = {});

struct CombInference {
  double d = 0.0;
  double d0 = 0.0;
  CombObservables reproduced;
  int evaluations = 0;
};

inline constexpr double kInferenceMaxD = 20.0;
inline constexpr double kInferenceMaxD0 = 5.0;
inline constexpr double kInferenceTolerance = 1e-4;

// Nested bisection: the inner search on d matches the transmission for a
// given d0, the outer search on d0 matches the echo along that curve.
CombInference infer_comb_params(double transmitted_fraction, double echo_efficiency, double finesse,
                                const ObservableSetup& setup = {});

}  // namespace afc
