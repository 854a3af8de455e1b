#pragma once

// Linear (weak-pulse) propagation of complex field envelopes through an
// optical-depth spectrum.
//
// Transform convention: E(t) = integral E(nu) exp(+2 pi i nu t) dnu, so a
// field with carrier detuning nu oscillates as exp(+2 pi i nu t) and a
// causal response has H(nu) analytic in the lower half plane.

#include "afc/spectral.hpp"

#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace afc {

using cplx = std::complex<double>;

struct TimeGrid {
  double start_us = 0.0;
  double duration_us = 1.0;
  std::size_t num_points = 2;

  double dt() const { return duration_us / static_cast<double>(num_points); }
  double time(std::size_t i) const { return start_us + static_cast<double>(i) * dt(); }
  double end_us() const { return start_us + duration_us; }
  // Frequency (MHz) of FFT bin k, signed.
  double fft_frequency(std::size_t k) const;

  void validate() const;
};

// Smallest power-of-two grid starting at `start_us`, at least `min_duration_us`
// long, with dt <= max_dt_us.
TimeGrid make_time_grid(double start_us, double min_duration_us, double max_dt_us);

// Time grid whose FFT bins land exactly on the spectral grid's samples
// (duration = 1/resolution) with dt <= 1/(4 span).
TimeGrid time_grid_for(const SpectralGrid& grid, double start_us);

enum class PulseShape { gaussian, square };

struct Pulse {
  PulseShape shape = PulseShape::gaussian;
  double width_us = 0.84;  // intensity FWHM (gaussian) or full width (square)
  double arrival_us = 0.0; // pulse centre
  double carrier_detuning_mhz = 0.0;
  double phase_rad = 0.0;
  double amplitude = 1.0;

  cplx field(double t_us) const;
  double energy() const;  // analytic integral of |field|^2
  void validate() const;
};

struct FieldTrace {
  TimeGrid grid;
  std::vector<cplx> samples;

  double energy() const;  // sum |E|^2 dt
  std::vector<double> intensity() const;
};

FieldTrace make_trace(const TimeGrid& grid, std::span<const Pulse> pulses);
FieldTrace make_trace(const TimeGrid& grid, const Pulse& pulse);

struct TransferFunction {
  SpectralGrid grid;
  std::vector<cplx> response;  // H(nu) = exp(-d/2 + i phi)
  std::vector<double> depth;   // d(nu)
  std::vector<double> phase;   // phi(nu), not wrapped
};

// Builds H from d(nu) with the Kramers-Kronig partner phase obtained from the
// discrete Hilbert transform (folded cepstrum) on the periodic grid.
TransferFunction transfer_function_from_depth(const OpticalDepthProfile& profile);

// H at the FFT bins of `grid`, in FFT order: d is interpolated linearly (edge
// value beyond the spectral grid) and phi is rebuilt on those bins.
std::vector<cplx> sample_response(const TransferFunction& tf, const TimeGrid& grid);

// Impulse response on the time grid, h[n] at lag n*dt (circular).
std::vector<cplx> impulse_response(const TransferFunction& tf, const TimeGrid& grid);

// Output = IFFT(FFT(input) * H). Requires dt <= 1/(4 span).
FieldTrace propagate(const FieldTrace& input, const TransferFunction& tf);

struct EchoWindow {
  double center_us = 0.0;
  double width_us = 0.0;
  double area = 0.0;  // integral of |E|^2 over the window
  double peak = 0.0;  // max |E|^2 in the window
};

struct EchoReport {
  std::vector<EchoWindow> windows;
  double reference_area = 0.0;  // area of the first window
};

inline constexpr double kDefaultWindowUs = 0.5;

EchoReport detect_echoes(const FieldTrace& trace, std::span<const double> expected_times_us,
                         double window_us = kDefaultWindowUs);

// windows[echo_index].area of `output` divided by the reference area of
// `reference`.
double echo_efficiency(const EchoReport& output, const EchoReport& reference, std::size_t echo_index);

// Time of maximum |E|^2 in [lo, hi], refined by a parabola through the
// three samples around the maximum.
double locate_peak(const FieldTrace& trace, double lo_us, double hi_us);

// Sum of |E|^2 dt over samples with lo <= t < hi.
double window_area(const FieldTrace& trace, double lo_us, double hi_us);

// Intensity factor exp(-2 tau / T2) for an echo re-emitted after tau.
double optical_decoherence_factor(double tau_us, double t2_us);

struct PhotonHistogram {
  TimeGrid grid;
  std::vector<std::uint64_t> counts;
  std::size_t num_trials = 0;
  double expected_total_per_trial = 0.0;
};

// Scales |E|^2 so that `reference_energy` (default: the trace's own energy)
// maps to photons_per_pulse * 10^-OD, then accumulates independent Poisson
// counts per time bin over num_trials trials. Trial r draws from its own
// stream derive_seed(seed, r), so the histogram does not depend on `workers`.
PhotonHistogram poisson_sample(const FieldTrace& trace, double photons_per_pulse, double attenuation_od,
                               std::size_t num_trials, std::uint64_t seed,
                               std::optional<double> reference_energy = std::nullopt,
                               unsigned workers = 1);

}  // namespace afc
