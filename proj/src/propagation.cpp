#include "afc/propagation.hpp"

#include "afc/error.hpp"
#include "afc/fft.hpp"
#include "afc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace afc {
namespace {

constexpr double kSlack = 1.0 + 1e-9;

void check_profile(const OpticalDepthProfile& profile) {
  profile.grid.validate();
  if (profile.depth.size() != profile.grid.num_points)
    throw Error(errc::kDomain, "depth array length does not match its grid");
  for (double d : profile.depth)
    if (!std::isfinite(d) || d < 0.0) throw Error(errc::kDomain, "optical depth must be finite and >= 0");
  if (profile.feature_fwhm_mhz > 0.0 && profile.grid.resolution() > profile.feature_fwhm_mhz / 8.0 * kSlack)
    throw Error(errc::kGridTooCoarse, "spectral resolution exceeds feature_fwhm/8");
}

}  // namespace

void TimeGrid::validate() const {
  if (num_points < 2 || !fft::is_power_of_two(num_points))
    throw Error(errc::kDomain, "time grid num_points must be a power of two >= 2");
  if (!(duration_us > 0.0) || !std::isfinite(duration_us))
    throw Error(errc::kDomain, "time grid duration must be positive");
  if (!std::isfinite(start_us)) throw Error(errc::kDomain, "time grid start must be finite");
}

double TimeGrid::fft_frequency(std::size_t k) const {
  const auto n = static_cast<double>(num_points);
  const auto kk = static_cast<double>(k);
  return (k < num_points / 2 ? kk : kk - n) / duration_us;
}

TimeGrid make_time_grid(double start_us, double min_duration_us, double max_dt_us) {
  if (!(min_duration_us > 0.0) || !(max_dt_us > 0.0))
    throw Error(errc::kDomain, "time grid needs positive duration and step");
  TimeGrid grid;
  grid.start_us = start_us;
  grid.num_points =
      fft::next_power_of_two(std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(min_duration_us / max_dt_us))));
  grid.duration_us = static_cast<double>(grid.num_points) * max_dt_us;
  return grid;
}

TimeGrid time_grid_for(const SpectralGrid& grid, double start_us) {
  grid.validate();
  TimeGrid t;
  t.start_us = start_us;
  t.duration_us = 1.0 / grid.resolution();
  t.num_points = 4 * grid.num_points;
  return t;
}

cplx Pulse::field(double t) const {
  const double x = t - arrival_us;
  double envelope = 0.0;
  switch (shape) {
    case PulseShape::gaussian:
      envelope = std::exp(-2.0 * std::numbers::ln2 * x * x / (width_us * width_us));
      break;
    case PulseShape::square:
      envelope = (x >= -0.5 * width_us && x < 0.5 * width_us) ? 1.0 : 0.0;
      break;
  }
  if (envelope == 0.0) return {0.0, 0.0};
  return amplitude * envelope * std::polar(1.0, 2.0 * std::numbers::pi * carrier_detuning_mhz * x + phase_rad);
}

double Pulse::energy() const {
  const double a2 = amplitude * amplitude;
  switch (shape) {
    case PulseShape::gaussian: return a2 * width_us * kGaussianAreaFactor;
    case PulseShape::square: return a2 * width_us;
  }
  return 0.0;
}

void Pulse::validate() const {
  if (!(width_us > 0.0) || !std::isfinite(width_us)) throw Error(errc::kDomain, "pulse width must be positive");
  if (!std::isfinite(phase_rad) || !std::isfinite(arrival_us) || !std::isfinite(carrier_detuning_mhz) ||
      !std::isfinite(amplitude))
    throw Error(errc::kDomain, "pulse parameters must be finite");
}

double FieldTrace::energy() const {
  double e = 0.0;
  for (const auto& s : samples) e += std::norm(s);
  return e * grid.dt();
}

std::vector<double> FieldTrace::intensity() const {
  std::vector<double> out(samples.size());
  std::transform(samples.begin(), samples.end(), out.begin(), [](cplx s) { return std::norm(s); });
  return out;
}

FieldTrace make_trace(const TimeGrid& grid, std::span<const Pulse> pulses) {
  grid.validate();
  FieldTrace trace{grid, std::vector<cplx>(grid.num_points)};
  for (const auto& p : pulses) {
    p.validate();
    for (std::size_t i = 0; i < grid.num_points; ++i) trace.samples[i] += p.field(grid.time(i));
  }
  return trace;
}

FieldTrace make_trace(const TimeGrid& grid, const Pulse& pulse) {
  return make_trace(grid, std::span<const Pulse>(&pulse, 1));
}

namespace {

// log|H| + i * Hilbert(log|H|) by folding the cepstrum onto non-negative
// lags: a minimum-phase (causal) response on the periodic grid.
fft::cvec minimum_phase_log(const std::vector<double>& depth) {
  const std::size_t n = depth.size();
  fft::cvec log_mag(n);
  for (std::size_t j = 0; j < n; ++j) log_mag[j] = -0.5 * depth[j];
  fft::cvec cep = fft::inverse(log_mag);
  fft::cvec folded(n, cplx{0.0, 0.0});
  folded[0] = cep[0];
  for (std::size_t k = 1; k < n / 2; ++k) folded[k] = 2.0 * cep[k];
  folded[n / 2] = cep[n / 2];
  return fft::forward(folded);
}

}  // namespace

TransferFunction transfer_function_from_depth(const OpticalDepthProfile& profile) {
  check_profile(profile);
  const std::size_t n = profile.grid.num_points;
  const fft::cvec log_h = minimum_phase_log(profile.depth);

  TransferFunction tf;
  tf.grid = profile.grid;
  tf.depth = profile.depth;
  tf.phase.resize(n);
  tf.response.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    tf.phase[j] = log_h[j].imag();
    tf.response[j] = std::exp(cplx{-0.5 * profile.depth[j], tf.phase[j]});
  }
  return tf;
}

std::vector<cplx> sample_response(const TransferFunction& tf, const TimeGrid& grid) {
  grid.validate();
  const std::size_t ns = tf.grid.num_points;
  const double res = tf.grid.resolution();
  std::vector<double> d(grid.num_points);
  for (std::size_t k = 0; k < grid.num_points; ++k) {
    const double u = (grid.fft_frequency(k) - tf.grid.start()) / res;
    if (u <= 0.0) {
      d[k] = tf.depth.front();
    } else if (u >= static_cast<double>(ns - 1)) {
      d[k] = tf.depth.back();
    } else {
      const auto i = static_cast<std::size_t>(u);
      const double w = u - static_cast<double>(i);
      d[k] = w < 1e-9 ? tf.depth[i] : (1.0 - w) * tf.depth[i] + w * tf.depth[i + 1];
    }
  }
  const fft::cvec log_h = minimum_phase_log(d);
  std::vector<cplx> h(grid.num_points);
  for (std::size_t k = 0; k < grid.num_points; ++k) h[k] = std::exp(cplx{-0.5 * d[k], log_h[k].imag()});
  return h;
}

std::vector<cplx> impulse_response(const TransferFunction& tf, const TimeGrid& grid) {
  return fft::inverse(sample_response(tf, grid));
}

FieldTrace propagate(const FieldTrace& input, const TransferFunction& tf) {
  input.grid.validate();
  if (input.samples.size() != input.grid.num_points)
    throw Error(errc::kGridMismatch, "trace length does not match its grid");
  if (input.grid.dt() > 1.0 / (4.0 * tf.grid.span_mhz) * kSlack)
    throw Error(errc::kGridMismatch, "time step exceeds 1/(4 x spectral span)");
  fft::cvec spectrum = fft::forward(input.samples);
  const auto h = sample_response(tf, input.grid);
  for (std::size_t k = 0; k < spectrum.size(); ++k) spectrum[k] *= h[k];
  return FieldTrace{input.grid, fft::inverse(spectrum)};
}

double window_area(const FieldTrace& trace, double lo_us, double hi_us) {
  const double dt = trace.grid.dt();
  const double t0 = trace.grid.start_us;
  const auto n = static_cast<long>(trace.samples.size());
  const long first = std::max(0L, static_cast<long>(std::ceil((lo_us - t0) / dt - 1e-9)));
  const long last = std::min(n, static_cast<long>(std::ceil((hi_us - t0) / dt - 1e-9)));
  double a = 0.0;
  for (long i = first; i < last; ++i) a += std::norm(trace.samples[i]);
  return a * dt;
}

EchoReport detect_echoes(const FieldTrace& trace, std::span<const double> times, double window_us) {
  if (!(window_us > 0.0)) throw Error(errc::kDomain, "window width must be positive");
  if (times.empty()) throw Error(errc::kDomain, "no echo windows requested");
  const double tol = 1e-9 * std::max(1.0, trace.grid.duration_us);
  for (double t : times) {
    if (t - 0.5 * window_us < trace.grid.start_us - tol || t + 0.5 * window_us > trace.grid.end_us() + tol)
      throw Error(errc::kWindowOutOfRange, "window at " + std::to_string(t) + " us leaves the trace");
  }
  std::vector<double> sorted(times.begin(), times.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i] - sorted[i - 1] < window_us - tol)
      throw Error(errc::kOverlappingWindows, "echo windows overlap");

  EchoReport report;
  const double dt = trace.grid.dt();
  for (double t : times) {
    EchoWindow w;
    w.center_us = t;
    w.width_us = window_us;
    w.area = window_area(trace, t - 0.5 * window_us, t + 0.5 * window_us);
    const double t0 = trace.grid.start_us;
    const auto first = static_cast<long>(std::ceil((t - 0.5 * window_us - t0) / dt - 1e-9));
    const auto last = static_cast<long>(std::ceil((t + 0.5 * window_us - t0) / dt - 1e-9));
    for (long i = std::max(0L, first); i < std::min<long>(last, trace.samples.size()); ++i)
      w.peak = std::max(w.peak, std::norm(trace.samples[i]));
    report.windows.push_back(w);
  }
  report.reference_area = report.windows.front().area;
  return report;
}

double echo_efficiency(const EchoReport& output, const EchoReport& reference, std::size_t echo_index) {
  if (!(reference.reference_area > 0.0)) throw Error(errc::kZeroReference, "reference area is zero");
  if (echo_index >= output.windows.size()) throw Error(errc::kDomain, "echo index out of range");
  return output.windows[echo_index].area / reference.reference_area;
}

double locate_peak(const FieldTrace& trace, double lo_us, double hi_us) {
  const double dt = trace.grid.dt();
  const double t0 = trace.grid.start_us;
  const auto n = static_cast<long>(trace.samples.size());
  const long first = std::max(0L, static_cast<long>(std::ceil((lo_us - t0) / dt)));
  const long last = std::min(n - 1, static_cast<long>(std::floor((hi_us - t0) / dt)));
  if (first > last) throw Error(errc::kWindowOutOfRange, "peak search interval is empty");
  long best = first;
  for (long i = first; i <= last; ++i)
    if (std::norm(trace.samples[i]) > std::norm(trace.samples[best])) best = i;
  double t = trace.grid.time(static_cast<std::size_t>(best));
  if (best > 0 && best < n - 1) {
    const double ym = std::norm(trace.samples[best - 1]);
    const double y0 = std::norm(trace.samples[best]);
    const double yp = std::norm(trace.samples[best + 1]);
    const double denom = ym - 2.0 * y0 + yp;
    if (denom < 0.0) t += 0.5 * dt * (ym - yp) / denom;
  }
  return t;
}

double optical_decoherence_factor(double tau_us, double t2_us) {
  if (!(t2_us > 0.0) || tau_us < 0.0) throw Error(errc::kDomain, "decoherence needs tau >= 0 and T2 > 0");
  return std::exp(-2.0 * tau_us / t2_us);
}

PhotonHistogram poisson_sample(const FieldTrace& trace, double photons_per_pulse, double attenuation_od,
                               std::size_t num_trials, std::uint64_t seed,
                               std::optional<double> reference_energy, unsigned workers) {
  if (!(photons_per_pulse > 0.0) || !std::isfinite(photons_per_pulse))
    throw Error(errc::kDomain, "photons_per_pulse must be positive");
  if (num_trials < 1) throw Error(errc::kDomain, "num_trials must be >= 1");
  if (!std::isfinite(attenuation_od)) throw Error(errc::kDomain, "attenuation OD must be finite");

  PhotonHistogram hist;
  hist.grid = trace.grid;
  hist.counts.assign(trace.samples.size(), 0);
  hist.num_trials = num_trials;

  const double energy = trace.energy();
  const double ref = reference_energy.value_or(energy);
  if (!(ref > 0.0)) throw Error(errc::kZeroReference, "reference energy must be positive");
  const double mean_total = photons_per_pulse * std::pow(10.0, -attenuation_od) * energy / ref;
  hist.expected_total_per_trial = mean_total;
  if (!(mean_total > 0.0) || !(energy > 0.0)) return hist;

  // Independent Poisson counts per bin are drawn as a Poisson total spread
  // over bins with the intensity distribution (same joint law, O(counts)).
  const auto weights = trace.intensity();
  const std::discrete_distribution<std::size_t> bin_template(weights.begin(), weights.end());

  const unsigned chunks = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(num_trials)));
  std::vector<std::vector<std::uint64_t>> partial(chunks, std::vector<std::uint64_t>(weights.size(), 0));
  parallel_for(chunks, workers, [&](std::size_t c) {
    auto bins = bin_template;
    auto& local = partial[c];
    for (std::size_t r = c; r < num_trials; r += chunks) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
      std::poisson_distribution<std::uint64_t> total(mean_total);
      const std::uint64_t k = total(rng);
      for (std::uint64_t i = 0; i < k; ++i) ++local[bins(rng)];
    }
  });
  for (const auto& local : partial)
    for (std::size_t i = 0; i < local.size(); ++i) hist.counts[i] += local[i];
  return hist;
}

}  // namespace afc
