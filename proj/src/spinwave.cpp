#include "afc/spinwave.hpp"

#include "afc/error.hpp"
#include "afc/fft.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace afc {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool positive(double x) { return std::isfinite(x) && x > 0.0; }

void invalid(const std::string& what) { throw Error(errc::kSequenceInvalid, what); }

}  // namespace

void MaterialParams::validate() const {
  for (double s : ground_splittings_mhz)
    if (!positive(s)) throw Error(errc::kDomain, "ground splittings must be positive");
  for (double s : excited_splittings_mhz)
    if (!positive(s)) throw Error(errc::kDomain, "excited splittings must be positive");
  if (!positive(t1_excited_us) || !positive(t2_excited_us)) throw Error(errc::kDomain, "T1 and T2 must be positive");
  if (!std::isfinite(gamma_is_mhz) || gamma_is_mhz < 0.0) throw Error(errc::kDomain, "gamma_is must be >= 0");
  if (!positive(alpha_per_cm) || !positive(length_cm)) throw Error(errc::kDomain, "alpha and length must be positive");
  if (!std::isfinite(rabi_ref_mhz) || rabi_ref_mhz < 0.0 || !positive(power_ref_mw))
    throw Error(errc::kDomain, "reference Rabi frequency and power must be valid");
  for (const auto& row : branching) {
    double sum = 0.0;
    for (double b : row) {
      if (!std::isfinite(b) || b < 0.0) throw Error(errc::kDomain, "branching entries must be >= 0");
      sum += b;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error(errc::kDomain, "branching rows must sum to 1");
  }
}

void ControlPulse::validate() const {
  if (!positive(duration_us)) throw Error(errc::kDomain, "control duration must be positive");
  if (!std::isfinite(power_mw) || power_mw < 0.0) throw Error(errc::kDomain, "control power must be >= 0");
  if (!std::isfinite(start_us) || !std::isfinite(phase_rad)) throw Error(errc::kDomain, "control timing must be finite");
}

void StorageSequence::validate() const {
  if (bins.empty()) invalid("sequence has no input bins");
  for (const auto& b : bins) b.validate();
  comb.validate();
  material.validate();
  if (!positive(window_us)) invalid("window must be positive");
  if (!std::isfinite(noise.linewidth_mhz) || noise.linewidth_mhz < 0.0) invalid("laser linewidth must be >= 0");
  if (!std::isfinite(t_w_us) || t_w_us < 0.0) invalid("t_w must be >= 0");
  if (!std::isfinite(min_span_us) || min_span_us < 0.0) invalid("min_span_us must be >= 0");
  if (controls.empty()) return;
  for (const auto& c : controls) c.validate();
  if (controls.front().role != ControlRole::transfer_in) invalid("first control must be the transfer-in pulse");
  const double t1 = controls.front().center_us();
  double last_bin = -std::numeric_limits<double>::infinity();
  double first_bin = std::numeric_limits<double>::infinity();
  for (const auto& b : bins) {
    last_bin = std::max(last_bin, b.arrival_us);
    first_bin = std::min(first_bin, b.arrival_us);
  }
  if (!(t1 > last_bin)) invalid("transfer-in must follow the last input bin");
  if (!(t1 < first_bin + comb.storage_time_us()))
    invalid("transfer-in must occur before the first bin's echo at tau = 1/delta");
  const double t1_end = controls.front().start_us + controls.front().duration_us;
  double prev = t1;
  for (std::size_t k = 1; k < controls.size(); ++k) {
    const auto& c = controls[k];
    if (c.role != ControlRole::readout) invalid("only one transfer-in pulse is allowed");
    if (c.start_us < t1_end - 1e-9) invalid("readouts must start after the transfer-in pulse ends");
    if (!(c.center_us() > prev)) invalid("readouts must be in time order");
    prev = c.center_us();
  }
}

double pulse_area(double power_mw, double duration_us, const MaterialParams& m) {
  if (power_mw < 0.0 || duration_us < 0.0) throw Error(errc::kDomain, "power and duration must be >= 0");
  return kTwoPi * m.rabi_ref_mhz * std::sqrt(power_mw / m.power_ref_mw) * duration_us;
}

double power_for_area(double theta, double duration_us, const MaterialParams& m) {
  if (theta < 0.0 || !positive(duration_us) || !positive(m.rabi_ref_mhz))
    throw Error(errc::kDomain, "power_for_area needs theta >= 0 and positive duration and Rabi frequency");
  const double r = theta / (kTwoPi * m.rabi_ref_mhz * duration_us);
  return m.power_ref_mw * r * r;
}

double transfer_efficiency(double theta) {
  const double s = std::sin(0.5 * theta);
  return s * s;
}

double afc_area_vs_power(double theta, double eta_afc, double input_area) {
  return input_area * 0.5 * eta_afc * (1.0 + std::cos(theta));
}

double three_level_vs_power(double theta, double eta_afc) {
  const double q = 1.0 - std::cos(theta);
  return 0.25 * eta_afc * q * q;
}

double spin_decay_factor(double gamma_is_mhz, double t_s_us) {
  if (gamma_is_mhz < 0.0 || t_s_us < 0.0) throw Error(errc::kDomain, "gamma_is and T_S must be >= 0");
  const double x = gamma_is_mhz * t_s_us;
  return std::exp(-x * x * std::numbers::pi * std::numbers::pi / (2.0 * std::numbers::ln2));
}

double spin_half_decay_time(double gamma_is_mhz) {
  if (!positive(gamma_is_mhz)) throw Error(errc::kDomain, "gamma_is must be positive");
  return std::sqrt(2.0 * std::numbers::ln2 * std::numbers::ln2) / (std::numbers::pi * gamma_is_mhz);
}

cplx mc_spin_coherence(double gamma_is_mhz, double t_s_us, std::size_t samples, std::uint64_t seed) {
  if (gamma_is_mhz < 0.0 || t_s_us < 0.0) throw Error(errc::kDomain, "gamma_is and T_S must be >= 0");
  if (samples < 1) throw Error(errc::kDomain, "need at least one spin sample");
  if (gamma_is_mhz == 0.0) return {1.0, 0.0};
  Rng rng(seed);
  std::normal_distribution<double> delta(0.0, gamma_is_mhz / (2.0 * std::sqrt(2.0 * std::numbers::ln2)));
  cplx sum{0.0, 0.0};
  for (std::size_t i = 0; i < samples; ++i) sum += std::polar(1.0, kTwoPi * delta(rng) * t_s_us);
  return sum / static_cast<double>(samples);
}

double mc_spin_decay(double gamma_is_mhz, double t_s_us, std::size_t samples, std::uint64_t seed) {
  return std::norm(mc_spin_coherence(gamma_is_mhz, t_s_us, samples, seed));
}

std::vector<double> sample_laser_phase(double linewidth_mhz, std::span<const double> times, Rng& rng) {
  if (!std::isfinite(linewidth_mhz) || linewidth_mhz < 0.0) throw Error(errc::kDomain, "linewidth must be >= 0");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (times[i] < times[i - 1]) throw Error(errc::kUnsortedTimes, "phase sample times must be ascending");
  std::vector<double> phase(times.size(), 0.0);
  if (linewidth_mhz == 0.0) return phase;
  std::normal_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 1; i < times.size(); ++i)
    phase[i] = phase[i - 1] + std::sqrt(kTwoPi * linewidth_mhz * (times[i] - times[i - 1])) * unit(rng);
  return phase;
}

std::vector<double> sample_laser_phase(const PhaseNoiseModel& noise, std::span<const double> times) {
  Rng rng(derive_seed(noise.seed, "laser"));
  return sample_laser_phase(noise.linewidth_mhz, times, rng);
}

StorageSimulator::StorageSimulator(const StorageSequence& seq) : seq_(seq) {
  seq_.validate();
  const double tau = seq_.comb.storage_time_us();
  const bool has_transfer = !seq_.controls.empty();
  t1_ = has_transfer ? seq_.controls.front().center_us() : std::numeric_limits<double>::infinity();
  for (const auto& c : seq_.controls) thetas_.push_back(pulse_area(c.power_mw, c.duration_us, seq_.material));
  for (std::size_t k = 1; k < seq_.controls.size(); ++k) readout_index_.push_back(k);

  double first = std::numeric_limits<double>::infinity();
  double last = -std::numeric_limits<double>::infinity();
  double widest = 0.0;
  for (const auto& b : seq_.bins) {
    first = std::min(first, b.arrival_us);
    last = std::max(last, b.arrival_us + 2.0 * tau);
    widest = std::max(widest, b.width_us);
  }
  for (std::size_t b = 0; b < seq_.bins.size(); ++b)
    for (std::size_t k = 0; k < readout_index_.size(); ++k) last = std::max(last, emission_time(b, k) + tau);
  first -= 2.0 * widest;
  last = std::max(last + 2.0 * widest, first + seq_.min_span_us);

  SpectralGrid sgrid = grid_for_comb(seq_.comb);
  while (1.0 / sgrid.resolution() < 1.25 * (last - first)) sgrid.num_points *= 2;
  grid_ = time_grid_for(sgrid, 0.0);
  const double dt = grid_.dt();
  // Start on a multiple of dt so that shifts by whole steps reproduce
  // identical window sampling.
  grid_.start_us = std::floor((first - 0.1 * grid_.duration_us) / dt) * dt;

  const auto tf = transfer_function_from_depth(build_comb_profile(seq_.comb, sgrid));
  const auto h = sample_response(tf, grid_);
  const double t2_factor = seq_.flags.apply_optical_t2 ? std::exp(-tau / seq_.material.t2_excited_us) : 1.0;

  auto propagate_pulse = [&](Pulse p) {
    p.phase_rad = 0.0;
    auto spectrum = fft::forward(make_trace(grid_, p).samples);
    for (std::size_t i = 0; i < spectrum.size(); ++i) spectrum[i] *= h[i];
    return fft::inverse(spectrum);
  };

  const double c1 = has_transfer ? std::cos(0.5 * thetas_.front()) : 1.0;
  for (const auto& b : seq_.bins) {
    auto y = propagate_pulse(b);
    const double split = b.arrival_us + 0.5 * tau;
    double transmitted = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double t = grid_.time(i);
      if (t < split) transmitted += std::norm(y[i]) * dt;
      double f = 1.0;
      if (t >= t1_) f *= c1;
      if (t >= split) f *= t2_factor;
      y[i] *= f;
    }
    transmitted_energy_.push_back(transmitted);
    waveforms_.push_back(std::move(y));
  }
  for (std::size_t b = 0; b < seq_.bins.size(); ++b) {
    for (std::size_t k = 0; k < readout_index_.size(); ++k) {
      const double tk = seq_.controls[readout_index_[k]].center_us();
      Pulse shifted = seq_.bins[b];
      shifted.arrival_us += tk - t1_;
      auto y = propagate_pulse(shifted);
      const double gate = std::max(tk, shifted.arrival_us + 0.5 * tau);
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = grid_.time(i) >= gate ? y[i] * t2_factor : cplx{};
      waveforms_.push_back(std::move(y));
    }
  }
  component_energy_.reserve(waveforms_.size());
  for (const auto& w : waveforms_) {
    double e = 0.0;
    for (const auto& s : w) e += std::norm(s);
    component_energy_.push_back(e * dt);
  }

  const std::uint64_t spin_seed = derive_seed(seq_.noise.seed, "spins");
  for (std::size_t k = 0; k < readout_index_.size(); ++k) {
    const double ts = seq_.controls[readout_index_[k]].center_us() - t1_;
    if (seq_.flags.mc_spins > 0)
      spin_factor_.push_back(mc_spin_coherence(seq_.material.gamma_is_mhz, ts, seq_.flags.mc_spins, spin_seed));
    else
      spin_factor_.push_back({std::sqrt(spin_decay_factor(seq_.material.gamma_is_mhz, ts)), 0.0});
  }
}

std::size_t StorageSimulator::echo_component(std::size_t bin, std::size_t readout) const {
  if (bin >= seq_.bins.size() || readout >= readout_index_.size())
    throw Error(errc::kDomain, "component index out of range");
  return seq_.bins.size() + bin * readout_index_.size() + readout;
}

double StorageSimulator::emission_time(std::size_t bin, std::size_t readout) const {
  const double tk = seq_.controls.at(readout_index_.at(readout)).center_us();
  return seq_.bins.at(bin).arrival_us + seq_.comb.storage_time_us() + (tk - seq_.controls.front().center_us());
}

std::vector<cplx> StorageSimulator::coefficients(std::uint64_t trial, std::span<const double> bin_phases,
                                                 std::span<const double> control_phases) const {
  const std::size_t nb = seq_.bins.size();
  const std::size_t nc = seq_.controls.size();
  if (!bin_phases.empty() && bin_phases.size() != nb) throw Error(errc::kDomain, "bin phase count mismatch");
  if (!control_phases.empty() && control_phases.size() != nc)
    throw Error(errc::kDomain, "control phase count mismatch");

  std::vector<double> bin_phi(nb), ctl_phi(nc);
  for (std::size_t j = 0; j < nb; ++j) bin_phi[j] = bin_phases.empty() ? seq_.bins[j].phase_rad : bin_phases[j];
  for (std::size_t k = 0; k < nc; ++k)
    ctl_phi[k] = control_phases.empty() ? seq_.controls[k].phase_rad : control_phases[k];

  const auto& noise = seq_.noise;
  if (noise.linewidth_mhz > 0.0) {
    const bool on_inputs = noise.apply_to != NoiseTarget::controls;
    const bool on_controls = noise.apply_to != NoiseTarget::inputs;
    std::vector<std::pair<double, double*>> events;
    if (on_inputs)
      for (std::size_t j = 0; j < nb; ++j) events.emplace_back(seq_.bins[j].arrival_us, &bin_phi[j]);
    if (on_controls)
      for (std::size_t k = 0; k < nc; ++k) events.emplace_back(seq_.controls[k].center_us(), &ctl_phi[k]);
    std::stable_sort(events.begin(), events.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<double> times;
    for (const auto& e : events) times.push_back(e.first);
    Rng rng(derive_seed(derive_seed(noise.seed, "laser"), trial));
    const auto phase = sample_laser_phase(noise.linewidth_mhz, times, rng);
    for (std::size_t i = 0; i < events.size(); ++i) *events[i].second += phase[i];
  }

  std::vector<cplx> c(waveforms_.size());
  for (std::size_t j = 0; j < nb; ++j) c[j] = std::polar(1.0, bin_phi[j]);
  if (readout_index_.empty()) return c;
  const double s1 = std::sin(0.5 * thetas_.front());
  for (std::size_t j = 0; j < nb; ++j) {
    double passed = 1.0;  // product of cos(theta_m / 2) over earlier readouts
    for (std::size_t k = 0; k < readout_index_.size(); ++k) {
      const std::size_t ci = readout_index_[k];
      const double sk = std::sin(0.5 * thetas_[ci]);
      c[echo_component(j, k)] = c[j] * s1 * spin_factor_[k] * passed * sk * std::polar(1.0, ctl_phi[ci] - ctl_phi[0]);
      passed *= std::cos(0.5 * thetas_[ci]);
    }
  }
  return c;
}

FieldTrace StorageSimulator::trace(std::span<const cplx> c) const {
  if (c.size() != waveforms_.size()) throw Error(errc::kDomain, "coefficient count mismatch");
  FieldTrace out{grid_, std::vector<cplx>(grid_.num_points)};
  for (std::size_t a = 0; a < c.size(); ++a) {
    if (c[a] == cplx{}) continue;
    for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] += c[a] * waveforms_[a][i];
  }
  return out;
}

Eigen::MatrixXcd StorageSimulator::gram(double center_us, double width_us) const {
  const double lo = center_us - 0.5 * width_us, hi = center_us + 0.5 * width_us;
  if (!(width_us > 0.0) || lo < grid_.start_us || hi > grid_.end_us())
    throw Error(errc::kWindowOutOfRange, "gram window leaves the simulation grid");
  const double dt = grid_.dt();
  const auto first = static_cast<std::size_t>(std::max(0.0, std::ceil((lo - grid_.start_us) / dt - 1e-9)));
  const auto last = std::min(grid_.num_points,
                             static_cast<std::size_t>(std::ceil((hi - grid_.start_us) / dt - 1e-9)));
  const auto n = static_cast<Eigen::Index>(waveforms_.size());
  Eigen::MatrixXcd U(static_cast<Eigen::Index>(last > first ? last - first : 0), n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (std::size_t i = first; i < last; ++i) U(static_cast<Eigen::Index>(i - first), a) = waveforms_[a][i];
  return U.adjoint() * U * dt;
}

double StorageSimulator::area(const Eigen::MatrixXcd& g, std::span<const cplx> c) {
  if (static_cast<std::size_t>(g.rows()) != c.size()) throw Error(errc::kDomain, "coefficient count mismatch");
  const Eigen::Map<const Eigen::VectorXcd> v(c.data(), static_cast<Eigen::Index>(c.size()));
  return std::max(0.0, (v.adjoint() * g * v)(0, 0).real());
}

double StorageSimulator::component_area(std::size_t component, double center_us, double width_us) const {
  if (component >= waveforms_.size()) throw Error(errc::kDomain, "component index out of range");
  FieldTrace t{grid_, waveforms_[component]};
  return window_area(t, center_us - 0.5 * width_us, center_us + 0.5 * width_us);
}

ModeLedger StorageSimulator::ledger(std::span<const cplx> c) const {
  if (c.size() != waveforms_.size()) throw Error(errc::kDomain, "coefficient count mismatch");
  ModeLedger led;
  const double tau = seq_.comb.storage_time_us();
  const double dt = grid_.dt();
  const bool has_transfer = !seq_.controls.empty();
  const double s1 = has_transfer ? std::sin(0.5 * thetas_.front()) : 0.0;
  std::vector<double> times;
  for (std::size_t j = 0; j < seq_.bins.size(); ++j) {
    ModeRecord m;
    m.bin = j;
    m.arrival_us = seq_.bins[j].arrival_us;
    m.input_energy = 0.0;
    for (std::size_t i = 0; i < grid_.num_points; ++i) m.input_energy += std::norm(seq_.bins[j].field(grid_.time(i)));
    m.input_energy *= dt;
    m.absorbed_energy = std::max(0.0, m.input_energy - transmitted_energy_[j]);
    // Energy the bin would re-emit as a two-level echo (before any transfer).
    double echo = 0.0;
    const double c1 = has_transfer ? std::cos(0.5 * thetas_.front()) : 1.0;
    for (std::size_t i = 0; i < grid_.num_points; ++i) {
      const double t = grid_.time(i);
      if (t < m.arrival_us + 0.5 * tau) continue;
      double v = std::norm(waveforms_[j][i]);
      if (t >= t1_) v = c1 != 0.0 ? v / (c1 * c1) : 0.0;
      echo += v;
    }
    m.echo_energy = readout_index_.empty() || c1 != 0.0 ? echo * dt : component_energy_[echo_component(j, 0)];
    if (has_transfer) {
      m.spin_amplitude = c[j] * s1 * std::sqrt(m.echo_energy);
      m.stored_energy = std::norm(m.spin_amplitude);
      double passed = 1.0;
      for (std::size_t k = 0; k < readout_index_.size(); ++k) {
        const double ck = std::cos(0.5 * thetas_[readout_index_[k]]);
        passed *= ck * ck;
        m.residual_energy.push_back(m.stored_energy * std::norm(spin_factor_[k]) * passed);
        Emission e;
        e.bin = j;
        e.readout = k;
        e.time_us = emission_time(j, k);
        e.amplitude = c[echo_component(j, k)] * std::sqrt(m.echo_energy);
        e.energy = std::norm(e.amplitude);
        led.emissions.push_back(e);
        times.push_back(e.time_us);
      }
    } else {
      times.push_back(m.arrival_us + tau);
    }
    led.modes.push_back(std::move(m));
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end(), [](double a, double b) { return std::abs(a - b) < 1e-6; }),
              times.end());
  const FieldTrace tr = trace(c);
  for (double t : times) {
    EchoWindow w;
    w.center_us = t;
    w.width_us = seq_.window_us;
    w.area = window_area(tr, t - 0.5 * w.width_us, t + 0.5 * w.width_us);
    const double lo = t - 0.5 * w.width_us, hi = t + 0.5 * w.width_us;
    for (std::size_t i = 0; i < grid_.num_points; ++i) {
      const double ti = grid_.time(i);
      if (ti >= lo && ti < hi) w.peak = std::max(w.peak, std::norm(tr.samples[i]));
    }
    led.windows.push_back(w);
  }
  return led;
}

StorageResult run_storage_sequence(const StorageSequence& seq) {
  const StorageSimulator sim(seq);
  const auto c = sim.coefficients(0);
  return {sim.trace(c), sim.ledger(c)};
}

VisibilityResult interference_visibility(const StorageSequence& seq, std::span<const double> phases,
                                         std::size_t trials_per_phase, PhaseSweep sweep, unsigned workers) {
  if (seq.bins.size() != 2 || seq.controls.size() != 3)
    invalid("interference needs two bins, a transfer-in and two readouts");
  if (phases.size() < 8) throw Error(errc::kDegenerateData, "need at least 8 phases");
  if (trials_per_phase < 1) throw Error(errc::kDomain, "trials_per_phase must be >= 1");

  const StorageSimulator sim(seq);
  VisibilityResult res;
  res.window_center_us = sim.emission_time(1, 0);
  const auto g = sim.gram(res.window_center_us, seq.window_us);

  res.fringe.resize(phases.size());
  parallel_for(phases.size(), workers, [&](std::size_t p) {
    std::vector<double> bin_phi{seq.bins[0].phase_rad, seq.bins[1].phase_rad};
    std::vector<double> ctl_phi;
    for (const auto& c : seq.controls) ctl_phi.push_back(c.phase_rad);
    if (sweep == PhaseSweep::bin)
      bin_phi[1] = phases[p];
    else
      ctl_phi[2] = phases[p];
    double mean = 0.0, m2 = 0.0;
    for (std::size_t r = 0; r < trials_per_phase; ++r) {
      const auto c = sim.coefficients(p * trials_per_phase + r, bin_phi, ctl_phi);
      const double a = StorageSimulator::area(g, c);
      const double d = a - mean;
      mean += d / static_cast<double>(r + 1);
      m2 += d * (a - mean);
    }
    FringePoint fp;
    fp.phase_rad = phases[p];
    fp.mean_area = mean;
    fp.sem = trials_per_phase > 1
                 ? std::sqrt(m2 / static_cast<double>(trials_per_phase - 1) / static_cast<double>(trials_per_phase))
                 : 0.0;
    res.fringe[p] = fp;
  });

  std::vector<double> ph, areas, sems;
  for (const auto& f : res.fringe) {
    ph.push_back(f.phase_rad);
    areas.push_back(f.mean_area);
    sems.push_back(f.sem);
  }
  res.fit = fit_fringe(ph, areas, sems);
  const auto& v = res.fit.at("visibility");
  if (!(v.value > 2.0 * v.sigma)) throw Error(errc::kFitFailure, "fringe amplitude is below the noise floor");
  res.visibility = v.value;
  res.visibility_sigma = v.sigma;
  return res;
}

}  // namespace afc
