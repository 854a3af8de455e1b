#include "afc/prep.hpp"

#include "afc/error.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>

namespace afc {
namespace {

using Mat3 = Eigen::Matrix3d;

Mat3 generator(double x, double f, const Excitation& laser, const TransitionTable& table, const Branching& b) {
  Mat3 G = Mat3::Zero();
  for (int g = 0; g < 3; ++g) {
    for (int e = 0; e < 3; ++e) {
      const double s = table.strength[g][e];
      if (s == 0.0) continue;
      const double r = laser.rate_per_us * s * laser.profile(x + table.offset(g, e) - f);
      if (r == 0.0) continue;
      for (int h = 0; h < 3; ++h) G(h, g) += r * b[e][h];
      G(g, g) -= r;
    }
  }
  return G;
}

Mat3 matrix_power(Mat3 m, int n) {
  Mat3 out = Mat3::Identity();
  while (n > 0) {
    if (n & 1) out = m * out;
    m = m * m;
    n >>= 1;
  }
  return out;
}

void apply_map(std::array<double, 3>& p, const Mat3& m) {
  const Eigen::Vector3d v = m * Eigen::Vector3d(p[0], p[1], p[2]);
  double sum = 0.0;
  for (int g = 0; g < 3; ++g) {
    p[g] = std::max(0.0, v(g));
    sum += p[g];
  }
  // Columns of exp(G t) sum to one up to rounding; renormalize the residue.
  if (sum > 0.0)
    for (double& q : p) q /= sum;
}

void check_branching(const Branching& b) {
  for (const auto& row : b) {
    double sum = 0.0;
    for (double v : row) {
      if (!std::isfinite(v) || v < 0.0) throw Error(errc::kDomain, "branching entries must be >= 0");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error(errc::kDomain, "branching rows must sum to 1");
  }
}

// Pumping map of `repeats` passes of a swept (or fixed, when steps = 1)
// laser, applied class by class.
void run_sweep(IonEnsemble& ens, const std::vector<double>& freqs, double dwell_us, int repeats,
               const Excitation& laser, const TransitionTable& table, const Branching& b) {
  const double reach = laser.reach_mhz();
  for (std::size_t c = 0; c < ens.detuning_mhz.size(); ++c) {
    const double x = ens.detuning_mhz[c];
    Mat3 pass = Mat3::Identity();
    bool touched = false;
    for (double f : freqs) {
      bool near = false;
      for (int g = 0; g < 3 && !near; ++g)
        for (int e = 0; e < 3 && !near; ++e)
          near = table.strength[g][e] > 0.0 && std::abs(x + table.offset(g, e) - f) <= reach;
      if (!near) continue;
      const Mat3 G = generator(x, f, laser, table, b);
      if (G.isZero(0.0)) continue;
      pass = (G * dwell_us).exp() * pass;
      touched = true;
    }
    if (touched) apply_map(ens.populations[c], matrix_power(pass, repeats));
  }
}

std::vector<double> sweep_frequencies(const SweepStage& s) {
  const int n = std::max(1, static_cast<int>(std::lround(s.span_mhz / s.step_mhz)));
  std::vector<double> f(static_cast<std::size_t>(n));
  const double step = s.span_mhz / n;
  for (int i = 0; i < n; ++i) f[static_cast<std::size_t>(i)] = s.center_mhz - 0.5 * s.span_mhz + (i + 0.5) * step;
  return f;
}

void check_sweep(const SweepStage& s, const char* name) {
  const std::string n(name);
  if (!(s.span_mhz > 0.0) || !(s.step_mhz > 0.0) || !(s.pass_us > 0.0) || s.repeats < 1 ||
      !std::isfinite(s.center_mhz))
    throw Error(errc::kSequenceInvalid, n + " sweep needs positive span, step, pass time and repeats");
  s.laser.validate();
}

}  // namespace

void TransitionTable::validate() const {
  for (int g = 0; g < 3; ++g) {
    double row = 0.0, col = 0.0;
    for (int e = 0; e < 3; ++e) {
      if (!(strength[g][e] >= 0.0 && strength[g][e] <= 1.0))
        throw Error(errc::kDomain, "oscillator strengths must lie in [0, 1]");
      row += strength[g][e];
      col += strength[e][g];
    }
    if (!(row > 0.0) || !(col > 0.0)) throw Error(errc::kDomain, "every level needs a non-zero transition");
  }
  for (double v : ground_energy_mhz)
    if (!std::isfinite(v)) throw Error(errc::kDomain, "level energies must be finite");
  for (double v : excited_energy_mhz)
    if (!std::isfinite(v)) throw Error(errc::kDomain, "level energies must be finite");
}

TransitionTable transition_table_from(const MaterialParams& m) {
  TransitionTable t;
  t.ground_energy_mhz = {0.0, m.ground_splittings_mhz[0], m.ground_splittings_mhz[0] + m.ground_splittings_mhz[1]};
  t.excited_energy_mhz = {0.0, m.excited_splittings_mhz[0],
                          m.excited_splittings_mhz[0] + m.excited_splittings_mhz[1]};
  return t;
}

IonEnsemble IonEnsemble::uniform(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi > lo)) throw Error(errc::kDomain, "ensemble axis needs hi > lo and a positive step");
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  IonEnsemble e;
  e.detuning_mhz.resize(n);
  for (std::size_t i = 0; i < n; ++i) e.detuning_mhz[i] = lo + static_cast<double>(i) * step;
  e.populations.assign(n, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  e.weights.assign(n, 1.0);
  return e;
}

double IonEnsemble::step_mhz() const {
  return detuning_mhz.size() > 1 ? detuning_mhz[1] - detuning_mhz[0] : 0.0;
}

void IonEnsemble::validate() const {
  const std::size_t n = detuning_mhz.size();
  if (n < 2 || populations.size() != n || weights.size() != n)
    throw Error(errc::kDomain, "ensemble arrays must have matching length >= 2");
  const double step = step_mhz();
  if (!(step > 0.0)) throw Error(errc::kDomain, "ensemble axis must be ascending");
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(detuning_mhz[i] - (detuning_mhz[0] + static_cast<double>(i) * step)) > 1e-6 * step)
      throw Error(errc::kDomain, "ensemble axis must be uniform");
    double sum = 0.0;
    for (double p : populations[i]) {
      if (!(p >= 0.0)) throw Error(errc::kDomain, "populations must be >= 0");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error(errc::kDomain, "class populations must sum to 1");
    if (!(weights[i] >= 0.0)) throw Error(errc::kDomain, "class weights must be >= 0");
  }
}

double Excitation::profile(double d) const {
  switch (shape) {
    case LineShape::top_hat:
      return std::abs(d) <= 0.5 * bandwidth_mhz ? 1.0 : 0.0;
    case LineShape::lorentzian: {
      if (std::abs(d) > reach_mhz()) return 0.0;
      const double u = 2.0 * d / bandwidth_mhz;
      return 1.0 / (1.0 + u * u);
    }
  }
  return 0.0;
}

double Excitation::reach_mhz() const {
  if (shape == LineShape::top_hat) return 0.5 * bandwidth_mhz;
  return cutoff_mhz > 0.0 ? cutoff_mhz : 10.0 * bandwidth_mhz;
}

void Excitation::validate() const {
  if (!(bandwidth_mhz > 0.0) || !std::isfinite(bandwidth_mhz)) throw Error(errc::kDomain, "laser bandwidth must be positive");
  if (!(rate_per_us >= 0.0) || !std::isfinite(rate_per_us)) throw Error(errc::kDomain, "pumping rate must be >= 0");
  if (!(cutoff_mhz >= 0.0)) throw Error(errc::kDomain, "cutoff must be >= 0");
}

IonEnsemble burn_step(const IonEnsemble& ensemble, double f, const Excitation& laser, double duration_us,
                      const TransitionTable& table, const Branching& branching) {
  if (!(duration_us >= 0.0)) throw Error(errc::kDomain, "duration must be >= 0");
  laser.validate();
  table.validate();
  check_branching(branching);
  IonEnsemble out = ensemble;
  if (laser.rate_per_us == 0.0 || duration_us == 0.0) return out;
  run_sweep(out, {f}, duration_us, 1, laser, table, branching);
  return out;
}

double PrepSequence::total_pulse_time_us() const {
  double t = 0.0;
  if (pit) t += pit->repeats * pit->pass_us;
  for (const auto& p : burn_back.pulses) t += p.repeats * p.duration_us;
  if (clean) t += clean->repeats * clean->pass_us;
  return t;
}

void PrepSequence::validate() const {
  if (pit) check_sweep(*pit, "pit");
  if (clean) check_sweep(*clean, "clean");
  if (!burn_back.pulses.empty()) burn_back.laser.validate();
  for (const auto& p : burn_back.pulses)
    if (!(p.duration_us > 0.0) || p.repeats < 1 || !std::isfinite(p.frequency_mhz))
      throw Error(errc::kSequenceInvalid, "burn-back pulses need positive duration and repeats");
  if (!(t_w_us >= 0.0)) throw Error(errc::kSequenceInvalid, "t_w must be >= 0");
  if (t_prep_us < total_pulse_time_us())
    throw Error(errc::kSequenceInvalid, "t_prep is shorter than the total pulse time");
}

PrepSequence default_prep_sequence(const CombSpec& comb, const TransitionTable& table) {
  comb.validate();
  PrepSequence seq;

  SweepStage pit;
  pit.center_mhz = 0.0;
  pit.span_mhz = 12.0;
  pit.repeats = 100;
  pit.pass_us = 500.0;
  pit.step_mhz = 0.1;
  pit.laser = {1.0, 2.0, LineShape::lorentzian, 3.0};
  seq.pit = pit;

  seq.burn_back.laser = {0.06, 0.001, LineShape::lorentzian, 0.5};
  for (int k = 0; k < comb.num_teeth; ++k)
    seq.burn_back.pulses.push_back({comb.tooth_center(k) + table.offset(2, 1), 100.0, 100});

  SweepStage clean;
  clean.center_mhz = table.offset(1, 1);
  clean.span_mhz = std::max(2.0, (comb.num_teeth - 1) * comb.delta_mhz);
  clean.repeats = 1000;
  clean.pass_us = 50.0;
  clean.step_mhz = 0.02;
  clean.laser = {0.1, 2.0, LineShape::lorentzian, 0.3};
  seq.clean = clean;
  return seq;
}

PrepResult run_preparation(const IonEnsemble& ensemble, const PrepSequence& seq, const TransitionTable& table,
                           const Branching& branching) {
  ensemble.validate();
  seq.validate();
  table.validate();
  check_branching(branching);
  PrepResult res;
  res.ensemble = ensemble;
  if (seq.pit) {
    const auto f = sweep_frequencies(*seq.pit);
    run_sweep(res.ensemble, f, seq.pit->pass_us / static_cast<double>(f.size()), seq.pit->repeats, seq.pit->laser,
              table, branching);
    res.stages.push_back({"pit", res.ensemble});
  }
  if (!seq.burn_back.pulses.empty()) {
    for (const auto& p : seq.burn_back.pulses)
      run_sweep(res.ensemble, {p.frequency_mhz}, p.duration_us, p.repeats, seq.burn_back.laser, table, branching);
    res.stages.push_back({"burn_back", res.ensemble});
  }
  if (seq.clean) {
    const auto f = sweep_frequencies(*seq.clean);
    run_sweep(res.ensemble, f, seq.clean->pass_us / static_cast<double>(f.size()), seq.clean->repeats,
              seq.clean->laser, table, branching);
    res.stages.push_back({"clean", res.ensemble});
  }
  return res;
}

IonEnsemble ensemble_for_window(double lo, double hi, const TransitionTable& table, double step) {
  double omin = 0.0, omax = 0.0;
  for (int g = 0; g < 3; ++g)
    for (int e = 0; e < 3; ++e) {
      omin = std::min(omin, table.offset(g, e));
      omax = std::max(omax, table.offset(g, e));
    }
  const double a = std::floor((lo - omax - 1.0) / step) * step;
  const double b = std::ceil((hi - omin + 1.0) / step) * step;
  return IonEnsemble::uniform(a, b, step);
}

OpticalDepthProfile absorption_spectrum(const IonEnsemble& ens, const TransitionTable& table, double d_full,
                                        const SpectralGrid& window, const AbsorptionOptions& opt) {
  ens.validate();
  table.validate();
  window.validate();
  if (!(d_full >= 0.0) || !std::isfinite(d_full)) throw Error(errc::kDomain, "d_full must be >= 0");
  double norm = 0.0;
  for (int g = 0; g < 3; ++g)
    for (int e = 0; e < 3; ++e) norm += table.strength[g][e] / 3.0;

  const double x0 = ens.detuning_mhz.front();
  const double step = ens.step_mhz();
  const double x_last = ens.detuning_mhz.back();
  const double nu_lo = window.frequency(0);
  const double nu_hi = window.frequency(window.num_points - 1);
  for (int g = 0; g < 3; ++g)
    for (int e = 0; e < 3; ++e) {
      if (table.strength[g][e] == 0.0) continue;
      const double off = table.offset(g, e);
      if (nu_lo - off < x0 - 1e-9 || nu_hi - off > x_last + 1e-9)
        throw Error(errc::kWindowOutOfRange, "probe window needs classes outside the simulated axis");
    }

  OpticalDepthProfile prof;
  prof.grid = window;
  prof.depth.assign(window.num_points, 0.0);
  const std::size_t n = ens.detuning_mhz.size();
  for (std::size_t i = 0; i < window.num_points; ++i) {
    const double nu = window.frequency(i);
    double acc = 0.0;
    for (int g = 0; g < 3; ++g) {
      if (!opt.ground_mask[static_cast<std::size_t>(g)]) continue;
      for (int e = 0; e < 3; ++e) {
        const double s = table.strength[g][e];
        if (s == 0.0) continue;
        const double u = std::clamp((nu - table.offset(g, e) - x0) / step, 0.0, static_cast<double>(n - 1));
        const auto k = std::min(static_cast<std::size_t>(u), n - 2);
        const double w = u - static_cast<double>(k);
        const double a = ens.weights[k] * ens.populations[k][g];
        const double b = ens.weights[k + 1] * ens.populations[k + 1][g];
        acc += s * ((1.0 - w) * a + w * b);
      }
    }
    prof.depth[i] = std::max(0.0, d_full * acc / norm);
  }
  return prof;
}

}  // namespace afc
