// Acceptance gate: one line per criterion, nonzero exit if any fails.

#include "afc/error.hpp"
#include "afc/experiments.hpp"
#include "afc/inference.hpp"
#include "afc/io.hpp"
#include "afc/prep.hpp"
#include "afc/propagation.hpp"
#include "afc/spectral.hpp"
#include "afc/spinwave.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

using namespace afc;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [FAIL]");
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome c1_closed_form() {
  Outcome o;
  const double a = afc_echo_efficiency(4.12, 4.0, 0.45);
  const double b = afc_echo_efficiency(3.66, 3.0, 0.26);
  o.require(std::abs(a - 0.156) <= 0.001, fmt("eta(4.12,4,0.45)=%.5f", a));
  o.require(std::abs(b - 0.156) <= 0.001, fmt("eta(3.66,3,0.26)=%.5f", b));
  return o;
}

Outcome c2_engine() {
  Outcome o;
  const auto r = exp_two_level_afc({});
  const double rel = std::abs(r.efficiency - r.predicted_efficiency) / r.predicted_efficiency;
  o.require(rel < 0.15, fmt("simulated %.4f vs closed form %.4f (%.1f%%)", r.efficiency, r.predicted_efficiency,
                            100 * rel));
  for (double delta : {0.125, 0.2, 0.5, 1.0}) {
    CombSpec c;
    c.delta_mhz = delta;
    c.tooth_fwhm_mhz = delta / 4.0;
    const auto sg = grid_for_comb(c);
    const auto tf = transfer_function_from_depth(build_comb_profile(c, sg));
    auto tg = time_grid_for(sg, 0.0);
    tg.start_us = -std::floor(0.25 * tg.duration_us / tg.dt()) * tg.dt();
    Pulse p;
    p.width_us = 0.84 * 0.5 / delta;
    const auto out = propagate(make_trace(tg, p), tf);
    const double tau = 1.0 / delta;
    const double t0 = locate_peak(out, -0.25 * tau, 0.25 * tau);
    const double t1 = locate_peak(out, 0.75 * tau, 1.25 * tau);
    const double err = std::abs((t1 - t0) - tau);
    o.require(err <= tg.dt(), fmt("delay err %.2g us at delta %.3g (dt %.3g)", err, delta, tg.dt()));
  }
  return o;
}

Outcome c3_transfer_identity() {
  Outcome o;
  const double r = std::sqrt(0.056 / 0.156);
  o.require(r >= 0.57 && r <= 0.60, fmt("sqrt(0.056/0.156)=%.3f", r));
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double th = 4 * kPi * i / 99.0;
    worst = std::max(worst, std::abs(three_level_vs_power(th, 0.156) - 0.156 * std::pow(std::sin(0.5 * th), 4)));
  }
  o.require(worst <= 1e-12, fmt("max identity error %.1e", worst));
  return o;
}

Outcome c4_spin_decay() {
  Outcome o;
  double worst = 0.0;
  for (double t : {0.0, 4.0, 8.0, 12.0, 16.0, 20.0})
    worst = std::max(worst, std::abs(mc_spin_decay(0.0256, t, 100000, derive_seed(0, "c4")) -
                                     spin_decay_factor(0.0256, t)));
  o.require(worst < 0.01, fmt("max |MC - closed form| %.4f", worst));
  const double h = spin_half_decay_time(0.0256);
  o.require(std::abs(h - 12.2) <= 0.1, fmt("half-decay %.3f us", h));
  return o;
}

Outcome c5_rabi() {
  Outcome o;
  const auto r = exp_rabi_sweep({});
  const double w = r.fit.at("rabi_mhz").value;
  o.require(std::abs(w - 0.34) <= 0.02 * 0.34, fmt("fitted Rabi %.4f MHz", w));
  const double et = transfer_efficiency(pulse_area(5.7, 0.8, MaterialParams{}));
  o.require(std::abs(et - 0.569) <= 0.01 && et >= 0.57 - 0.01 && et <= 0.60, fmt("eta_T %.4f", et));
  return o;
}

Outcome c6_interference() {
  Outcome o;
  std::vector<double> phases;
  for (int i = 0; i < 12; ++i) phases.push_back(2 * kPi * i / 12.0);
  const auto clean = interference_visibility(fig4_sequence(8.0, MaterialParams{}, 0.0, 0), phases, 1);
  o.require(std::abs(clean.visibility - 1.0) <= 0.005, fmt("V(0 linewidth)=%.5f", clean.visibility));
  TimebinParams p;
  p.trials_per_phase = 1000;
  p.seed = derive_seed(0, "fig4");
  const auto r = exp_timebin(p, 4);
  o.require(std::abs(r.mean_visibility - 0.84) <= 0.02, fmt("V(55.5 kHz)=%.4f", r.mean_visibility));
  o.require(r.slope_consistent_with_zero,
            fmt("slope %.2g +- %.2g per us", r.slope_per_us, r.slope_sigma));
  return o;
}

Outcome c7_multimode() {
  Outcome o;
  const auto r = exp_multimode(MultimodeParams{}, 4);
  o.require(r.mode_areas.size() == 5, fmt("%zu modes", r.mode_areas.size()));
  const double worst = r.crosstalk.empty() ? 1.0 : *std::max_element(r.crosstalk.begin(), r.crosstalk.end());
  o.require(worst < 0.1, fmt("max leakage %.3f", worst));
  bool mono = r.series_efficiency.size() == 5;
  for (std::size_t i = 1; i < r.series_efficiency.size(); ++i)
    mono = mono && r.series_efficiency[i] <= r.series_efficiency[i - 1];
  std::string s;
  for (double e : r.series_efficiency) s += fmt("%.4f ", e);
  o.require(mono, "series " + s.substr(0, s.size() - 1));
  return o;
}

Outcome c8_preparation() {
  Outcome o;
  const MaterialParams m;
  const auto table = transition_table_from(m);
  const CombSpec comb = fig2a_comb();
  const SpectralGrid probe{0.0, 10.24, 1024};
  const auto seq = default_prep_sequence(comb, table);
  const auto res = run_preparation(ensemble_for_window(-5.12, 5.12, table, 0.01), seq, table, m.branching);

  const auto pit = absorption_spectrum(res.stages.at(0).ensemble, table, m.d_full(), probe);
  double resid = 0.0;
  const double half = 0.5 * seq.pit->span_mhz - seq.pit->laser.bandwidth_mhz;
  for (std::size_t i = 0; i < pit.depth.size(); ++i)
    if (std::abs(pit.grid.frequency(i) - seq.pit->center_mhz) <= half) resid = std::max(resid, pit.depth[i]);
  o.require(resid < 0.02 * m.d_full(), fmt("pit residual %.4f (limit %.3f)", resid, 0.02 * m.d_full()));

  const auto prof = absorption_spectrum(res.ensemble, table, m.d_full(), probe);
  double worst = 0.0;
  for (int k = 0; k < comb.num_teeth; ++k) {
    const double c = comb.tooth_center(k);
    std::size_t best = 0;
    for (std::size_t i = 0; i < prof.depth.size(); ++i)
      if (std::abs(prof.grid.frequency(i) - c) <= 0.25 * comb.delta_mhz &&
          (std::abs(prof.grid.frequency(best) - c) > 0.25 * comb.delta_mhz || prof.depth[i] > prof.depth[best]))
        best = i;
    worst = std::max(worst, std::abs(prof.grid.frequency(best) - c));
  }
  o.require(worst <= probe.resolution() + 1e-9,
            fmt("%d peaks, worst offset %.4f MHz (step %.4f)", comb.num_teeth, worst, probe.resolution()));

  double p32 = 0.0;
  const double cw = 0.5 * seq.clean->span_mhz;
  for (std::size_t c = 0; c < res.ensemble.detuning_mhz.size(); ++c)
    if (std::abs(res.ensemble.detuning_mhz[c] + table.offset(1, 1) - seq.clean->center_mhz) <= cw)
      p32 = std::max(p32, res.ensemble.populations[c][1]);
  o.require(p32 < 0.01, fmt("max 3/2g population %.4f", p32));

  const auto tf = transfer_function_from_depth(prof);
  auto grid = time_grid_for(prof.grid, 0.0);
  grid.start_us = -std::floor(0.25 * grid.duration_us / grid.dt()) * grid.dt();
  const auto out = propagate(make_trace(grid, Pulse{}), tf);
  const double t0 = locate_peak(out, -0.5, 0.5);
  const double t1 = locate_peak(out, 1.0, 3.0);
  o.require(std::abs((t1 - t0) - comb.storage_time_us()) <= 0.05,
            fmt("echo at %.3f us after the transmitted pulse", t1 - t0));
  return o;
}

Outcome c9_inference() {
  Outcome o;
  struct P {
    double d, d0, f;
  };
  const P pts[] = {{1, 0, 2}, {1, 0.5, 4}, {1, 1, 6}, {4.5, 0, 4}, {4.5, 0.5, 6},
                   {4.5, 1, 2}, {8, 0, 6}, {8, 0.5, 2}, {8, 1, 4}};
  double worst_d = 0.0, worst_d0 = 0.0;
  for (const auto& p : pts) {
    const auto obs = simulate_comb_observables(p.d, p.f, p.d0);
    const auto r = infer_comb_params(obs.transmitted_fraction, obs.echo_efficiency, p.f);
    worst_d = std::max(worst_d, std::abs(r.d - p.d) / p.d);
    // relative for nonzero d0, absolute 0.02 at d0 = 0
    worst_d0 = std::max(worst_d0, std::abs(r.d0 - p.d0) / std::max(p.d0, 1.0));
  }
  o.require(worst_d <= 0.02, fmt("worst d error %.2e", worst_d));
  o.require(worst_d0 <= 0.02, fmt("worst d0 error %.2e", worst_d0));
  return o;
}

Outcome c10_optimizer() {
  Outcome o;
  const auto r = optimize_finesse(4.12, 0.45, 1.0, 20.0);
  double best_f = 1.0, best = -1.0;
  for (int i = 0; i <= 1900; ++i) {
    const double f = 1.0 + 0.01 * i;
    const double e = afc_echo_efficiency(4.12, f, 0.45);
    if (e > best) {
      best = e;
      best_f = f;
    }
  }
  o.require(std::abs(r.finesse - best_f) <= 0.05, fmt("F*=%.4f vs grid %.2f", r.finesse, best_f));
  o.require(std::abs(r.efficiency - 0.156) <= 0.005, fmt("eta*=%.4f", r.efficiency));
  return o;
}

Outcome c11_determinism() {
  Outcome o;
  for (const char* preset : {"fig2b", "fig4", "fig5"}) {
    ExperimentConfig a;
    a.preset = preset;
    a.seed = 11;
    a.poisson = true;
    ExperimentConfig b = a;
    b.workers = 4;
    const auto ra = run_experiment(a);
    const auto rb = run_experiment(b);
    bool same = dump_json(ra.report) == dump_json(rb.report) && ra.tables.size() == rb.tables.size();
    for (std::size_t i = 0; same && i < ra.tables.size(); ++i) same = to_csv(ra.tables[i]) == to_csv(rb.tables[i]);
    o.require(same, std::string(preset) + (same ? " identical" : " differs"));
  }
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"closed-form efficiency", c1_closed_form},
      {"engine vs closed form", c2_engine},
      {"transfer consistency", c3_transfer_identity},
      {"spin decay oracle", c4_spin_decay},
      {"rabi fit", c5_rabi},
      {"interference visibility", c6_interference},
      {"multimode storage", c7_multimode},
      {"preparation", c8_preparation},
      {"inference roundtrip", c9_inference},
      {"finesse optimizer", c10_optimizer},
      {"determinism", c11_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("threw: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failed;
    std::printf("%s %2zu %-24s %6.1fs  %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
