#include "afc/error.hpp"
#include "afc/experiments.hpp"
#include "afc/prep.hpp"
#include "afc/propagation.hpp"

#include "doctest.h"

#include <algorithm>
#include <cmath>

using namespace afc;

namespace {

std::string code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

double population_sum(const IonEnsemble& e) {
  double s = 0.0;
  for (std::size_t c = 0; c < e.populations.size(); ++c)
    s += e.weights[c] * (e.populations[c][0] + e.populations[c][1] + e.populations[c][2]);
  return s;
}

struct DefaultPrep {
  TransitionTable table;
  CombSpec comb = fig2a_comb();
  SpectralGrid probe{0.0, 10.24, 1024};
  PrepResult result;
  MaterialParams material;
};

const DefaultPrep& default_prep() {
  static const DefaultPrep p = [] {
    DefaultPrep d;
    d.table = transition_table_from(d.material);
    const auto seq = default_prep_sequence(d.comb, d.table);
    const auto ens = ensemble_for_window(-5.12, 5.12, d.table, 0.01);
    d.result = run_preparation(ens, seq, d.table, d.material.branching);
    return d;
  }();
  return p;
}

double max_depth(const OpticalDepthProfile& p, double lo, double hi) {
  double m = 0.0;
  for (std::size_t i = 0; i < p.depth.size(); ++i) {
    const double nu = p.grid.frequency(i);
    if (nu >= lo && nu <= hi) m = std::max(m, p.depth[i]);
  }
  return m;
}

}  // namespace

TEST_SUITE("prep") {
  TEST_CASE("unburned ensemble absorbs d_full everywhere") {
    const TransitionTable t;
    const auto ens = ensemble_for_window(-2.0, 2.0, t, 0.02);
    const SpectralGrid g{0.0, 4.0, 64};
    const auto p = absorption_spectrum(ens, t, 6.9, g);
    for (double d : p.depth) CHECK(d == doctest::Approx(6.9).epsilon(1e-12));
    const IonEnsemble narrow = IonEnsemble::uniform(-0.5, 0.5, 0.02);
    CHECK(code_of([&] { absorption_spectrum(narrow, t, 6.9, g); }) == errc::kWindowOutOfRange);
  }

  TEST_CASE("excitation profiles") {
    const Excitation hat{0.2, 1.0, LineShape::top_hat, 0.0};
    CHECK(hat.profile(0.09) == 1.0);
    CHECK(hat.profile(0.11) == 0.0);
    const Excitation lor{0.2, 1.0, LineShape::lorentzian, 0.0};
    CHECK(lor.profile(0.0) == 1.0);
    CHECK(lor.profile(0.1) == doctest::Approx(0.5));
    CHECK(lor.reach_mhz() == doctest::Approx(2.0));
    CHECK(lor.profile(2.5) == 0.0);
  }

  TEST_CASE("burn steps conserve population and move it out of the driven level") {
    MaterialParams m;
    const auto t = transition_table_from(m);
    const auto ens = IonEnsemble::uniform(-1.0, 1.0, 0.01);
    const Excitation laser{0.1, 2.0, LineShape::lorentzian, 0.0};
    const auto out = burn_step(ens, 0.0 + t.offset(0, 1), laser, 5.0, t, m.branching);
    CHECK(population_sum(out) == doctest::Approx(population_sum(ens)).epsilon(1e-12));
    const auto centre = static_cast<std::size_t>(std::lround(1.0 / 0.01));
    CHECK(out.populations[centre][0] < 0.05);
    for (const auto& p : out.populations)
      for (double v : p) CHECK(v >= -1e-12);
  }

  TEST_CASE("repeated passes match a manual sequence of burn steps") {
    MaterialParams m;
    const auto t = transition_table_from(m);
    const auto ens = IonEnsemble::uniform(-0.5, 0.5, 0.05);
    PrepSequence seq;
    seq.burn_back.laser = {0.2, 0.3, LineShape::lorentzian, 1.0};
    seq.burn_back.pulses = {{0.1, 7.0, 13}};
    const auto res = run_preparation(ens, seq, t, m.branching);
    IonEnsemble manual = ens;
    for (int i = 0; i < 13; ++i) manual = burn_step(manual, 0.1, seq.burn_back.laser, 7.0, t, m.branching);
    for (std::size_t c = 0; c < ens.populations.size(); ++c)
      for (int g = 0; g < 3; ++g) CHECK(res.ensemble.populations[c][g] == doctest::Approx(manual.populations[c][g]).epsilon(1e-9));
  }

  TEST_CASE("sequence validation") {
    PrepSequence seq;
    seq.burn_back.pulses = {{0.0, -1.0, 1}};
    CHECK(code_of([&] { seq.validate(); }) == errc::kSequenceInvalid);
    SweepStage s;
    s.span_mhz = 0.0;
    PrepSequence seq2;
    seq2.pit = s;
    CHECK(code_of([&] { seq2.validate(); }) == errc::kSequenceInvalid);
  }

  TEST_CASE("default preparation: pit, burn-back peaks and emptied storage level") {
    const auto& p = default_prep();
    REQUIRE(p.result.stages.size() == 3);
    CHECK(p.result.stages[0].name == "pit");

    const auto pit = absorption_spectrum(p.result.stages[0].ensemble, p.table, p.material.d_full(), p.probe);
    CHECK(max_depth(pit, -1.5, 1.5) < 0.02 * 6.9);

    const auto prof = absorption_spectrum(p.result.ensemble, p.table, p.material.d_full(), p.probe);
    const double step = p.probe.resolution();
    for (int k = 0; k < p.comb.num_teeth; ++k) {
      const double c = p.comb.tooth_center(k);
      std::size_t best = 0;
      double best_d = -1.0;
      for (std::size_t i = 0; i < prof.depth.size(); ++i) {
        const double nu = prof.grid.frequency(i);
        if (std::abs(nu - c) <= 0.25 * p.comb.delta_mhz && prof.depth[i] > best_d) {
          best_d = prof.depth[i];
          best = i;
        }
      }
      CHECK(std::abs(prof.grid.frequency(best) - c) <= step + 1e-9);
      CHECK(best_d > 1.0);
    }

    double worst = 0.0;
    const auto& e = p.result.ensemble;
    for (std::size_t c = 0; c < e.detuning_mhz.size(); ++c)
      if (std::abs(e.detuning_mhz[c]) <= 1.0) worst = std::max(worst, e.populations[c][1]);
    CHECK(worst < 0.01);
  }

  TEST_CASE("prepared comb stores an echo at 1/delta") {
    const auto& p = default_prep();
    const auto prof = absorption_spectrum(p.result.ensemble, p.table, p.material.d_full(), p.probe);
    const auto tf = transfer_function_from_depth(prof);
    auto grid = time_grid_for(prof.grid, 0.0);
    grid.start_us = -std::floor(0.25 * grid.duration_us / grid.dt()) * grid.dt();
    const auto out = propagate(make_trace(grid, Pulse{}), tf);
    const double tau = p.comb.storage_time_us();
    const double t = locate_peak(out, 1.0, 3.0);
    CHECK(std::abs(t - tau) < 0.1);
    CHECK(window_area(out, t - 0.25, t + 0.25) > 1e-3 * window_area(make_trace(grid, Pulse{}), -0.25, 0.25));
  }
}
