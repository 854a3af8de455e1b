#include "afc/error.hpp"
#include "afc/spinwave.hpp"

#include "doctest.h"

#include <cmath>
#include <numbers>
#include <vector>

using namespace afc;

namespace {

constexpr double kPi = std::numbers::pi;

std::string code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

StorageSequence single(double ts, double power = 5.7) {
  StorageSequence s;
  Pulse b;
  s.bins = {b};
  s.controls = {{0.6, 0.8, power, 0.0, ControlRole::transfer_in}, {0.6 + ts, 0.8, power, 0.0, ControlRole::readout}};
  return s;
}

}  // namespace

TEST_SUITE("spinwave") {
  TEST_CASE("control pulse area and transfer") {
    MaterialParams m;
    const double theta = pulse_area(5.7, 0.8, m);
    CHECK(theta == doctest::Approx(2 * kPi * 0.34 * 0.8));
    CHECK(transfer_efficiency(theta) == doctest::Approx(0.569).epsilon(0.01 / 0.569));
    CHECK(pulse_area(power_for_area(kPi, 0.8, m), 0.8, m) == doctest::Approx(kPi));
    CHECK(transfer_efficiency(kPi) == doctest::Approx(1.0));
    CHECK(pulse_area(4 * 5.7, 0.8, m) == doctest::Approx(2 * theta));
  }

  TEST_CASE("three-level curve identity") {
    for (int i = 0; i <= 100; ++i) {
      const double th = 4 * kPi * i / 100.0;
      const double s = std::sin(0.5 * th);
      CHECK(std::abs(three_level_vs_power(th, 0.156) - 0.156 * std::pow(s, 4)) < 1e-12);
      CHECK(afc_area_vs_power(th, 0.156, 2.0) == doctest::Approx(2.0 * 0.156 * std::pow(std::cos(0.5 * th), 2)));
    }
  }

  TEST_CASE("spin decay closed form and Monte Carlo") {
    const double g = 0.0256;
    CHECK(spin_decay_factor(g, spin_half_decay_time(g)) == doctest::Approx(0.5));
    CHECK(spin_half_decay_time(g) == doctest::Approx(12.2).epsilon(0.1 / 12.2));
    for (double t : {0.0, 4.0, 8.0, 12.0, 16.0, 20.0})
      CHECK(std::abs(mc_spin_decay(g, t, 100000, 17) - spin_decay_factor(g, t)) < 0.01);
    CHECK(mc_spin_decay(g, 8.0, 5000, 3) == mc_spin_decay(g, 8.0, 5000, 3));
  }

  TEST_CASE("laser phase is a Wiener process with variance 2 pi linewidth t") {
    Rng rng(5);
    const std::vector<double> times{0.0, 1.0, 3.0};
    const double lw = 0.0555;
    double s1 = 0.0, s2 = 0.0;
    const int n = 40000;
    for (int i = 0; i < n; ++i) {
      const auto ph = sample_laser_phase(lw, times, rng);
      CHECK(ph[0] == 0.0);
      s1 += ph[1] * ph[1];
      s2 += (ph[2] - ph[1]) * (ph[2] - ph[1]);
    }
    CHECK(s1 / n == doctest::Approx(2 * kPi * lw * 1.0).epsilon(0.03));
    CHECK(s2 / n == doctest::Approx(2 * kPi * lw * 2.0).epsilon(0.03));
    const std::vector<double> bad{1.0, 0.5};
    CHECK(code_of([&] { sample_laser_phase(lw, bad, rng); }) == errc::kUnsortedTimes);
  }

  TEST_CASE("sequence invariants") {
    auto s = single(4.0);
    CHECK_NOTHROW(s.validate());
    auto a = s;
    a.controls[0].role = ControlRole::readout;
    CHECK(code_of([&] { a.validate(); }) == errc::kSequenceInvalid);
    auto b = s;
    b.controls[1].start_us = 1.0;  // overlaps the transfer pulse
    CHECK(code_of([&] { b.validate(); }) == errc::kSequenceInvalid);
    auto c = s;
    c.controls[0].start_us = 2.5;  // after the echo time
    CHECK(code_of([&] { c.validate(); }) == errc::kSequenceInvalid);
    auto d = s;
    d.controls.push_back({3.0, 0.8, 5.7, 0.0, ControlRole::readout});  // out of order
    CHECK(code_of([&] { d.validate(); }) == errc::kSequenceInvalid);
  }

  TEST_CASE("gram areas equal direct window integration") {
    auto s = single(4.0);
    s.bins.push_back(s.bins[0]);
    s.bins[1].arrival_us = 0.3;
    s.bins[1].phase_rad = 1.1;
    s.controls[0].start_us = 0.9;
    s.controls[1].start_us = 4.9;
    const StorageSimulator sim(s);
    const auto c = sim.coefficients(0);
    const auto tr = sim.trace(c);
    for (double center : {2.0, 6.0, 6.3}) {
      const auto g = sim.gram(center, 0.5);
      CHECK(StorageSimulator::area(g, c) == doctest::Approx(window_area(tr, center - 0.25, center + 0.25)).epsilon(1e-10));
    }
  }

  TEST_CASE("pi transfer without dephasing stores the whole two-level echo") {
    MaterialParams m;
    m.gamma_is_mhz = 0.0;
    auto full = single(4.0, power_for_area(kPi, 0.8, m));
    full.material = m;
    auto none = single(4.0, 0.0);
    none.material = m;
    full.min_span_us = none.min_span_us = 20.0;
    const StorageSimulator a(full), b(none);
    const auto ca = a.coefficients(0);
    const auto cb = b.coefficients(0);
    const double tle = std::norm(ca[a.echo_component(0, 0)]) * a.component_area(a.echo_component(0, 0), 6.0, 0.5);
    const double afc2 = std::norm(cb[0]) * b.component_area(0, 2.0, 0.5);
    CHECK(tle == doctest::Approx(afc2).epsilon(1e-9));
    // The two-level echo is fully suppressed after a pi transfer.
    CHECK(std::norm(ca[0]) * a.component_area(0, 2.0, 0.5) < 1e-20);
  }

  TEST_CASE("ledger energy bookkeeping") {
    const auto res = run_storage_sequence(single(4.0));
    REQUIRE(res.ledger.modes.size() == 1);
    const auto& m = res.ledger.modes[0];
    CHECK(m.absorbed_energy > 0.0);
    CHECK(m.absorbed_energy < m.input_energy);
    CHECK(m.stored_energy <= m.echo_energy + 1e-15);
    double emitted = 0.0;
    for (const auto& e : res.ledger.emissions) emitted += e.energy;
    CHECK(emitted <= m.stored_energy + 1e-15);
    CHECK(res.ledger.emissions.at(0).time_us == doctest::Approx(6.0));
  }

  TEST_CASE("interference without phase noise is fully visible") {
    StorageSequence s;
    Pulse e;
    e.shape = PulseShape::square;
    e.width_us = 0.7;
    Pulse l = e;
    l.arrival_us = 1.0;
    s.bins = {e, l};
    s.comb.delta_mhz = 0.2;
    s.comb.tooth_fwhm_mhz = 0.05;
    s.comb.num_teeth = 15;
    const double d = 0.8;
    s.controls = {{2.6, d, power_for_area(kPi, d, s.material), 0, ControlRole::transfer_in},
                  {10.6, d, power_for_area(kPi / 2, d, s.material), 0, ControlRole::readout},
                  {11.6, d, power_for_area(kPi, d, s.material), 0, ControlRole::readout}};
    std::vector<double> phases;
    for (int i = 0; i < 12; ++i) phases.push_back(2 * kPi * i / 12.0);
    const auto v = interference_visibility(s, phases, 1);
    CHECK(v.visibility == doctest::Approx(1.0).epsilon(0.005));
    s.noise.linewidth_mhz = 0.0555;
    const auto a = interference_visibility(s, phases, 20, PhaseSweep::bin, 1);
    const auto b = interference_visibility(s, phases, 20, PhaseSweep::bin, 5);
    for (std::size_t i = 0; i < phases.size(); ++i) CHECK(a.fringe[i].mean_area == b.fringe[i].mean_area);
  }
}
