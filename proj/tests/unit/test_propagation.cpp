#include "afc/error.hpp"
#include "afc/propagation.hpp"

#include "doctest.h"

#include <cmath>
#include <numbers>
#include <vector>

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

OpticalDepthProfile flat(double d, const SpectralGrid& g) {
  OpticalDepthProfile p;
  p.grid = g;
  p.depth.assign(g.num_points, d);
  return p;
}

struct Setup {
  CombSpec comb;
  SpectralGrid sgrid;
  TransferFunction tf;
  TimeGrid tgrid;
  FieldTrace input;
};

Setup comb_setup(double delta = 0.5, double finesse = 4.0, int teeth = 5) {
  Setup s;
  s.comb.delta_mhz = delta;
  s.comb.tooth_fwhm_mhz = delta / finesse;
  s.comb.num_teeth = teeth;
  s.sgrid = grid_for_comb(s.comb);
  s.tf = transfer_function_from_depth(build_comb_profile(s.comb, s.sgrid));
  s.tgrid = time_grid_for(s.sgrid, 0.0);
  s.tgrid.start_us = -std::floor(0.25 * s.tgrid.duration_us / s.tgrid.dt()) * s.tgrid.dt();
  Pulse p;
  p.width_us = 0.84 * 0.5 / delta;
  s.input = make_trace(s.tgrid, p);
  return s;
}

}  // namespace

TEST_SUITE("propagation") {
  TEST_CASE("time grid matches the spectral grid") {
    SpectralGrid g{0.0, 10.0, 1024};
    const auto t = time_grid_for(g, -3.0);
    CHECK(t.duration_us == doctest::Approx(1.0 / g.resolution()));
    CHECK(t.dt() <= 1.0 / (4.0 * g.span_mhz) + 1e-15);
    CHECK(t.start_us == -3.0);
    CHECK(t.fft_frequency(1) == doctest::Approx(1.0 / t.duration_us));
    CHECK(t.fft_frequency(t.num_points - 1) == doctest::Approx(-1.0 / t.duration_us));
  }

  TEST_CASE("pulse energy: analytic vs sampled") {
    SpectralGrid g{0.0, 16.0, 1024};
    const auto t = time_grid_for(g, -20.0);
    for (auto shape : {PulseShape::gaussian, PulseShape::square}) {
      Pulse p;
      p.shape = shape;
      p.width_us = 0.84;
      p.amplitude = 1.7;
      p.arrival_us = 0.3;
      const auto tr = make_trace(t, p);
      const double tol = shape == PulseShape::gaussian ? 1e-9 : t.dt() / p.width_us;
      CHECK(tr.energy() == doctest::Approx(p.energy()).epsilon(tol));
    }
    Pulse p;
    CHECK(std::norm(p.field(0.5 * p.width_us)) == doctest::Approx(0.5));
  }

  TEST_CASE("empty and flat media") {
    SpectralGrid g{0.0, 8.0, 512};
    const auto t = time_grid_for(g, -10.0);
    Pulse p;
    const auto in = make_trace(t, p);
    const auto out0 = propagate(in, transfer_function_from_depth(flat(0.0, g)));
    const auto out3 = propagate(in, transfer_function_from_depth(flat(3.0, g)));
    for (std::size_t i = 0; i < in.samples.size(); ++i) {
      CHECK(std::abs(out0.samples[i] - in.samples[i]) < 1e-12);
      CHECK(std::abs(out3.samples[i] - std::exp(-1.5) * in.samples[i]) < 1e-12);
    }
  }

  TEST_CASE("dispersion of a Lorentzian line matches the analytic Kramers-Kronig partner") {
    // d(nu) = d G^2 / (G^2 + nu^2)  <->  phi(nu) = (d/2) G nu / (G^2 + nu^2)
    const double d = 2.0, G = 0.05;
    SpectralGrid g{0.0, 400.0, 1 << 16};
    OpticalDepthProfile p = flat(0.0, g);
    for (std::size_t i = 0; i < g.num_points; ++i) {
      const double nu = g.frequency(i);
      p.depth[i] = d * G * G / (G * G + nu * nu);
    }
    const auto tf = transfer_function_from_depth(p);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.num_points; ++i) {
      const double nu = g.frequency(i);
      if (std::abs(nu) > 1.0) continue;
      worst = std::max(worst, std::abs(tf.phase[i] - 0.5 * d * G * nu / (G * G + nu * nu)));
    }
    CHECK(worst < 2e-3 * d);
  }

  TEST_CASE("propagate equals direct circular convolution with the impulse response") {
    CombSpec c;
    c.num_teeth = 3;
    SpectralGrid g{0.0, 4.0, 256};
    const auto tf = transfer_function_from_depth(build_comb_profile(c, g));
    const auto t = time_grid_for(g, -8.0);
    Pulse p;
    p.carrier_detuning_mhz = 0.1;
    const auto in = make_trace(t, p);
    const auto out = propagate(in, tf);
    const auto h = impulse_response(tf, t);
    const std::size_t n = t.num_points;
    double worst = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      cplx y{};
      for (std::size_t m = 0; m < n; ++m) y += h[m] * in.samples[(i + n - m) % n];
      worst = std::max(worst, std::abs(y - out.samples[i]));
      scale = std::max(scale, std::abs(out.samples[i]));
    }
    CHECK(worst < 1e-10 * scale);
  }

  TEST_CASE("comb response is causal and passive") {
    auto s = comb_setup();
    const auto h = impulse_response(s.tf, s.tgrid);
    const std::size_t n = h.size();
    double early = 0.0, total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      total += std::norm(h[i]);
      if (i >= n / 2) early += std::norm(h[i]);
    }
    CHECK(early < 1e-8 * total);
    const auto out = propagate(s.input, s.tf);
    CHECK(out.energy() <= s.input.energy());
    for (auto v : s.tf.response) CHECK(std::abs(v) <= 1.0 + 1e-12);
  }

  TEST_CASE("echo appears 1/delta after the transmitted pulse") {
    for (double delta : {0.125, 0.2, 0.5, 1.0}) {
      auto s = comb_setup(delta);
      const auto out = propagate(s.input, s.tf);
      const double tau = 1.0 / delta;
      const double t0 = locate_peak(out, -0.25 * tau, 0.25 * tau);
      const double t1 = locate_peak(out, 0.75 * tau, 1.25 * tau);
      CHECK(std::abs((t1 - t0) - tau) <= s.tgrid.dt());
    }
  }

  TEST_CASE("simulated efficiency close to the closed form") {
    auto s = comb_setup();
    const auto out = propagate(s.input, s.tf);
    const std::vector<double> times{0.0, 2.0};
    const auto ref = detect_echoes(s.input, std::span<const double>(times.data(), 1));
    const auto rep = detect_echoes(out, times);
    const double eta = echo_efficiency(rep, ref, 1);
    const double model = afc_echo_efficiency(4.12, 4.0, 0.45);
    CHECK(std::abs(eta - model) / model < 0.15);
    CHECK(echo_efficiency(rep, ref, 0) < 1.0);
  }

  TEST_CASE("window helpers") {
    auto s = comb_setup();
    Pulse p;
    p.width_us = 0.3;
    p.arrival_us = 0.37 * s.tgrid.dt() + 1.0;
    const auto tr = make_trace(s.tgrid, p);
    CHECK(std::abs(locate_peak(tr, 0.0, 2.0) - p.arrival_us) < 0.05 * s.tgrid.dt());
    CHECK(window_area(tr, -5.0, 5.0) == doctest::Approx(p.energy()).epsilon(1e-9));
    const std::vector<double> overlap{0.0, 0.3};
    CHECK(code_of([&] { detect_echoes(tr, overlap, 0.5); }) == errc::kOverlappingWindows);
    const std::vector<double> outside{1e6};
    CHECK(code_of([&] { detect_echoes(tr, outside, 0.5); }) == errc::kWindowOutOfRange);
    FieldTrace zero = tr;
    for (auto& v : zero.samples) v = {};
    const std::vector<double> one{1.0};
    const auto zr = detect_echoes(zero, one);
    const auto tr_rep = detect_echoes(tr, one);
    CHECK(code_of([&] { echo_efficiency(tr_rep, zr, 0); }) == errc::kZeroReference);
  }

  TEST_CASE("grid errors") {
    CombSpec c;
    SpectralGrid g{0.0, 10.0, 1024};
    const auto tf = transfer_function_from_depth(build_comb_profile(c, g));
    TimeGrid coarse{0.0, 200.0, 1024};  // dt 0.195 > 1/40
    FieldTrace tr{coarse, std::vector<cplx>(1024)};
    CHECK(code_of([&] { propagate(tr, tf); }) == errc::kGridMismatch);
    auto prof = build_comb_profile(c, g);
    prof.feature_fwhm_mhz = 0.01;
    CHECK(code_of([&] { transfer_function_from_depth(prof); }) == errc::kGridTooCoarse);
  }

  TEST_CASE("optical decoherence factor") {
    CHECK(optical_decoherence_factor(2.0, 111.0) == doctest::Approx(std::exp(-4.0 / 111.0)));
    CHECK(optical_decoherence_factor(0.0, 111.0) == 1.0);
  }

  TEST_CASE("photon counting statistics") {
    auto s = comb_setup();
    const double photons = 2e4, od = 3.0;
    const std::size_t trials = 4000;
    const auto h = poisson_sample(s.input, photons, od, trials, 99);
    const double mu = photons * std::pow(10.0, -od);
    CHECK(h.expected_total_per_trial == doctest::Approx(mu));
    double total = 0.0;
    for (auto c : h.counts) total += double(c);
    const double expect = mu * double(trials);
    CHECK(std::abs(total - expect) < 5.0 * std::sqrt(expect));
    // Counts follow the intensity: compare the fraction inside +-FWHM/2.
    double inside = 0.0;
    for (std::size_t i = 0; i < h.counts.size(); ++i)
      if (std::abs(s.tgrid.time(i)) < 0.42) inside += double(h.counts[i]);
    const double frac = window_area(s.input, -0.42, 0.42) / s.input.energy();
    CHECK(std::abs(inside / total - frac) < 5.0 * std::sqrt(frac * (1 - frac) / total));

    const auto a = poisson_sample(s.input, photons, od, 300, 5, std::nullopt, 1);
    const auto b = poisson_sample(s.input, photons, od, 300, 5, std::nullopt, 6);
    CHECK(a.counts == b.counts);
    // Output trace counted against the input energy scales by transmission.
    const auto out = propagate(s.input, s.tf);
    const auto c = poisson_sample(out, photons, od, 1, 5, s.input.energy());
    CHECK(c.expected_total_per_trial == doctest::Approx(mu * out.energy() / s.input.energy()));
  }
}
