#include "afc/error.hpp"
#include "afc/spectral.hpp"

#include "doctest.h"

#include <cmath>
#include <random>

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

}  // namespace

TEST_SUITE("spectral") {
  TEST_CASE("closed-form efficiency at the two reference combs") {
    CHECK(afc_echo_efficiency(4.12, 4.0, 0.45) == doctest::Approx(0.156).epsilon(0.001 / 0.156));
    CHECK(afc_echo_efficiency(3.66, 3.0, 0.26) == doctest::Approx(0.156).epsilon(0.001 / 0.156));
    // Hand evaluation: (1.03)^2 e^{-7/16} e^{-1.03} e^{-0.45}
    const double by_hand = 1.0609 * std::exp(-0.4375) * std::exp(-1.03) * std::exp(-0.45);
    CHECK(afc_echo_efficiency(4.12, 4.0, 0.45) == doctest::Approx(by_hand).epsilon(1e-12));
  }

  TEST_CASE("efficiency stays below 4/e^2 and peaks at d/F = 2") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> d(0.0, 30.0), f(1.0, 40.0), d0(0.0, 2.0);
    for (int i = 0; i < 2000; ++i) {
      const double e = afc_echo_efficiency(d(rng), f(rng), d0(rng));
      CHECK(e >= 0.0);
      CHECK(e <= kForwardEfficiencyBound);
    }
    CHECK(kForwardEfficiencyBound == doctest::Approx(4.0 * std::exp(-2.0)).epsilon(1e-15));
    for (double F : {2.0, 4.0, 7.5}) {
      const double at = afc_echo_efficiency(2.0 * F, F, 0.0);
      CHECK(at > afc_echo_efficiency(2.0 * F * 1.01, F, 0.0));
      CHECK(at > afc_echo_efficiency(2.0 * F * 0.99, F, 0.0));
    }
  }

  TEST_CASE("efficiency domain") {
    CHECK(code_of([] { afc_echo_efficiency(-1, 4, 0); }) == errc::kDomain);
    CHECK(code_of([] { afc_echo_efficiency(1, 0.5, 0); }) == errc::kDomain);
    CHECK(code_of([] { afc_echo_efficiency(1, 4, -0.1); }) == errc::kDomain);
    CHECK(three_level_efficiency(0.156, 0.599) == doctest::Approx(0.156 * 0.599 * 0.599));
    CHECK(code_of([] { three_level_efficiency(1.2, 0.5); }) == errc::kDomain);
  }

  TEST_CASE("comb profile: teeth at the programmed centres with the programmed depth") {
    CombSpec c;  // 0.5 MHz, 125 kHz, 5 teeth
    const auto grid = grid_for_comb(c);
    CHECK(grid.resolution() <= c.tooth_fwhm_mhz / 8.0);
    CHECK(grid.span_mhz >= 4.0 * c.bandwidth_mhz());
    const auto prof = build_comb_profile(c, grid);
    double worst = 0.0;
    for (std::size_t i = 0; i < grid.num_points; ++i) {
      const double nu = grid.frequency(i);
      double ref = c.background_depth;
      for (int k = 0; k < c.num_teeth; ++k) {
        const double x = (nu - c.tooth_center(k)) / c.tooth_fwhm_mhz;
        ref += c.peak_depth * std::exp(-4.0 * std::log(2.0) * x * x);
      }
      worst = std::max(worst, std::abs(prof.depth[i] - ref));
    }
    CHECK(worst < 1e-12);
    // Maxima sit on the sample nearest each programmed centre.
    for (int k = 0; k < c.num_teeth; ++k) {
      const double nu = c.tooth_center(k);
      const auto i = static_cast<std::size_t>(std::lround((nu - grid.start()) / grid.resolution()));
      CHECK(prof.depth[i] >= prof.depth[i - 1]);
      CHECK(prof.depth[i] >= prof.depth[i + 1]);
    }
    CHECK(prof.depth.front() == doctest::Approx(c.background_depth));
  }

  TEST_CASE("comb-period average matches d0 + d sqrt(pi/ln16)/F") {
    CombSpec c;
    c.num_teeth = 41;
    c.tooth_fwhm_mhz = 0.1;
    SpectralGrid g{0.0, 32.0, 8192};
    const auto prof = build_comb_profile(c, g);
    // average over the central ten periods
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < g.num_points; ++i) {
      const double nu = g.frequency(i);
      if (nu >= -2.5 && nu < 2.5) {
        sum += prof.depth[i];
        ++n;
      }
    }
    CHECK(sum / double(n) == doctest::Approx(c.background_depth + c.peak_depth * kGaussianAreaFactor / c.finesse())
                                 .epsilon(1e-6));
  }

  TEST_CASE("profile errors") {
    CombSpec c;
    SpectralGrid coarse{0.0, 10.0, 64};
    CHECK(code_of([&] { build_comb_profile(c, coarse); }) == errc::kGridTooCoarse);
    SpectralGrid narrow{0.0, 1.0, 1024};
    CHECK(code_of([&] { build_comb_profile(c, narrow); }) == errc::kCombExceedsSpan);
    CombSpec bad = c;
    bad.tooth_fwhm_mhz = 0.6;
    CHECK(code_of([&] { bad.validate(); }) == errc::kDomain);
  }

  TEST_CASE("finesse optimizer agrees with a grid search") {
    for (auto [d, d0] : {std::pair{4.12, 0.45}, {1.0, 0.0}, {8.0, 0.3}, {20.0, 1.0}}) {
      double best_f = 1.0, best = -1.0;
      for (double f = 1.0; f <= 20.0 + 1e-12; f += 0.001) {
        const double v = afc_echo_efficiency(d, f, d0);
        if (v > best) {
          best = v;
          best_f = f;
        }
      }
      const auto opt = optimize_finesse(d, d0, 1.0, 20.0);
      CHECK(opt.finesse == doctest::Approx(best_f).epsilon(0.002));
      CHECK(opt.efficiency >= best - 1e-12);
    }
  }

  TEST_CASE("optimizer bounds and degenerate objective") {
    CHECK(code_of([] { optimize_finesse(4, 0, 0.5, 10); }) == errc::kBadBounds);
    CHECK(code_of([] { optimize_finesse(4, 0, 5, 5); }) == errc::kBadBounds);
    CHECK(code_of([] { optimize_finesse(4, 0, 2, 200); }) == errc::kBadBounds);
    CHECK(optimize_finesse(0.0, 0.0, 1.0, 10.0).degenerate);
    // Optimum outside the bracket lands on the boundary.
    CHECK(optimize_finesse(4.12, 0.45, 1.0, 2.0).finesse == doctest::Approx(2.0));
  }

  TEST_CASE("multimode planner") {
    MultimodeRequest r;
    for (int n = 1; n <= 5; ++n) {
      r.n_modes = n;
      const auto d = plan_multimode(r);
      CHECK(d.comb.storage_time_us() == doctest::Approx(n + 2.0));
      CHECK(d.comb.num_teeth * d.comb.delta_mhz <= r.bandwidth_mhz + 1e-9);
      CHECK(d.comb.tooth_fwhm_mhz >= r.min_tooth_fwhm_mhz - 1e-12);
      CHECK(d.mode_capacity >= n);
    }
    r.n_modes = 5;
    r.bandwidth_mhz = 0.5;
    CHECK(code_of([&] { plan_multimode(r); }) == errc::kCapacityInfeasible);
    r.bandwidth_mhz = 0.05;
    CHECK(code_of([&] { plan_multimode(r); }) == errc::kBandwidthTooSmall);
  }
}
