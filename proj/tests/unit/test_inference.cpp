#include "afc/error.hpp"
#include "afc/inference.hpp"

#include "doctest.h"

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

}  // namespace

TEST_SUITE("inference") {
  TEST_CASE("observables behave monotonically") {
    const auto a = simulate_comb_observables(2.0, 4.0, 0.45);
    const auto b = simulate_comb_observables(4.0, 4.0, 0.45);
    CHECK(b.transmitted_fraction < a.transmitted_fraction);
    const auto c = simulate_comb_observables(4.0, 4.0, 0.9);
    CHECK(c.transmitted_fraction == doctest::Approx(b.transmitted_fraction * std::exp(-0.45)).epsilon(1e-9));
    CHECK(c.echo_efficiency == doctest::Approx(b.echo_efficiency * std::exp(-0.45)).epsilon(1e-9));
  }

  TEST_CASE("roundtrip at the reference comb") {
    const auto obs = simulate_comb_observables(4.12, 4.0, 0.45);
    const auto r = infer_comb_params(obs.transmitted_fraction, obs.echo_efficiency, 4.0);
    CHECK(r.d == doctest::Approx(4.12).epsilon(1e-4));
    CHECK(r.d0 == doctest::Approx(0.45).epsilon(1e-4));
    CHECK(std::abs(r.reproduced.echo_efficiency - obs.echo_efficiency) < kInferenceTolerance);
  }

  TEST_CASE("errors") {
    CHECK(code_of([] { infer_comb_params(0.0, 0.1, 4.0); }) == errc::kDomain);
    CHECK(code_of([] { infer_comb_params(0.5, 1.0, 4.0); }) == errc::kDomain);
    CHECK(code_of([] { infer_comb_params(0.5, 0.1, 0.5); }) == errc::kDomain);
    // echo far above anything a comb with this transmission can give
    CHECK(code_of([] { infer_comb_params(0.9, 0.5, 4.0); }) == errc::kNoSolution);
  }
}
