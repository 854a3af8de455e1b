#include "afc/inference.hpp"

#include "afc/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>

namespace afc {
namespace {

class ForwardModel {
 public:
  ForwardModel(double finesse, const ObservableSetup& setup) : setup_(setup) {
    if (!std::isfinite(finesse) || finesse < 1.0) throw Error(errc::kDomain, "finesse must be >= 1");
    if (!(setup.delta_mhz > 0.0) || setup.num_teeth < 1 || !(setup.pulse_fwhm_us > 0.0) ||
        !(setup.window_us > 0.0))
      throw Error(errc::kDomain, "observable setup needs positive spacing, teeth, pulse width and window");
    spec_.delta_mhz = setup.delta_mhz;
    spec_.tooth_fwhm_mhz = setup.delta_mhz / finesse;
    spec_.num_teeth = setup.num_teeth;
    spec_.peak_depth = 0.0;
    spec_.background_depth = 0.0;
    grid_ = grid_for_comb(spec_);
    const double duration = 1.0 / grid_.resolution();
    time_ = time_grid_for(grid_, -0.25 * duration);
    Pulse p;
    p.width_us = setup.pulse_fwhm_us;
    input_ = make_trace(time_, p);
    times_ = {0.0, spec_.storage_time_us()};
    reference_ = detect_echoes(input_, times_, setup.window_us);
  }

  CombObservables operator()(double d, double d0) const {
    CombSpec spec = spec_;
    spec.peak_depth = d;
    spec.background_depth = d0;
    const auto tf = transfer_function_from_depth(build_comb_profile(spec, grid_));
    const auto report = detect_echoes(propagate(input_, tf), times_, setup_.window_us);
    return {echo_efficiency(report, reference_, 0), echo_efficiency(report, reference_, 1)};
  }

 private:
  ObservableSetup setup_;
  CombSpec spec_;
  SpectralGrid grid_;
  TimeGrid time_;
  FieldTrace input_;
  std::array<double, 2> times_{};
  EchoReport reference_;
};

}  // namespace

CombObservables simulate_comb_observables(double d, double finesse, double d0, const ObservableSetup& setup) {
  if (!std::isfinite(d) || d < 0.0 || !std::isfinite(d0) || d0 < 0.0)
    throw Error(errc::kDomain, "depths must be >= 0");
  return ForwardModel(finesse, setup)(d, d0);
}

CombInference infer_comb_params(double transmitted, double echo, double finesse, const ObservableSetup& setup) {
  if (!std::isfinite(transmitted) || !(transmitted > 0.0) || transmitted > 1.0)
    throw Error(errc::kDomain, "transmitted fraction must lie in (0, 1]");
  if (!std::isfinite(echo) || echo < 0.0 || echo >= 1.0)
    throw Error(errc::kDomain, "echo efficiency must lie in [0, 1)");

  const ForwardModel model(finesse, setup);
  CombInference out;

  // A flat background scales H by exp(-d0/2) with zero phase, so both
  // observables factor as f(d) * exp(-d0); only f(d) needs simulating.
  auto bare = [&](double d) {
    ++out.evaluations;
    return model(d, 0.0);
  };
  const double floor_t = bare(kInferenceMaxD).transmitted_fraction;

  // d with bare transmission equal to target * exp(d0); nullopt if even
  // d = 20 transmits too much.
  auto depth_for = [&](double d0) -> std::optional<double> {
    const double target = transmitted * std::exp(d0);
    if (target >= 1.0) return 0.0;
    if (floor_t > target) return std::nullopt;
    double lo = 0.0, hi = kInferenceMaxD;
    while (hi - lo > 1e-9) {
      const double mid = 0.5 * (lo + hi);
      (bare(mid).transmitted_fraction > target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  auto echo_at = [&](double d0, double d) { return bare(d).echo_efficiency * std::exp(-d0); };

  const double d0_hi = std::min(kInferenceMaxD0, -std::log(transmitted));
  const double d0_lo = std::clamp(std::log(floor_t / transmitted), 0.0, d0_hi);

  const auto d_at_lo = depth_for(d0_lo);
  const auto d_at_hi = depth_for(d0_hi);
  if (!d_at_lo || !d_at_hi)
    throw Error(errc::kNoSolution, "transmission not reachable with d <= 20, d0 <= 5");
  const double echo_lo = echo_at(d0_lo, *d_at_lo);
  const double echo_hi = echo_at(d0_hi, *d_at_hi);
  if (echo > echo_lo + kInferenceTolerance || echo < echo_hi - kInferenceTolerance)
    throw Error(errc::kNoSolution, "observables inconsistent with any d in [0, 20], d0 in [0, 5]");

  // Echo decreases monotonically in d0 along the constant-transmission curve.
  double lo = d0_lo, hi = d0_hi;
  while (hi - lo > 1e-9) {
    const double mid = 0.5 * (lo + hi);
    const auto d = depth_for(mid);
    if (!d || echo_at(mid, *d) > echo)
      lo = mid;
    else
      hi = mid;
  }
  out.d0 = 0.5 * (lo + hi);
  const auto d = depth_for(out.d0);
  if (!d) throw Error(errc::kNonConvergence, "inner search left the feasible region");
  out.d = *d;
  out.reproduced = model(out.d, out.d0);
  if (std::abs(out.reproduced.transmitted_fraction - transmitted) > kInferenceTolerance ||
      std::abs(out.reproduced.echo_efficiency - echo) > kInferenceTolerance)
    throw Error(errc::kNonConvergence, "forward model does not reproduce the observables to 1e-4");
  return out;
}

}  // namespace afc
