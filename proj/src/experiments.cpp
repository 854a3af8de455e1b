#include "afc/experiments.hpp"

#include "afc/error.hpp"
#include "afc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace afc {
namespace {

double input_window_area(const TimeGrid& grid, const Pulse& pulse, double window_us) {
  const auto tr = make_trace(grid, pulse);
  return window_area(tr, pulse.arrival_us - 0.5 * window_us, pulse.arrival_us + 0.5 * window_us);
}

double peak_in(const std::vector<cplx>& samples, const TimeGrid& grid, double lo, double hi) {
  double best = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double t = grid.time(i);
    if (t >= lo && t < hi) best = std::max(best, std::norm(samples[i]));
  }
  return best;
}

// Single-bin transfer-in / readout sequence shared by the decay and Rabi runs.
StorageSequence single_bin_sequence(const CombSpec& comb, const MaterialParams& material, double fwhm,
                                    double t1_center, double duration, double power_in, double power_out,
                                    double ts, double window) {
  StorageSequence s;
  Pulse bin;
  bin.width_us = fwhm;
  s.bins = {bin};
  s.controls = {{t1_center - 0.5 * duration, duration, power_in, 0.0, ControlRole::transfer_in},
                {t1_center + ts - 0.5 * duration, duration, power_out, 0.0, ControlRole::readout}};
  s.comb = comb;
  s.material = material;
  s.window_us = window;
  return s;
}

struct LinearFit {
  double intercept = 0.0, slope = 0.0, slope_sigma = 0.0;
};

LinearFit weighted_line(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& sigma) {
  const std::size_t n = x.size();
  if (n < 3) throw Error(errc::kDegenerateData, "slope needs at least three points");
  const bool weighted = std::all_of(sigma.begin(), sigma.end(), [](double s) { return s > 0.0; });
  double S = 0, Sx = 0, Sy = 0, Sxx = 0, Sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weighted ? 1.0 / (sigma[i] * sigma[i]) : 1.0;
    S += w;
    Sx += w * x[i];
    Sy += w * y[i];
    Sxx += w * x[i] * x[i];
    Sxy += w * x[i] * y[i];
  }
  const double det = S * Sxx - Sx * Sx;
  if (!(det > 0.0)) throw Error(errc::kDegenerateData, "slope needs distinct abscissae");
  LinearFit f;
  f.slope = (S * Sxy - Sx * Sy) / det;
  f.intercept = (Sxx * Sy - Sx * Sxy) / det;
  double var = S / det;
  if (!weighted) {
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - f.intercept - f.slope * x[i];
      rss += r * r;
    }
    var *= rss / static_cast<double>(n - 2);
  }
  f.slope_sigma = std::sqrt(var);
  return f;
}

json estimate_json(const Estimate& e) { return {{"value", e.value}, {"sigma", e.sigma}}; }

}  // namespace

CombSpec fig2a_comb() {
  CombSpec c;
  c.delta_mhz = 0.5;
  c.tooth_fwhm_mhz = 0.125;
  c.num_teeth = 5;
  c.peak_depth = 4.12;
  c.background_depth = 0.45;
  return c;
}

TwoLevelResult exp_two_level_afc(const TwoLevelParams& p) {
  const auto sgrid = grid_for_comb(p.comb);
  const auto tf = transfer_function_from_depth(build_comb_profile(p.comb, sgrid));
  auto tgrid = time_grid_for(sgrid, 0.0);
  tgrid.start_us = std::floor(-0.25 * tgrid.duration_us / tgrid.dt()) * tgrid.dt();
  const double tau = p.comb.storage_time_us();
  if (tgrid.end_us() < 1.5 * tau) throw Error(errc::kWindowOutOfRange, "time grid too short for the echo");

  Pulse pulse;
  pulse.width_us = p.pulse_fwhm_us;
  TwoLevelResult r;
  r.reference = make_trace(tgrid, pulse);
  r.output = propagate(r.reference, tf);
  const std::vector<double> times{0.0, tau};
  const auto ref = detect_echoes(r.reference, std::span<const double>(times.data(), 1), p.window_us);
  const auto out = detect_echoes(r.output, times, p.window_us);
  r.transmitted = echo_efficiency(out, ref, 0);
  r.efficiency = echo_efficiency(out, ref, 1);
  if (p.apply_optical_t2) r.efficiency *= optical_decoherence_factor(tau, p.t2_us);
  r.echo_time_us = locate_peak(r.output, 0.75 * tau, 1.25 * tau) - locate_peak(r.output, -0.25 * tau, 0.25 * tau);
  r.predicted_efficiency = afc_echo_efficiency(p.comb.peak_depth, p.comb.finesse(), p.comb.background_depth);
  return r;
}

DecayResult exp_spinwave_decay(const DecayParams& p) {
  if (p.ts_us.size() < 4) throw Error(errc::kDegenerateData, "decay series needs at least four storage times");
  const double tau = p.comb.storage_time_us();
  const double ts_max = *std::max_element(p.ts_us.begin(), p.ts_us.end());

  auto run = [&](double ts, const MaterialParams& m, double& amplitude) {
    auto seq = single_bin_sequence(p.comb, m, p.pulse_fwhm_us, p.transfer_center_us, p.control_duration_us,
                                   p.control_power_mw, p.control_power_mw, ts, p.window_us);
    seq.min_span_us = 2.0 * tau + ts_max + 4.0 * p.pulse_fwhm_us;
    const StorageSimulator sim(seq);
    const auto c = sim.coefficients(0);
    const std::size_t k = sim.echo_component(0, 0);
    const double te = sim.emission_time(0, 0);
    const double w = p.window_us;
    const double a_in = input_window_area(sim.grid(), seq.bins[0], w);
    const auto in_trace = make_trace(sim.grid(), seq.bins[0]);
    const double in_peak = peak_in(in_trace.samples, sim.grid(), -0.5 * w, 0.5 * w);
    std::vector<cplx> only(c.size(), cplx{});
    only[k] = c[k];
    const auto echo = sim.trace(only);
    amplitude = peak_in(echo.samples, sim.grid(), te - 0.5 * w, te + 0.5 * w) / in_peak;
    return std::norm(c[k]) * sim.component_area(k, te, w) / a_in;
  };

  DecayResult r;
  r.ts_us = p.ts_us;
  std::vector<double> sigmas;
  for (double ts : p.ts_us) {
    double amp = 0.0;
    r.efficiency.push_back(run(ts, p.material, amp));
    r.amplitude_efficiency.push_back(amp);
    sigmas.push_back(p.relative_sigma * r.efficiency.back());
  }
  MaterialParams frozen = p.material;
  frozen.gamma_is_mhz = 0.0;
  double amp0 = 0.0;
  r.efficiency_t0 = run(p.ts_us.front(), frozen, amp0);
  r.fit = fit_gaussian_decay(r.ts_us, r.efficiency, sigmas);
  return r;
}

RabiResult exp_rabi_sweep(const RabiParams& p) {
  if (p.num_powers < 4) throw Error(errc::kDegenerateData, "power sweep needs at least four points");
  RabiResult r;
  const double w = p.window_us;
  const double tau = p.comb.storage_time_us();
  r.spin_factor = spin_decay_factor(p.material.gamma_is_mhz, p.ts_us);
  for (std::size_t i = 0; i < p.num_powers; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(p.num_powers - 1);
    const double power = p.max_power_mw * x * x;
    const auto seq = single_bin_sequence(p.comb, p.material, p.pulse_fwhm_us, p.transfer_center_us,
                                         p.control_duration_us, power, power, p.ts_us, w);
    const StorageSimulator sim(seq);
    const auto c = sim.coefficients(0);
    if (i == 0) r.input_area = input_window_area(sim.grid(), seq.bins[0], w);
    const std::size_t d = sim.direct_component(0), k = sim.echo_component(0, 0);
    r.powers_mw.push_back(power);
    r.afc_area.push_back(std::norm(c[d]) * sim.component_area(d, tau, w));
    r.tle_efficiency.push_back(std::norm(c[k]) * sim.component_area(k, sim.emission_time(0, 0), w) / r.input_area);
  }
  r.eta_afc = r.afc_area.front() / r.input_area;

  RabiFitSetup setup;
  setup.duration_us = p.control_duration_us;
  setup.power_ref_mw = p.material.power_ref_mw;
  setup.spin_factor = r.spin_factor;
  r.fit = fit_rabi(r.powers_mw, r.afc_area, r.tle_efficiency, setup);
  return r;
}

StorageSequence fig4_sequence(double ts_us, const MaterialParams& material, double linewidth_mhz,
                              std::uint64_t seed) {
  StorageSequence s;
  s.comb.delta_mhz = 0.2;
  s.comb.tooth_fwhm_mhz = 0.05;
  s.comb.num_teeth = 15;
  s.comb.peak_depth = 4.12;
  s.comb.background_depth = 0.45;
  s.material = material;
  Pulse early;
  early.shape = PulseShape::square;
  early.width_us = 0.7;
  Pulse late = early;
  late.arrival_us = 1.0;
  s.bins = {early, late};
  const double dur = 0.8;
  const double pi = std::numbers::pi;
  s.controls = {{2.6, dur, power_for_area(pi, dur, material), 0.0, ControlRole::transfer_in},
                {2.6 + ts_us, dur, power_for_area(0.5 * pi, dur, material), 0.0, ControlRole::readout},
                {3.6 + ts_us, dur, power_for_area(pi, dur, material), 0.0, ControlRole::readout}};
  s.noise.linewidth_mhz = linewidth_mhz;
  s.noise.seed = seed;
  return s;
}

TimebinResult exp_timebin(const TimebinParams& p, unsigned workers) {
  if (p.num_phases < 8) throw Error(errc::kDegenerateData, "need at least 8 phases");
  std::vector<double> phases(p.num_phases);
  for (std::size_t i = 0; i < p.num_phases; ++i)
    phases[i] = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(p.num_phases);

  TimebinResult r;
  std::vector<double> x, v, s;
  for (std::size_t i = 0; i < p.ts_us.size(); ++i) {
    const auto seq = fig4_sequence(p.ts_us[i], p.material, p.linewidth_mhz, derive_seed(p.seed, i));
    TimebinPoint pt;
    pt.ts_us = p.ts_us[i];
    pt.visibility = interference_visibility(seq, phases, p.trials_per_phase, p.sweep, workers);
    for (const auto& f : pt.visibility.fringe) pt.mean_area += f.mean_area;
    pt.mean_area /= static_cast<double>(pt.visibility.fringe.size());
    x.push_back(pt.ts_us);
    v.push_back(pt.visibility.visibility);
    s.push_back(pt.visibility.visibility_sigma);
    r.mean_visibility += pt.visibility.visibility;
    r.points.push_back(std::move(pt));
  }
  if (r.points.empty()) throw Error(errc::kDegenerateData, "no storage times given");
  r.mean_visibility /= static_cast<double>(r.points.size());
  if (r.points.size() >= 3) {
    const auto line = weighted_line(x, v, s);
    r.slope_per_us = line.slope;
    r.slope_sigma = line.slope_sigma;
    r.slope_consistent_with_zero = std::abs(line.slope) <= 1.96 * line.slope_sigma;
  }
  return r;
}

MultimodeResult exp_multimode(const MultimodeParams& p, unsigned workers) {
  if (p.n_modes < 1 || p.series_max_modes < 1) throw Error(errc::kDomain, "mode counts must be >= 1");
  auto sequence = [&](const CombSpec& comb, int n) {
    StorageSequence s;
    s.comb = comb;
    s.material = p.material;
    s.window_us = p.window_us;
    for (int j = 0; j < n; ++j) {
      Pulse b;
      b.width_us = p.bin_fwhm_us;
      b.arrival_us = j * p.bin_spacing_us;
      s.bins.push_back(b);
    }
    const double t1 = (n - 1) * p.bin_spacing_us + 1.0;
    const double d = p.control_duration_us;
    s.controls = {{t1 - 0.5 * d, d, p.control_power_mw, 0.0, ControlRole::transfer_in},
                  {t1 + p.ts_us - 0.5 * d, d, p.control_power_mw, 0.0, ControlRole::readout}};
    return s;
  };

  MultimodeResult r;
  CombSpec comb;
  comb.delta_mhz = p.delta_mhz;
  comb.tooth_fwhm_mhz = p.tooth_fwhm_mhz;
  comb.num_teeth = p.num_teeth;
  comb.peak_depth = p.peak_depth;
  comb.background_depth = p.background_depth;
  const auto seq = sequence(comb, p.n_modes);
  const StorageSimulator sim(seq);
  const auto c = sim.coefficients(0);
  r.output = sim.trace(c);
  r.reference_area = input_window_area(sim.grid(), seq.bins[0], p.window_us);
  const double w = p.window_us;
  const auto n = static_cast<std::size_t>(p.n_modes);
  // Windows follow the observed echo peaks: at low finesse with a tooth on
  // the carrier the retrieved pulses come out measurably early.
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<cplx> only(c.size(), cplx{});
    only[sim.echo_component(j, 0)] = cplx{1.0, 0.0};
    const double te = sim.emission_time(j, 0);
    r.mode_times_us.push_back(locate_peak(sim.trace(only), te - 0.5 * p.bin_spacing_us, te + 0.5 * p.bin_spacing_us));
  }
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t k = sim.echo_component(j, 0);
    const double scale = std::norm(c[k]);
    const double own = scale * sim.component_area(k, r.mode_times_us[j], w);
    double leak = 0.0;
    if (j > 0) leak = std::max(leak, scale * sim.component_area(k, r.mode_times_us[j - 1], w));
    if (j + 1 < n) leak = std::max(leak, scale * sim.component_area(k, r.mode_times_us[j + 1], w));
    r.mode_areas.push_back(own);
    r.crosstalk.push_back(own > 0.0 ? leak / own : 0.0);
  }
  // The total trace also carries the residual two-level echo orders, which
  // fall on the mode windows when T_S = tau; the gaps are measured on the
  // retrieved (three-level) field alone.
  std::vector<cplx> retrieved(c.size(), cplx{});
  for (std::size_t j = 0; j < n; ++j) retrieved[sim.echo_component(j, 0)] = c[sim.echo_component(j, 0)];
  const auto spin_out = sim.trace(retrieved);
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const double mid = 0.5 * (r.mode_times_us[j] + r.mode_times_us[j + 1]);
    r.gap_areas.push_back(window_area(spin_out, mid - 0.5 * w, mid + 0.5 * w));
  }

  const auto count = static_cast<std::size_t>(p.series_max_modes);
  r.series_modes.resize(count);
  r.series_efficiency.resize(count);
  parallel_for(count, workers, [&](std::size_t i) {
    const int modes = static_cast<int>(i) + 1;
    MultimodeRequest req;
    req.bandwidth_mhz = p.series_bandwidth_mhz;
    req.min_tooth_fwhm_mhz = p.tooth_fwhm_mhz;
    req.mode_duration_us = p.bin_spacing_us;
    req.control_duration_us = 2.0;
    req.n_modes = modes;
    req.peak_depth = p.peak_depth;
    req.background_depth = p.background_depth;
    const auto design = plan_multimode(req);
    const auto s = sequence(design.comb, modes);
    const StorageSimulator sm(s);
    const auto cc = sm.coefficients(0);
    const double ref = input_window_area(sm.grid(), s.bins[0], w);
    double total = 0.0;
    for (int j = 0; j < modes; ++j) {
      const std::size_t k = sm.echo_component(static_cast<std::size_t>(j), 0);
      total += std::norm(cc[k]) * sm.component_area(k, sm.emission_time(static_cast<std::size_t>(j), 0), w);
    }
    r.series_modes[i] = modes;
    r.series_efficiency[i] = total / (modes * ref);
  });

  if (p.poisson) {
    Pulse one = seq.bins[0];
    r.histogram = poisson_sample(r.output, p.photons_per_pulse, p.attenuation_od, p.poisson_trials,
                                 derive_seed(p.seed, "photons"), one.energy(), workers);
  }
  return r;
}

const std::vector<std::string>& experiment_presets() {
  static const std::vector<std::string> names{"fig2a", "fig2b", "fig3", "fig4", "fig5"};
  return names;
}

json to_json(const FitReport& fit) {
  json est = json::object();
  for (const auto& name : fit.names) est[name] = estimate_json(fit.estimates.at(name));
  for (const auto& [name, e] : fit.estimates)
    if (!est.contains(name)) est[name] = estimate_json(e);
  json cov = json::array();
  for (Eigen::Index i = 0; i < fit.covariance.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < fit.covariance.cols(); ++j) row.push_back(fit.covariance(i, j));
    cov.push_back(row);
  }
  return {{"parameters", fit.names}, {"estimates", est},          {"covariance", cov},
          {"residual_norm", fit.residual_norm}, {"dof", fit.dof}, {"iterations", fit.iterations},
          {"converged", fit.converged},         {"at_boundary", fit.at_boundary},
          {"degenerate", fit.degenerate}};
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const auto& names = experiment_presets();
  if (std::find(names.begin(), names.end(), cfg.preset) == names.end())
    throw Error(errc::kDomain, "unknown preset '" + cfg.preset + "'");
  cfg.material.validate();

  ExperimentResult res;
  res.preset = cfg.preset;
  json& rep = res.report;
  rep["preset"] = cfg.preset;
  rep["seed"] = cfg.seed;
  rep["units"] = {{"frequency", "MHz"}, {"time", "us"}, {"power", "mW"}};
  rep["inputs"]["material"] = to_json(cfg.material);
  json& est = rep["estimates"];

  if (cfg.preset == "fig2a") {
    TwoLevelParams p;
    const auto r = exp_two_level_afc(p);
    rep["inputs"]["comb"] = to_json(p.comb);
    rep["inputs"]["pulse_fwhm_us"] = p.pulse_fwhm_us;
    rep["inputs"]["window_us"] = p.window_us;
    est["efficiency"] = r.efficiency;
    est["transmitted_fraction"] = r.transmitted;
    est["echo_delay_us"] = r.echo_time_us;
    est["storage_time_us"] = p.comb.storage_time_us();
    est["predicted_efficiency"] = r.predicted_efficiency;

    auto seq = single_bin_sequence(p.comb, cfg.material, p.pulse_fwhm_us, 1.0, 0.8, cfg.material.power_ref_mw,
                                   cfg.material.power_ref_mw, 4.0, p.window_us);
    const StorageSimulator sim(seq);
    const auto c = sim.coefficients(0);
    const std::size_t k = sim.echo_component(0, 0);
    const double a_in = input_window_area(sim.grid(), seq.bins[0], p.window_us);
    est["three_level_efficiency"] = std::norm(c[k]) * sim.component_area(k, sim.emission_time(0, 0), p.window_us) / a_in;
    est["three_level_time_us"] = sim.emission_time(0, 0);
    res.tables.push_back(trace_table(r.reference, "reference_trace"));
    res.tables.push_back(trace_table(r.output, "afc_trace"));
    res.tables.push_back(trace_table(sim.trace(c), "spinwave_trace"));
  } else if (cfg.preset == "fig2b") {
    DecayParams p;
    p.material = cfg.material;
    const auto r = exp_spinwave_decay(p);
    rep["inputs"]["comb"] = to_json(p.comb);
    rep["inputs"]["ts_us"] = p.ts_us;
    rep["inputs"]["control_power_mw"] = p.control_power_mw;
    rep["inputs"]["relative_sigma"] = p.relative_sigma;
    est["fit"] = to_json(r.fit);
    est["efficiency_t0"] = r.efficiency_t0;
    est["half_decay_time_us"] = spin_half_decay_time(r.fit.at("gamma_is_mhz").value);
    Table t{"decay", {"ts_us", "efficiency", "amplitude_efficiency", "fit_efficiency"}, {}};
    const double eta0 = r.fit.at("eta0").value, g = r.fit.at("gamma_is_mhz").value;
    for (std::size_t i = 0; i < r.ts_us.size(); ++i)
      t.rows.push_back({r.ts_us[i], r.efficiency[i], r.amplitude_efficiency[i],
                        eta0 * spin_decay_factor(g, r.ts_us[i])});
    res.tables.push_back(std::move(t));
  } else if (cfg.preset == "fig3") {
    RabiParams p;
    p.material = cfg.material;
    const auto r = exp_rabi_sweep(p);
    rep["inputs"]["comb"] = to_json(p.comb);
    rep["inputs"]["ts_us"] = p.ts_us;
    rep["inputs"]["control_duration_us"] = p.control_duration_us;
    est["fit"] = to_json(r.fit);
    est["eta_afc"] = r.eta_afc;
    est["input_area"] = r.input_area;
    est["spin_factor"] = r.spin_factor;
    const double rabi = r.fit.at("rabi_mhz").value;
    est["transfer_efficiency_at_max_power"] =
        transfer_efficiency(2.0 * std::numbers::pi * rabi * std::sqrt(p.max_power_mw / p.material.power_ref_mw) *
                            p.control_duration_us);
    Table t{"rabi", {"power_mw", "sqrt_power", "afc_area", "tle_efficiency"}, {}};
    for (std::size_t i = 0; i < r.powers_mw.size(); ++i)
      t.rows.push_back({r.powers_mw[i], std::sqrt(r.powers_mw[i]), r.afc_area[i], r.tle_efficiency[i]});
    res.tables.push_back(std::move(t));
  } else if (cfg.preset == "fig4") {
    TimebinParams p;
    p.material = cfg.material;
    if (cfg.linewidth_mhz) p.linewidth_mhz = *cfg.linewidth_mhz;
    if (cfg.trials_per_phase) p.trials_per_phase = *cfg.trials_per_phase;
    p.seed = derive_seed(cfg.seed, "fig4");
    const auto r = exp_timebin(p, cfg.workers);
    rep["inputs"]["linewidth_mhz"] = p.linewidth_mhz;
    rep["inputs"]["ts_us"] = p.ts_us;
    rep["inputs"]["num_phases"] = p.num_phases;
    rep["inputs"]["trials_per_phase"] = p.trials_per_phase;
    rep["seeds"]["fig4"] = p.seed;
    est["mean_visibility"] = r.mean_visibility;
    est["slope_per_us"] = {{"value", r.slope_per_us}, {"sigma", r.slope_sigma}};
    est["slope_consistent_with_zero"] = r.slope_consistent_with_zero;
    Table vis{"visibility", {"ts_us", "visibility", "visibility_sigma", "mean_area"}, {}};
    json points = json::array();
    for (const auto& pt : r.points) {
      vis.rows.push_back({pt.ts_us, pt.visibility.visibility, pt.visibility.visibility_sigma, pt.mean_area});
      points.push_back({{"ts_us", pt.ts_us}, {"fit", to_json(pt.visibility.fit)}});
      Table f{"fringe_ts" + std::to_string(static_cast<long>(std::lround(pt.ts_us))), {"phase_rad", "mean_area", "sem"}, {}};
      for (const auto& fp : pt.visibility.fringe) f.rows.push_back({fp.phase_rad, fp.mean_area, fp.sem});
      res.tables.push_back(std::move(f));
    }
    est["points"] = points;
    res.tables.insert(res.tables.begin(), std::move(vis));
  } else {
    MultimodeParams p;
    p.material = cfg.material;
    p.poisson = cfg.poisson;
    p.seed = derive_seed(cfg.seed, "fig5");
    const auto r = exp_multimode(p, cfg.workers);
    rep["inputs"]["n_modes"] = p.n_modes;
    rep["inputs"]["delta_mhz"] = p.delta_mhz;
    rep["inputs"]["num_teeth"] = p.num_teeth;
    rep["inputs"]["tooth_fwhm_mhz"] = p.tooth_fwhm_mhz;
    rep["inputs"]["ts_us"] = p.ts_us;
    rep["inputs"]["poisson"] = p.poisson;
    rep["seeds"]["fig5"] = p.seed;
    est["mode_times_us"] = r.mode_times_us;
    est["mode_areas"] = r.mode_areas;
    est["crosstalk"] = r.crosstalk;
    est["gap_areas"] = r.gap_areas;
    est["reference_area"] = r.reference_area;
    est["series_modes"] = r.series_modes;
    est["series_efficiency"] = r.series_efficiency;
    res.tables.push_back(trace_table(r.output, "output_trace"));
    Table modes{"modes", {"mode", "time_us", "area", "efficiency", "crosstalk"}, {}};
    for (std::size_t j = 0; j < r.mode_areas.size(); ++j)
      modes.rows.push_back({static_cast<double>(j), r.mode_times_us[j], r.mode_areas[j],
                            r.mode_areas[j] / r.reference_area, r.crosstalk[j]});
    res.tables.push_back(std::move(modes));
    Table series{"series", {"n_modes", "storage_time_us", "efficiency"}, {}};
    for (std::size_t i = 0; i < r.series_modes.size(); ++i)
      series.rows.push_back({static_cast<double>(r.series_modes[i]), 2.0 + r.series_modes[i], r.series_efficiency[i]});
    res.tables.push_back(std::move(series));
    if (r.histogram) {
      est["expected_counts_per_trial"] = r.histogram->expected_total_per_trial;
      res.tables.push_back(histogram_table(*r.histogram, "histogram"));
    }
  }
  return res;
}

}  // namespace afc
