// afcmem: command-line front end for the AFC memory simulator.

#include "afc/error.hpp"
#include "afc/experiments.hpp"
#include "afc/fit.hpp"
#include "afc/inference.hpp"
#include "afc/io.hpp"
#include "afc/prep.hpp"
#include "afc/propagation.hpp"
#include "afc/spectral.hpp"
#include "afc/spinwave.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

using afc::json;
namespace fs = std::filesystem;

struct Globals {
  std::string config;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
};

afc::RunConfig load(const Globals& g) {
  afc::RunConfig cfg = g.config.empty() ? afc::default_run_config() : afc::load_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  if (g.workers) cfg.workers = *g.workers;
  return cfg;
}

fs::path out_dir(const Globals& g, const afc::RunConfig& cfg, const std::string& label) {
  return afc::resolve_output_dir(cfg, g.output_dir) / label;
}

std::size_t column(const afc::Table& t, std::initializer_list<const char*> names, std::size_t fallback) {
  for (const char* n : names)
    for (std::size_t c = 0; c < t.columns.size(); ++c)
      if (t.columns[c] == n) return c;
  if (fallback >= t.columns.size())
    throw afc::Error(afc::errc::kParse, t.name + ": missing column " + std::string(*names.begin()));
  return fallback;
}

std::vector<double> values(const afc::Table& t, std::size_t c) {
  std::vector<double> out;
  for (const auto& r : t.rows) out.push_back(r[c]);
  return out;
}

void print_fit(const afc::FitReport& fit) {
  for (const auto& name : fit.names) {
    const auto& e = fit.estimates.at(name);
    std::printf("%s = %.6g +- %.3g\n", name.c_str(), e.value, e.sigma);
  }
  for (const auto& [name, e] : fit.estimates)
    if (std::find(fit.names.begin(), fit.names.end(), name) == fit.names.end())
      std::printf("%s = %.6g +- %.3g\n", name.c_str(), e.value, e.sigma);
  if (fit.at_boundary) std::printf("at_boundary = true\n");
}

afc::OpticalDepthProfile config_profile(const afc::RunConfig& cfg, afc::PrepResult* prep_out = nullptr) {
  if (cfg.comb) {
    const auto grid = afc::grid_for_comb(*cfg.comb, cfg.span_factor);
    return afc::build_comb_profile(*cfg.comb, grid);
  }
  const auto& p = *cfg.prep;
  const auto table = cfg.transition_table();
  const double half = 0.5 * p.probe.span_mhz;
  auto ens = afc::ensemble_for_window(p.probe.center_mhz - half, p.probe.center_mhz + half, table, p.class_step_mhz);
  auto res = afc::run_preparation(ens, p.sequence, table, cfg.material.branching);
  auto profile = afc::absorption_spectrum(res.ensemble, table, cfg.material.d_full(), p.probe);
  if (prep_out) *prep_out = std::move(res);
  return profile;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"afcmem: atomic frequency comb memory simulator (units: MHz, us, mW)"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Run configuration (JSON); defaults otherwise")->check(CLI::ExistingFile);
  app.add_option("--output-dir", g.output_dir, "Output root (else config output_dir, AFC_OUTPUT_DIR, ./afcmem-out)");
  app.add_option("--seed", g.seed, "Master seed (overrides the config)");
  app.add_option("--workers", g.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.fallthrough();

  // comb
  auto* comb = app.add_subcommand("comb", "Comb geometry, efficiency model, inference and design");
  comb->require_subcommand(1);

  auto* build = comb->add_subcommand("build", "Write the optical-depth profile of a comb");
  std::optional<double> b_delta, b_fwhm, b_d, b_d0;
  std::optional<int> b_teeth;
  build->add_option("--delta", b_delta, "Tooth spacing (MHz)");
  build->add_option("--fwhm", b_fwhm, "Tooth FWHM (MHz)");
  build->add_option("--teeth", b_teeth, "Number of teeth");
  build->add_option("--d", b_d, "Peak optical depth above background");
  build->add_option("--d0", b_d0, "Background optical depth");

  auto* eff = comb->add_subcommand("efficiency", "Closed-form forward AFC echo efficiency");
  double e_d = 0, e_f = 0, e_d0 = 0;
  eff->add_option("--d", e_d, "Peak optical depth")->required();
  eff->add_option("--finesse", e_f, "Finesse delta / tooth FWHM")->required();
  eff->add_option("--d0", e_d0, "Background optical depth")->required();

  auto* infer = comb->add_subcommand("infer", "Infer (d, d0) from transmission and echo efficiency");
  double i_t = 0, i_eta = 0, i_f = 0;
  afc::ObservableSetup i_setup;
  infer->add_option("--transmission", i_t, "Transmitted fraction")->required();
  infer->add_option("--echo", i_eta, "Echo efficiency")->required();
  infer->add_option("--finesse", i_f, "Comb finesse")->required();
  infer->add_option("--delta", i_setup.delta_mhz, "Tooth spacing (MHz)")->capture_default_str();
  infer->add_option("--teeth", i_setup.num_teeth, "Number of teeth")->capture_default_str();
  infer->add_option("--pulse-fwhm", i_setup.pulse_fwhm_us, "Input pulse FWHM (us)")->capture_default_str();
  infer->add_option("--window", i_setup.window_us, "Detection window (us)")->capture_default_str();

  auto* opt = comb->add_subcommand("optimize", "Finesse maximizing the closed-form efficiency");
  double o_d = 0, o_d0 = 0, o_lo = 1.0, o_hi = 20.0;
  opt->add_option("--d", o_d, "Peak optical depth")->required();
  opt->add_option("--d0", o_d0, "Background optical depth")->required();
  opt->add_option("--lo", o_lo, "Lower finesse bound")->capture_default_str();
  opt->add_option("--hi", o_hi, "Upper finesse bound")->capture_default_str();

  auto* plan = comb->add_subcommand("plan", "Comb design for N temporal modes");
  afc::MultimodeRequest req;
  plan->add_option("--bandwidth", req.bandwidth_mhz, "Available bandwidth (MHz)")->capture_default_str();
  plan->add_option("--min-fwhm", req.min_tooth_fwhm_mhz, "Narrowest achievable tooth (MHz)")->capture_default_str();
  plan->add_option("--mode-duration", req.mode_duration_us, "Duration per mode (us)")->capture_default_str();
  plan->add_option("--control-duration", req.control_duration_us, "Time reserved for controls (us)")->capture_default_str();
  plan->add_option("--modes", req.n_modes, "Number of modes")->capture_default_str();
  plan->add_option("--d", req.peak_depth, "Peak optical depth")->capture_default_str();
  plan->add_option("--d0", req.background_depth, "Background optical depth")->capture_default_str();
  plan->add_option("--transfer", req.transfer_efficiency, "Transfer efficiency per control")->capture_default_str();

  // prepare
  auto* prepare = app.add_subcommand("prepare", "Run the optical-pumping sequence and write the spectrum");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Propagate the configured sequence");
  sim->require_subcommand(1);
  auto* sim_afc = sim->add_subcommand("afc", "Two-level AFC echo of the first configured bin");
  auto* sim_sw = sim->add_subcommand("spinwave", "Full spin-wave storage sequence");

  // experiment
  auto* exp = app.add_subcommand("experiment", "Run a scripted experiment preset");
  std::string preset;
  std::optional<double> x_linewidth;
  std::optional<std::size_t> x_trials;
  bool x_poisson = false;
  exp->add_option("preset", preset, "fig2a | fig2b | fig3 | fig4 | fig5")
      ->required()
      ->check(CLI::IsMember(afc::experiment_presets()));
  exp->add_option("--linewidth", x_linewidth, "fig4: laser linewidth (MHz)");
  exp->add_option("--trials", x_trials, "fig4: trials per phase");
  exp->add_flag("--poisson", x_poisson, "fig5: also write a photon-count histogram");

  // fit
  auto* fit = app.add_subcommand("fit", "Fit measured or simulated data (CSV with a header row)");
  fit->require_subcommand(1);
  std::string f_input;
  double f_rel = 0.01;
  auto* f_decay = fit->add_subcommand("decay", "Gaussian spin decay: columns ts_us, efficiency[, sigma]");
  f_decay->add_option("--input", f_input, "CSV file")->required()->check(CLI::ExistingFile);
  f_decay->add_option("--relative-sigma", f_rel, "Relative error when no sigma column is given")->capture_default_str();
  auto* f_rabi = fit->add_subcommand("rabi", "Rabi curves: columns power_mw, afc_area, tle_efficiency");
  afc::RabiFitSetup rabi_setup;
  f_rabi->add_option("--input", f_input, "CSV file")->required()->check(CLI::ExistingFile);
  f_rabi->add_option("--duration", rabi_setup.duration_us, "Control duration (us)")->capture_default_str();
  f_rabi->add_option("--power-ref", rabi_setup.power_ref_mw, "Reference power (mW)")->capture_default_str();
  f_rabi->add_option("--spin-factor", rabi_setup.spin_factor, "Known spin decay factor")->capture_default_str();
  auto* f_fringe = fit->add_subcommand("fringe", "Interference fringe: columns phase_rad, mean_area, sem");
  f_fringe->add_option("--input", f_input, "CSV file")->required()->check(CLI::ExistingFile);

  // sample-photons
  auto* photons = app.add_subcommand("sample-photons", "Poisson photon-count histogram of a trace CSV");
  std::string p_input;
  double p_photons = 2e4, p_od = 6.5;
  std::size_t p_trials = 500;
  std::optional<double> p_ref;
  photons->add_option("--input", p_input, "Trace CSV (t_us,re,im,...)")->required()->check(CLI::ExistingFile);
  photons->add_option("--photons", p_photons, "Photons per reference pulse")->capture_default_str();
  photons->add_option("--od", p_od, "Attenuation (optical density)")->capture_default_str();
  photons->add_option("--trials", p_trials, "Number of trials")->capture_default_str();
  photons->add_option("--reference-energy", p_ref, "Energy mapped to --photons (default: trace energy)");

  auto* defaults = app.add_subcommand("defaults", "Write the documented default configuration");
  bool d_prep = false;
  defaults->add_flag("--prep", d_prep, "Use the optical-pumping comb source instead of an explicit comb");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "afcmem: usage error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    const afc::RunConfig cfg = load(g);

    if (*comb) {
      if (*eff) {
        std::printf("%.4f\n", afc::afc_echo_efficiency(e_d, e_f, e_d0));
      } else if (*infer) {
        const auto r = afc::infer_comb_params(i_t, i_eta, i_f, i_setup);
        std::printf("d = %.6g\nd0 = %.6g\nevaluations = %d\n", r.d, r.d0, r.evaluations);
      } else if (*opt) {
        const auto r = afc::optimize_finesse(o_d, o_d0, o_lo, o_hi);
        std::printf("finesse = %.6g\nefficiency = %.6g\n", r.finesse, r.efficiency);
      } else if (*plan) {
        const auto d = afc::plan_multimode(req);
        json j{{"comb", afc::to_json(d.comb)},
               {"storage_time_us", d.comb.storage_time_us()},
               {"predicted_afc_efficiency", d.predicted_afc_efficiency},
               {"predicted_3le_efficiency", d.predicted_3le_efficiency},
               {"mode_capacity", d.mode_capacity}};
        std::cout << afc::dump_json(j);
      } else {
        afc::CombSpec c = cfg.comb.value_or(*afc::default_run_config().comb);
        if (b_delta) c.delta_mhz = *b_delta;
        if (b_fwhm) c.tooth_fwhm_mhz = *b_fwhm;
        if (b_teeth) c.num_teeth = *b_teeth;
        if (b_d) c.peak_depth = *b_d;
        if (b_d0) c.background_depth = *b_d0;
        const auto grid = afc::grid_for_comb(c, cfg.span_factor);
        const auto profile = afc::build_comb_profile(c, grid);
        const auto dir = out_dir(g, cfg, "comb");
        afc::write_table(dir, afc::profile_table(profile, "profile"));
        json j{{"comb", afc::to_json(c)},
               {"grid", afc::to_json(grid)},
               {"finesse", c.finesse()},
               {"storage_time_us", c.storage_time_us()},
               {"predicted_efficiency", afc::afc_echo_efficiency(c.peak_depth, c.finesse(), c.background_depth)}};
        afc::write_json(dir / "report.json", j);
        std::printf("finesse = %.6g\nstorage_time_us = %.6g\nwrote %s\n", c.finesse(), c.storage_time_us(),
                    dir.string().c_str());
      }
    } else if (*prepare) {
      afc::RunConfig pc = cfg;
      if (!pc.prep) pc.prep = afc::default_prep_config(*pc.comb, pc.material);
      pc.comb.reset();
      afc::PrepResult res;
      const auto profile = config_profile(pc, &res);
      const auto dir = out_dir(g, cfg, "prepare");
      afc::write_table(dir, afc::profile_table(profile, "profile"));
      afc::write_table(dir, afc::population_table(res.ensemble, "populations"));
      json stages = json::array();
      for (const auto& s : res.stages) stages.push_back(s.name);
      json j{{"config", afc::to_json(pc)},
             {"stages", stages},
             {"d_full", pc.material.d_full()},
             {"total_pulse_time_us", pc.prep->sequence.total_pulse_time_us()}};
      afc::write_json(dir / "report.json", j);
      std::printf("stages = %zu\nwrote %s\n", res.stages.size(), dir.string().c_str());
    } else if (*sim_afc) {
      const auto profile = config_profile(cfg);
      const auto tf = afc::transfer_function_from_depth(profile);
      afc::Pulse pulse = cfg.sequence.bins.empty() ? afc::Pulse{} : cfg.sequence.bins.front();
      auto grid = afc::time_grid_for(profile.grid, 0.0);
      grid.start_us = pulse.arrival_us - std::floor(0.25 * grid.duration_us / grid.dt()) * grid.dt();
      const auto input = afc::make_trace(grid, pulse);
      const auto output = afc::propagate(input, tf);
      const double w = cfg.sequence.window_us;
      const double t0 = pulse.arrival_us;
      const double tau = cfg.comb ? cfg.comb->storage_time_us() : -1.0;
      double echo_t = tau > 0.0 ? t0 + tau : afc::locate_peak(output, t0 + 2.0 * w, t0 + 0.5 * grid.duration_us);
      const std::vector<double> times{t0, echo_t};
      const auto ref = afc::detect_echoes(input, std::span<const double>(times.data(), 1), w);
      const auto out = afc::detect_echoes(output, times, w);
      const double echo_peak = afc::locate_peak(output, echo_t - w, echo_t + w);
      const double trans_peak = afc::locate_peak(output, t0 - w, t0 + w);
      const auto dir = out_dir(g, cfg, "simulate-afc");
      afc::write_table(dir, afc::trace_table(input, "input_trace"));
      afc::write_table(dir, afc::trace_table(output, "output_trace"));
      json j{{"config", afc::to_json(cfg)},
             {"transmitted_fraction", afc::echo_efficiency(out, ref, 0)},
             {"echo_efficiency", afc::echo_efficiency(out, ref, 1)},
             {"echo_delay_us", echo_peak - trans_peak}};
      afc::write_json(dir / "report.json", j);
      std::printf("echo_efficiency = %.6g\necho_delay_us = %.6g\nwrote %s\n", j["echo_efficiency"].get<double>(),
                  j["echo_delay_us"].get<double>(), dir.string().c_str());
    } else if (*sim_sw) {
      const auto seq = cfg.storage_sequence();
      const auto res = afc::run_storage_sequence(seq);
      const auto dir = out_dir(g, cfg, "simulate-spinwave");
      afc::write_table(dir, afc::trace_table(res.trace, "output_trace"));
      json emissions = json::array();
      for (const auto& e : res.ledger.emissions)
        emissions.push_back({{"bin", e.bin}, {"readout", e.readout}, {"time_us", e.time_us}, {"energy", e.energy}});
      json modes = json::array();
      for (const auto& m : res.ledger.modes)
        modes.push_back({{"bin", m.bin},
                         {"input_energy", m.input_energy},
                         {"absorbed_energy", m.absorbed_energy},
                         {"echo_energy", m.echo_energy},
                         {"stored_energy", m.stored_energy},
                         {"residual_energy", m.residual_energy}});
      json windows = json::array();
      for (const auto& w : res.ledger.windows)
        windows.push_back({{"center_us", w.center_us}, {"width_us", w.width_us}, {"area", w.area}, {"peak", w.peak}});
      json j{{"config", afc::to_json(cfg)}, {"modes", modes}, {"emissions", emissions}, {"windows", windows}};
      afc::write_json(dir / "report.json", j);
      std::printf("emissions = %zu\nwrote %s\n", res.ledger.emissions.size(), dir.string().c_str());
    } else if (*exp) {
      afc::ExperimentConfig ec;
      ec.preset = preset;
      ec.seed = cfg.seed;
      ec.workers = cfg.workers;
      ec.material = cfg.material;
      ec.linewidth_mhz = x_linewidth;
      ec.trials_per_phase = x_trials;
      ec.poisson = x_poisson;
      const auto res = afc::run_experiment(ec);
      const auto dir = out_dir(g, cfg, "experiment-" + preset + "-seed" + std::to_string(cfg.seed));
      for (const auto& t : res.tables) afc::write_table(dir, t);
      afc::write_json(dir / "report.json", res.report);
      std::printf("wrote %s\n", dir.string().c_str());
    } else if (*fit) {
      const auto t = afc::read_csv(f_input);
      afc::FitReport r;
      std::string label;
      if (*f_decay) {
        label = "fit-decay";
        const auto ts = values(t, column(t, {"ts_us"}, 0));
        const auto eta = values(t, column(t, {"efficiency", "eta"}, 1));
        std::vector<double> sig;
        if (std::find(t.columns.begin(), t.columns.end(), "sigma") != t.columns.end())
          sig = values(t, column(t, {"sigma"}, 0));
        else
          for (double e : eta) sig.push_back(f_rel * std::abs(e));
        r = afc::fit_gaussian_decay(ts, eta, sig);
      } else if (*f_rabi) {
        label = "fit-rabi";
        r = afc::fit_rabi(values(t, column(t, {"power_mw"}, 0)), values(t, column(t, {"afc_area"}, 1)),
                          values(t, column(t, {"tle_efficiency", "eta_3le"}, 2)), rabi_setup);
      } else {
        label = "fit-fringe";
        r = afc::fit_fringe(values(t, column(t, {"phase_rad"}, 0)), values(t, column(t, {"mean_area", "area"}, 1)),
                            values(t, column(t, {"sem", "sigma"}, 2)));
      }
      print_fit(r);
      json j{{"input", f_input}, {"fit", afc::to_json(r)}};
      afc::write_json(out_dir(g, cfg, label) / "report.json", j);
    } else if (*photons) {
      const auto trace = afc::trace_from_table(afc::read_csv(p_input));
      const auto h =
          afc::poisson_sample(trace, p_photons, p_od, p_trials, afc::derive_seed(cfg.seed, "photons"), p_ref,
                              cfg.workers);
      const auto dir = out_dir(g, cfg, "sample-photons-seed" + std::to_string(cfg.seed));
      afc::write_table(dir, afc::histogram_table(h, "histogram"));
      json j{{"input", p_input},
             {"photons_per_pulse", p_photons},
             {"attenuation_od", p_od},
             {"trials", p_trials},
             {"seed", cfg.seed},
             {"expected_total_per_trial", h.expected_total_per_trial}};
      afc::write_json(dir / "report.json", j);
      std::printf("expected_total_per_trial = %.6g\nwrote %s\n", h.expected_total_per_trial, dir.string().c_str());
    } else if (*defaults) {
      afc::RunConfig d = afc::default_run_config();
      if (d_prep) {
        d.prep = afc::default_prep_config(*d.comb, d.material);
        d.comb.reset();
      }
      const auto file = afc::resolve_output_dir(cfg, g.output_dir) / (d_prep ? "defaults-prep.json" : "defaults.json");
      afc::save_config(d, file);
      std::printf("wrote %s\n", file.string().c_str());
    }
  } catch (const afc::Error& e) {
    std::cerr << "afcmem: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "afcmem: " << afc::errc::kIo << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
