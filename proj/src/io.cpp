#include "afc/io.hpp"

#include "afc/error.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

namespace afc {
namespace {

[[noreturn]] void invalid(const std::string& path, const std::string& what) {
  throw Error(errc::kValidation, path + ": " + what);
}

enum class Bound { any, nonneg, positive };

// Field reader for one JSON object; rejects keys outside `allowed`.
class Obj {
 public:
  Obj(const json& j, std::string path, std::initializer_list<const char*> allowed) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) invalid(path_, "expected an object");
    std::set<std::string> keys(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!keys.count(it.key())) invalid(key_path(it.key()), "unknown key");
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const json& at(const char* key) const { return j_.at(key); }

  double num(const char* key, double def, Bound b = Bound::any) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number()) invalid(key_path(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) invalid(key_path(key), "must be finite");
    if (b == Bound::nonneg && x < 0.0) invalid(key_path(key), "must be >= 0");
    if (b == Bound::positive && !(x > 0.0)) invalid(key_path(key), "must be positive");
    return x;
  }

  long long integer(const char* key, long long def, long long min_value) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) invalid(key_path(key), "expected an integer");
    const auto x = v.get<long long>();
    if (x < min_value) invalid(key_path(key), "must be >= " + std::to_string(min_value));
    return x;
  }

  std::uint64_t u64(const char* key, std::uint64_t def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
    invalid(key_path(key), "expected a non-negative integer");
  }

  bool boolean(const char* key, bool def) const {
    if (!has(key)) return def;
    if (!j_.at(key).is_boolean()) invalid(key_path(key), "expected true or false");
    return j_.at(key).get<bool>();
  }

  std::string str(const char* key, const std::string& def) const {
    if (!has(key)) return def;
    if (!j_.at(key).is_string()) invalid(key_path(key), "expected a string");
    return j_.at(key).get<std::string>();
  }

  template <std::size_t N>
  std::array<double, N> numbers(const char* key, std::array<double, N> def, Bound b) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_array() || v.size() != N) invalid(key_path(key), "expected " + std::to_string(N) + " numbers");
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) {
      if (!v[i].is_number()) invalid(key_path(key), "expected numbers");
      out[i] = v[i].get<double>();
      if (!std::isfinite(out[i]) || (b == Bound::nonneg && out[i] < 0.0) || (b == Bound::positive && !(out[i] > 0.0)))
        invalid(key_path(key), b == Bound::positive ? "entries must be positive" : "entries out of range");
    }
    return out;
  }

  std::array<std::array<double, 3>, 3> matrix3(const char* key, std::array<std::array<double, 3>, 3> def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_array() || v.size() != 3) invalid(key_path(key), "expected a 3x3 array");
    std::array<std::array<double, 3>, 3> out{};
    for (std::size_t r = 0; r < 3; ++r) {
      if (!v[r].is_array() || v[r].size() != 3) invalid(key_path(key), "expected a 3x3 array");
      for (std::size_t c = 0; c < 3; ++c) {
        if (!v[r][c].is_number()) invalid(key_path(key), "expected numbers");
        out[r][c] = v[r][c].get<double>();
        if (!std::isfinite(out[r][c]) || out[r][c] < 0.0) invalid(key_path(key), "entries must be >= 0");
      }
    }
    return out;
  }

 private:
  const json& j_;
  std::string path_;
};

// Re-labels a domain error from a struct's own validate() with the key path.
template <typename F>
void checked(const std::string& path, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    invalid(path, e.what());
  }
}

std::string shape_name(PulseShape s) { return s == PulseShape::gaussian ? "gaussian" : "square"; }
std::string role_name(ControlRole r) { return r == ControlRole::transfer_in ? "transfer_in" : "readout"; }
std::string target_name(NoiseTarget t) {
  switch (t) {
    case NoiseTarget::inputs: return "inputs";
    case NoiseTarget::controls: return "controls";
    default: return "both";
  }
}
std::string line_name(LineShape s) { return s == LineShape::top_hat ? "top_hat" : "lorentzian"; }

json matrix_json(const std::array<std::array<double, 3>, 3>& m) {
  json out = json::array();
  for (const auto& row : m) out.push_back(json(row));
  return out;
}

json to_json(const Excitation& e) {
  return {{"bandwidth_mhz", e.bandwidth_mhz},
          {"rate_per_us", e.rate_per_us},
          {"shape", line_name(e.shape)},
          {"cutoff_mhz", e.cutoff_mhz}};
}

json to_json(const SweepStage& s) {
  return {{"center_mhz", s.center_mhz}, {"span_mhz", s.span_mhz}, {"repeats", s.repeats},
          {"pass_us", s.pass_us},       {"step_mhz", s.step_mhz}, {"laser", to_json(s.laser)}};
}

Pulse pulse_from_json(const json& j, const std::string& path) {
  Obj o(j, path, {"shape", "width_us", "arrival_us", "carrier_detuning_mhz", "phase_rad", "amplitude"});
  Pulse p;
  const std::string shape = o.str("shape", "gaussian");
  if (shape == "gaussian")
    p.shape = PulseShape::gaussian;
  else if (shape == "square")
    p.shape = PulseShape::square;
  else
    invalid(o.key_path("shape"), "expected \"gaussian\" or \"square\"");
  p.width_us = o.num("width_us", p.width_us, Bound::positive);
  p.arrival_us = o.num("arrival_us", p.arrival_us);
  p.carrier_detuning_mhz = o.num("carrier_detuning_mhz", p.carrier_detuning_mhz);
  p.phase_rad = o.num("phase_rad", p.phase_rad);
  p.amplitude = o.num("amplitude", p.amplitude, Bound::nonneg);
  checked(path, [&] { p.validate(); });
  return p;
}

ControlPulse control_from_json(const json& j, const std::string& path) {
  Obj o(j, path, {"start_us", "duration_us", "power_mw", "phase_rad", "role"});
  ControlPulse c;
  c.start_us = o.num("start_us", c.start_us);
  c.duration_us = o.num("duration_us", c.duration_us, Bound::positive);
  c.power_mw = o.num("power_mw", c.power_mw, Bound::nonneg);
  c.phase_rad = o.num("phase_rad", c.phase_rad);
  const std::string role = o.str("role", "readout");
  if (role == "transfer_in")
    c.role = ControlRole::transfer_in;
  else if (role == "readout")
    c.role = ControlRole::readout;
  else
    invalid(o.key_path("role"), "expected \"transfer_in\" or \"readout\"");
  return c;
}

Excitation excitation_from_json(const json& j, const std::string& path) {
  Obj o(j, path, {"bandwidth_mhz", "rate_per_us", "shape", "cutoff_mhz"});
  Excitation e;
  e.bandwidth_mhz = o.num("bandwidth_mhz", e.bandwidth_mhz, Bound::positive);
  e.rate_per_us = o.num("rate_per_us", e.rate_per_us, Bound::nonneg);
  const std::string shape = o.str("shape", "top_hat");
  if (shape == "top_hat")
    e.shape = LineShape::top_hat;
  else if (shape == "lorentzian")
    e.shape = LineShape::lorentzian;
  else
    invalid(o.key_path("shape"), "expected \"top_hat\" or \"lorentzian\"");
  e.cutoff_mhz = o.num("cutoff_mhz", e.cutoff_mhz, Bound::nonneg);
  checked(path, [&] { e.validate(); });
  return e;
}

SweepStage sweep_from_json(const json& j, const std::string& path) {
  Obj o(j, path, {"center_mhz", "span_mhz", "repeats", "pass_us", "step_mhz", "laser"});
  SweepStage s;
  s.center_mhz = o.num("center_mhz", s.center_mhz);
  s.span_mhz = o.num("span_mhz", s.span_mhz, Bound::positive);
  s.repeats = static_cast<int>(o.integer("repeats", s.repeats, 0));
  s.pass_us = o.num("pass_us", s.pass_us, Bound::positive);
  s.step_mhz = o.num("step_mhz", s.step_mhz, Bound::positive);
  if (o.has("laser")) s.laser = excitation_from_json(o.at("laser"), o.key_path("laser"));
  return s;
}

SpectralGrid grid_from_json(const json& j, const std::string& path) {
  Obj o(j, path, {"center_mhz", "span_mhz", "num_points"});
  SpectralGrid g;
  g.center_mhz = o.num("center_mhz", 0.0);
  g.span_mhz = o.num("span_mhz", 10.24, Bound::positive);
  g.num_points = static_cast<std::size_t>(o.integer("num_points", 1024, 2));
  checked(o.key_path("num_points"), [&] { g.validate(); });
  return g;
}

PrepConfig prep_from_json(const json& j, const std::string& path, const CombSpec* comb_hint,
                          const MaterialParams& material) {
  Obj o(j, path, {"pit", "burn_back", "clean", "t_prep_us", "t_w_us", "strengths", "probe", "class_step_mhz"});
  PrepConfig p;
  if (comb_hint) p = default_prep_config(*comb_hint, material);
  if (j.contains("pit")) p.sequence.pit = o.has("pit") ? std::optional(sweep_from_json(o.at("pit"), o.key_path("pit")))
                                                       : std::nullopt;
  if (j.contains("clean"))
    p.sequence.clean =
        o.has("clean") ? std::optional(sweep_from_json(o.at("clean"), o.key_path("clean"))) : std::nullopt;
  if (o.has("burn_back")) {
    const std::string bpath = o.key_path("burn_back");
    Obj b(o.at("burn_back"), bpath, {"pulses", "laser"});
    BurnBackStage stage;
    if (b.has("laser")) stage.laser = excitation_from_json(b.at("laser"), b.key_path("laser"));
    if (b.has("pulses")) {
      const json& arr = b.at("pulses");
      if (!arr.is_array()) invalid(b.key_path("pulses"), "expected an array");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string ppath = b.key_path("pulses") + "[" + std::to_string(i) + "]";
        Obj q(arr[i], ppath, {"frequency_mhz", "duration_us", "repeats"});
        BurnBackPulse pulse;
        pulse.frequency_mhz = q.num("frequency_mhz", pulse.frequency_mhz);
        pulse.duration_us = q.num("duration_us", pulse.duration_us, Bound::positive);
        pulse.repeats = static_cast<int>(q.integer("repeats", pulse.repeats, 0));
        stage.pulses.push_back(pulse);
      }
    }
    p.sequence.burn_back = stage;
  }
  p.sequence.t_prep_us = o.num("t_prep_us", p.sequence.t_prep_us, Bound::nonneg);
  p.sequence.t_w_us = o.num("t_w_us", p.sequence.t_w_us, Bound::nonneg);
  p.strengths = o.matrix3("strengths", p.strengths);
  if (o.has("probe")) p.probe = grid_from_json(o.at("probe"), o.key_path("probe"));
  p.class_step_mhz = o.num("class_step_mhz", p.class_step_mhz, Bound::positive);
  checked(path, [&] { p.sequence.validate(); });
  TransitionTable t = transition_table_from(material);
  t.strength = p.strengths;
  checked(o.key_path("strengths"), [&] { t.validate(); });
  return p;
}

SequenceConfig sequence_from_json(const json& j, const std::string& path) {
  Obj o(j, path, {"bins", "controls", "t_w_us", "window_us", "apply_optical_t2", "mc_spins"});
  SequenceConfig s;
  if (o.has("bins")) {
    const json& arr = o.at("bins");
    if (!arr.is_array()) invalid(o.key_path("bins"), "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i)
      s.bins.push_back(pulse_from_json(arr[i], o.key_path("bins") + "[" + std::to_string(i) + "]"));
  }
  if (o.has("controls")) {
    const json& arr = o.at("controls");
    if (!arr.is_array()) invalid(o.key_path("controls"), "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i)
      s.controls.push_back(control_from_json(arr[i], o.key_path("controls") + "[" + std::to_string(i) + "]"));
  }
  s.t_w_us = o.num("t_w_us", s.t_w_us, Bound::nonneg);
  s.window_us = o.num("window_us", s.window_us, Bound::positive);
  s.flags.apply_optical_t2 = o.boolean("apply_optical_t2", false);
  s.flags.mc_spins = static_cast<std::size_t>(o.integer("mc_spins", 0, 0));
  return s;
}

std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

json to_json(const CombSpec& c) {
  return {{"delta_mhz", c.delta_mhz},   {"tooth_fwhm_mhz", c.tooth_fwhm_mhz},     {"num_teeth", c.num_teeth},
          {"peak_depth", c.peak_depth}, {"background_depth", c.background_depth}, {"tooth_shape", "gaussian"}};
}

json to_json(const MaterialParams& m) {
  return {{"ground_splittings_mhz", m.ground_splittings_mhz},
          {"excited_splittings_mhz", m.excited_splittings_mhz},
          {"t1_excited_us", m.t1_excited_us},
          {"t2_excited_us", m.t2_excited_us},
          {"gamma_is_mhz", m.gamma_is_mhz},
          {"alpha_per_cm", m.alpha_per_cm},
          {"length_cm", m.length_cm},
          {"rabi_ref_mhz", m.rabi_ref_mhz},
          {"power_ref_mw", m.power_ref_mw},
          {"branching", matrix_json(m.branching)}};
}

json to_json(const Pulse& p) {
  return {{"shape", shape_name(p.shape)},
          {"width_us", p.width_us},
          {"arrival_us", p.arrival_us},
          {"carrier_detuning_mhz", p.carrier_detuning_mhz},
          {"phase_rad", p.phase_rad},
          {"amplitude", p.amplitude}};
}

json to_json(const ControlPulse& c) {
  return {{"start_us", c.start_us}, {"duration_us", c.duration_us}, {"power_mw", c.power_mw},
          {"phase_rad", c.phase_rad}, {"role", role_name(c.role)}};
}

json to_json(const SpectralGrid& g) {
  return {{"center_mhz", g.center_mhz}, {"span_mhz", g.span_mhz}, {"num_points", g.num_points}};
}

json to_json(const PrepConfig& p) {
  json out;
  out["pit"] = p.sequence.pit ? to_json(*p.sequence.pit) : json(nullptr);
  json pulses = json::array();
  for (const auto& q : p.sequence.burn_back.pulses)
    pulses.push_back({{"frequency_mhz", q.frequency_mhz}, {"duration_us", q.duration_us}, {"repeats", q.repeats}});
  out["burn_back"] = {{"pulses", pulses}, {"laser", to_json(p.sequence.burn_back.laser)}};
  out["clean"] = p.sequence.clean ? to_json(*p.sequence.clean) : json(nullptr);
  out["t_prep_us"] = p.sequence.t_prep_us;
  out["t_w_us"] = p.sequence.t_w_us;
  out["strengths"] = matrix_json(p.strengths);
  out["probe"] = to_json(p.probe);
  out["class_step_mhz"] = p.class_step_mhz;
  return out;
}

json to_json(const RunConfig& cfg) {
  json out;
  out["seed"] = cfg.seed;
  out["workers"] = cfg.workers;
  if (!cfg.output_dir.empty()) out["output_dir"] = cfg.output_dir;
  out["material"] = to_json(cfg.material);
  if (cfg.comb) out["comb"] = to_json(*cfg.comb);
  if (cfg.prep) out["prep"] = to_json(*cfg.prep);
  out["grids"] = {{"span_factor", cfg.span_factor}};
  json bins = json::array(), controls = json::array();
  for (const auto& b : cfg.sequence.bins) bins.push_back(to_json(b));
  for (const auto& c : cfg.sequence.controls) controls.push_back(to_json(c));
  out["sequence"] = {{"bins", bins},
                     {"controls", controls},
                     {"t_w_us", cfg.sequence.t_w_us},
                     {"window_us", cfg.sequence.window_us},
                     {"apply_optical_t2", cfg.sequence.flags.apply_optical_t2},
                     {"mc_spins", cfg.sequence.flags.mc_spins}};
  out["noise"] = {{"linewidth_mhz", cfg.noise.linewidth_mhz}, {"apply_to", target_name(cfg.noise.apply_to)}};
  return out;
}

CombSpec comb_from_json(const json& j, const std::string& path) {
  Obj o(j, path, {"delta_mhz", "tooth_fwhm_mhz", "num_teeth", "peak_depth", "background_depth", "tooth_shape"});
  CombSpec c;
  c.delta_mhz = o.num("delta_mhz", c.delta_mhz, Bound::positive);
  c.tooth_fwhm_mhz = o.num("tooth_fwhm_mhz", c.tooth_fwhm_mhz, Bound::positive);
  c.num_teeth = static_cast<int>(o.integer("num_teeth", c.num_teeth, 1));
  c.peak_depth = o.num("peak_depth", c.peak_depth, Bound::nonneg);
  c.background_depth = o.num("background_depth", c.background_depth, Bound::nonneg);
  if (o.str("tooth_shape", "gaussian") != "gaussian") invalid(o.key_path("tooth_shape"), "only \"gaussian\"");
  if (c.finesse() < 1.0) invalid(o.key_path("tooth_fwhm_mhz"), "must not exceed delta_mhz (finesse >= 1)");
  return c;
}

MaterialParams material_from_json(const json& j, const std::string& path) {
  Obj o(j, path,
        {"ground_splittings_mhz", "excited_splittings_mhz", "t1_excited_us", "t2_excited_us", "gamma_is_mhz",
         "alpha_per_cm", "length_cm", "rabi_ref_mhz", "power_ref_mw", "branching"});
  MaterialParams m;
  m.ground_splittings_mhz = o.numbers("ground_splittings_mhz", m.ground_splittings_mhz, Bound::positive);
  m.excited_splittings_mhz = o.numbers("excited_splittings_mhz", m.excited_splittings_mhz, Bound::positive);
  m.t1_excited_us = o.num("t1_excited_us", m.t1_excited_us, Bound::positive);
  m.t2_excited_us = o.num("t2_excited_us", m.t2_excited_us, Bound::positive);
  m.gamma_is_mhz = o.num("gamma_is_mhz", m.gamma_is_mhz, Bound::nonneg);
  m.alpha_per_cm = o.num("alpha_per_cm", m.alpha_per_cm, Bound::positive);
  m.length_cm = o.num("length_cm", m.length_cm, Bound::positive);
  m.rabi_ref_mhz = o.num("rabi_ref_mhz", m.rabi_ref_mhz, Bound::positive);
  m.power_ref_mw = o.num("power_ref_mw", m.power_ref_mw, Bound::positive);
  m.branching = o.matrix3("branching", m.branching);
  checked(o.key_path("branching"), [&] { m.validate(); });
  return m;
}

StorageSequence RunConfig::storage_sequence() const {
  if (!comb) throw Error(errc::kValidation, "comb: spin-wave simulation needs an explicit comb");
  StorageSequence s;
  s.bins = sequence.bins;
  s.controls = sequence.controls;
  s.comb = *comb;
  s.material = material;
  s.noise = noise;
  s.noise.seed = derive_seed(seed, "noise");
  s.t_w_us = sequence.t_w_us;
  s.flags = sequence.flags;
  s.window_us = sequence.window_us;
  return s;
}

TransitionTable RunConfig::transition_table() const {
  TransitionTable t = transition_table_from(material);
  if (prep) t.strength = prep->strengths;
  return t;
}

PrepConfig default_prep_config(const CombSpec& comb, const MaterialParams& material) {
  PrepConfig p;
  const TransitionTable t = transition_table_from(material);
  p.sequence = default_prep_sequence(comb, t);
  p.strengths = t.strength;
  return p;
}

RunConfig default_run_config() {
  RunConfig cfg;
  CombSpec comb;
  comb.delta_mhz = 0.5;
  comb.tooth_fwhm_mhz = 0.125;
  comb.num_teeth = 5;
  comb.peak_depth = 4.12;
  comb.background_depth = 0.45;
  cfg.comb = comb;
  Pulse bin;
  bin.width_us = 0.84;
  cfg.sequence.bins = {bin};
  ControlPulse in{0.6, 0.8, 5.7, 0.0, ControlRole::transfer_in};
  ControlPulse out{4.6, 0.8, 5.7, 0.0, ControlRole::readout};
  cfg.sequence.controls = {in, out};
  return cfg;
}

RunConfig run_config_from_json(const json& j) {
  Obj o(j, "", {"seed", "workers", "output_dir", "material", "comb", "prep", "grids", "sequence", "noise"});
  RunConfig cfg = default_run_config();
  cfg.seed = o.u64("seed", 0);
  cfg.workers = static_cast<unsigned>(o.integer("workers", 1, 1));
  cfg.output_dir = o.str("output_dir", "");
  if (o.has("material")) cfg.material = material_from_json(o.at("material"));

  const bool has_comb = o.has("comb"), has_prep = o.has("prep");
  if (has_comb == has_prep) invalid("comb", "exactly one of \"comb\" and \"prep\" must be given");
  if (has_comb) {
    cfg.comb = comb_from_json(o.at("comb"));
    cfg.prep.reset();
  } else {
    cfg.comb.reset();
    const CombSpec fallback = *default_run_config().comb;
    cfg.prep = prep_from_json(o.at("prep"), "prep", &fallback, cfg.material);
  }

  if (o.has("grids")) {
    Obj g(o.at("grids"), "grids", {"span_factor"});
    cfg.span_factor = g.num("span_factor", 4.0, Bound::positive);
    if (cfg.span_factor < 1.0) invalid("grids.span_factor", "must be >= 1");
  }
  if (o.has("sequence")) cfg.sequence = sequence_from_json(o.at("sequence"), "sequence");
  if (o.has("noise")) {
    Obj n(o.at("noise"), "noise", {"linewidth_mhz", "apply_to"});
    cfg.noise.linewidth_mhz = n.num("linewidth_mhz", 0.0, Bound::nonneg);
    const std::string to = n.str("apply_to", "inputs");
    if (to == "inputs")
      cfg.noise.apply_to = NoiseTarget::inputs;
    else if (to == "controls")
      cfg.noise.apply_to = NoiseTarget::controls;
    else if (to == "both")
      cfg.noise.apply_to = NoiseTarget::both;
    else
      invalid("noise.apply_to", "expected \"inputs\", \"controls\" or \"both\"");
  }
  if (cfg.comb && !cfg.sequence.bins.empty()) checked("sequence", [&] { cfg.storage_sequence().validate(); });
  return cfg;
}

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
    throw Error(errc::kParse, "line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + e.what());
  }
  return run_config_from_json(j);
}

RunConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(errc::kIo, "cannot open " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void save_config(const RunConfig& cfg, const std::filesystem::path& file) { write_json(file, to_json(cfg)); }

std::filesystem::path resolve_output_dir(const RunConfig& cfg, const std::string& override_dir) {
  if (!override_dir.empty()) return override_dir;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  if (const char* env = std::getenv("AFC_OUTPUT_DIR"); env && *env) return env;
  return "afcmem-out";
}

void write_text_atomic(const std::filesystem::path& file, const std::string& text) {
  std::error_code ec;
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path(), ec);
  if (ec) throw Error(errc::kIo, "cannot create " + file.parent_path().string() + ": " + ec.message());
  auto tmp = file;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(errc::kIo, "cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw Error(errc::kIo, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, file, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(errc::kIo, "cannot rename onto " + file.string() + ": " + ec.message());
  }
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

void write_json(const std::filesystem::path& file, const json& j) { write_text_atomic(file, dump_json(j)); }

std::string to_csv(const Table& table) {
  std::string out;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c) out += ',';
    out += table.columns[c];
  }
  out += '\n';
  char buf[40];
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      std::snprintf(buf, sizeof buf, "%.17g", row[c]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void write_table(const std::filesystem::path& dir, const Table& table) {
  write_text_atomic(dir / (table.name + ".csv"), to_csv(table));
}

Table read_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(errc::kIo, "cannot open " + file.string());
  Table t;
  t.name = file.stem().string();
  std::string line;
  std::size_t lineno = 0;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto cells = split(line);
    if (t.columns.empty()) {
      t.columns = cells;
      continue;
    }
    if (cells.size() != t.columns.size())
      throw Error(errc::kParse, file.string() + ":" + std::to_string(lineno) + ": expected " +
                                    std::to_string(t.columns.size()) + " columns");
    std::vector<double> row;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      char* end = nullptr;
      const double v = std::strtod(cells[c].c_str(), &end);
      if (end == cells[c].c_str() || *end != '\0')
        throw Error(errc::kParse, file.string() + ":" + std::to_string(lineno) + ":" + std::to_string(c + 1) +
                                      ": not a number");
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  if (t.columns.empty()) throw Error(errc::kParse, file.string() + ": missing header row");
  return t;
}

Table trace_table(const FieldTrace& trace, const std::string& name) {
  Table t{name, {"t_us", "re", "im", "intensity"}, {}};
  t.rows.reserve(trace.samples.size());
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    const auto s = trace.samples[i];
    t.rows.push_back({trace.grid.time(i), s.real(), s.imag(), std::norm(s)});
  }
  return t;
}

Table histogram_table(const PhotonHistogram& h, const std::string& name) {
  Table t{name, {"t_us", "counts"}, {}};
  for (std::size_t i = 0; i < h.counts.size(); ++i)
    t.rows.push_back({h.grid.time(i), static_cast<double>(h.counts[i])});
  return t;
}

Table profile_table(const OpticalDepthProfile& p, const std::string& name) {
  Table t{name, {"nu_mhz", "depth"}, {}};
  for (std::size_t i = 0; i < p.depth.size(); ++i) t.rows.push_back({p.grid.frequency(i), p.depth[i]});
  return t;
}

Table population_table(const IonEnsemble& e, const std::string& name) {
  Table t{name, {"detuning_mhz", "p_12g", "p_32g", "p_52g"}, {}};
  for (std::size_t i = 0; i < e.detuning_mhz.size(); ++i)
    t.rows.push_back({e.detuning_mhz[i], e.populations[i][0], e.populations[i][1], e.populations[i][2]});
  return t;
}

FieldTrace trace_from_table(const Table& table) {
  if (table.columns.size() < 3 || table.columns[0] != "t_us" || table.columns[1] != "re" || table.columns[2] != "im")
    throw Error(errc::kParse, "trace CSV needs columns t_us,re,im");
  if (table.rows.size() < 2) throw Error(errc::kParse, "trace CSV needs at least two samples");
  FieldTrace tr;
  const double t0 = table.rows.front()[0];
  const double dt = table.rows[1][0] - t0;
  if (!(dt > 0.0)) throw Error(errc::kUnsortedTimes, "trace times must increase");
  for (std::size_t i = 1; i < table.rows.size(); ++i)
    if (std::abs(table.rows[i][0] - (t0 + static_cast<double>(i) * dt)) > 1e-6 * dt * static_cast<double>(i + 1))
      throw Error(errc::kParse, "trace CSV must be uniformly sampled");
  tr.grid.start_us = t0;
  tr.grid.num_points = table.rows.size();
  tr.grid.duration_us = dt * static_cast<double>(table.rows.size());
  for (const auto& r : table.rows) tr.samples.emplace_back(r[1], r[2]);
  return tr;
}

}  // namespace afc
