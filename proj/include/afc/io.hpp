#pragma once

// Run configuration (JSON), report and table writers.
//
// Every numeric key carries its unit in its name (_mhz, _us, _mw). Unknown
// keys are rejected. Files are written to a temporary sibling and renamed.

#include "afc/prep.hpp"
#include "afc/propagation.hpp"
#include "afc/spectral.hpp"
#include "afc/spinwave.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace afc {

using json = nlohmann::json;

struct Table {
  std::string name;  // file stem
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

// Shared by the prepare command: strengths come from `table`, energies from
// the material.
struct PrepConfig {
  PrepSequence sequence;
  std::array<std::array<double, 3>, 3> strengths = TransitionTable{}.strength;
  SpectralGrid probe{0.0, 10.24, 1024};
  double class_step_mhz = 0.01;
};

// Fragments of a storage sequence; comb, material and noise live at the top
// level of the run configuration.
struct SequenceConfig {
  std::vector<Pulse> bins;
  std::vector<ControlPulse> controls;
  double t_w_us = 1000.0;
  double window_us = kDefaultWindowUs;
  StorageFlags flags;
};

struct RunConfig {
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string output_dir;  // empty: AFC_OUTPUT_DIR, then ./afcmem-out
  MaterialParams material;
  std::optional<CombSpec> comb;  // exactly one of comb / prep
  std::optional<PrepConfig> prep;
  double span_factor = 4.0;
  SequenceConfig sequence;
  PhaseNoiseModel noise;  // seed is derived from `seed`, not configured

  // Storage sequence for `simulate spinwave`; needs a comb source.
  StorageSequence storage_sequence() const;
  TransitionTable transition_table() const;
};

RunConfig default_run_config();
PrepConfig default_prep_config(const CombSpec& comb, const MaterialParams& material);

json to_json(const CombSpec& c);
json to_json(const MaterialParams& m);
json to_json(const Pulse& p);
json to_json(const ControlPulse& c);
json to_json(const SpectralGrid& g);
json to_json(const PrepConfig& p);
json to_json(const RunConfig& cfg);

// Throw validation-error naming the offending key path.
CombSpec comb_from_json(const json& j, const std::string& path = "comb");
MaterialParams material_from_json(const json& j, const std::string& path = "material");
RunConfig run_config_from_json(const json& j);

// parse-error carries line and column; validation-error names the key.
RunConfig load_config(const std::filesystem::path& file);
RunConfig parse_config(const std::string& text);
void save_config(const RunConfig& cfg, const std::filesystem::path& file);

// Precedence: explicit override, config, AFC_OUTPUT_DIR, ./afcmem-out.
std::filesystem::path resolve_output_dir(const RunConfig& cfg, const std::string& override_dir = {});

// Atomic write (temp file + rename). Throws io-error.
void write_text_atomic(const std::filesystem::path& file, const std::string& text);
std::string dump_json(const json& j);  // two-space indent, trailing newline
void write_json(const std::filesystem::path& file, const json& j);

// Header row of column names, then rows printed with %.17g.
std::string to_csv(const Table& table);
void write_table(const std::filesystem::path& dir, const Table& table);
// Parses a numeric CSV with a header row. Throws parse-error.
Table read_csv(const std::filesystem::path& file);

Table trace_table(const FieldTrace& trace, const std::string& name);        // t_us,re,im,intensity
Table histogram_table(const PhotonHistogram& h, const std::string& name);   // t_us,counts
Table profile_table(const OpticalDepthProfile& p, const std::string& name); // nu_mhz,depth
Table population_table(const IonEnsemble& e, const std::string& name);      // detuning_mhz,p_12g,p_32g,p_52g

// Reads a trace written by trace_table.
FieldTrace trace_from_table(const Table& table);

}  // namespace afc
