#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "coag/harness.hpp"
#include "json.hpp"

namespace coag {

// Configuration problems are their own failure class: the front-end maps
// them to exit status 2 before any artifact is written.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A parsed experiment. The structured fields drive the solvers; doc keeps
// the effective document (flag overrides applied) for hashing and echoing
// into reports.
struct ExperimentConfig {
  nlohmann::json doc;
  KernelSpec kernel;
  Grid grid{1.0, 1};
  bool mu0_monodisperse = true;
  std::string mu0_csv;             // resolved path when tabulated
  double h = 0.0;                  // single level; 0 when only a ladder is given
  std::vector<double> h_ladder;    // empty when single-level
  double dt = 1e-3;
  std::vector<double> times;
  std::vector<FunctionalSpec> functionals;  // labels carry the dictionary names
  long long replicas = 1;
  std::uint64_t seed = 1;
  int threads = 1;
  double sobolev_k = 0.0;
  int sobolev_quad = 6;
  std::string out_dir = "out";

  const FunctionalSpec& functional(const std::string& name) const;  // ConfigError if absent
  double level() const;                       // h; ConfigError when only a ladder is given
  double gate(const std::string& key, double fallback) const;  // gates.<key> lookup
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const nlohmann::json& doc, const std::string& base_dir);

// FNV-1a over the canonical dump with the presentation-only keys (threads,
// out) removed: stable under key reordering in the source file, sensitive
// to anything that can change results.
std::string config_hash(const nlohmann::json& doc);

// bin,weight rows (header optional); bin 0 is the overflow channel,
// duplicate bins accumulate.
GridMeasure load_measure_csv(const std::string& path, const Grid& grid);

// The configured initial state: monodisperse at the single level, or the
// tabulated CSV measure.
GridMeasure initial_measure(const ExperimentConfig& cfg);

// Harness prototype at level h (the config's single level by default).
// Ensemble paths always start monodisperse; a tabulated mu0 is rejected.
EnsembleConfig ensemble_config(const ExperimentConfig& cfg);
EnsembleConfig ensemble_config(const ExperimentConfig& cfg, double h);

// out/<command>-<hash prefix>; a directory whose report.json exists is a
// completed experiment.
std::string artifact_dir(const ExperimentConfig& cfg, const std::string& command);
bool artifact_complete(const std::string& dir);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace coag
