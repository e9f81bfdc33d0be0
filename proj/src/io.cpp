#include "coag/io.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace coag {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ConfigError("config: " + msg); }

const json& need(const json& doc, const char* key) {
  const auto it = doc.find(key);
  if (it == doc.end()) fail(std::string("missing required key '") + key + "'");
  return *it;
}

double need_number(const json& doc, const char* key) {
  const json& v = need(doc, key);
  if (!v.is_number()) fail(std::string("'") + key + "' must be a number");
  return v.get<double>();
}

double opt_number(const json& doc, const char* key, double fallback) {
  const auto it = doc.find(key);
  if (it == doc.end()) return fallback;
  if (!it->is_number()) fail(std::string("'") + key + "' must be a number");
  return it->get<double>();
}

std::string opt_string(const json& doc, const char* key, const std::string& fallback) {
  const auto it = doc.find(key);
  if (it == doc.end()) return fallback;
  if (!it->is_string()) fail(std::string("'") + key + "' must be a string");
  return it->get<std::string>();
}

std::vector<double> number_list(const json& v, const char* key) {
  if (!v.is_array() || v.empty()) fail(std::string("'") + key + "' must be a nonempty array");
  std::vector<double> out;
  for (const json& e : v) {
    if (!e.is_number()) fail(std::string("'") + key + "' entries must be numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

KernelSpec parse_kernel(const json& doc) {
  if (!doc.is_object()) fail("'kernel' must be an object");
  KernelSpec spec;
  const std::string family = opt_string(doc, "family", "constant");
  if (family == "constant")
    spec.family = KernelFamily::Constant;
  else if (family == "additive")
    spec.family = KernelFamily::Additive;
  else if (family == "product_sqrt")
    spec.family = KernelFamily::ProductSqrt;
  else if (family == "smooth")
    spec.family = KernelFamily::Smooth;
  else
    fail("kernel family '" + family + "' is not one of constant|additive|product_sqrt|smooth");
  spec.coeff = opt_number(doc, "coeff", 1.0);
  spec.cutoff = opt_number(doc, "cutoff", 0.0);
  const std::string shape = opt_string(doc, "shape", "saturating");
  if (shape == "constant")
    spec.shape = SmoothShape::Constant;
  else if (shape == "additive")
    spec.shape = SmoothShape::Additive;
  else if (shape == "saturating")
    spec.shape = SmoothShape::Saturating;
  else
    fail("kernel shape '" + shape + "' is not one of constant|additive|saturating");
  try {
    validate(spec);
  } catch (const std::domain_error& e) {
    fail(e.what());
  }
  return spec;
}

FunctionalSpec parse_functional(const std::string& name, const json& doc, int nbins) {
  if (!doc.is_object()) fail("functional '" + name + "' must be an object");
  FunctionalSpec f;
  f.label = name;
  const std::string kind = opt_string(doc, "kind", "power");
  if (kind == "power") {
    f.kind = FunctionalKind::Power;
    f.exponent = opt_number(doc, "exponent", 1.0);
  } else if (kind == "indicator") {
    f.kind = FunctionalKind::Indicator;
    const double bin = need_number(doc, "bin");
    f.bin = static_cast<int>(bin);
    if (f.bin != bin || f.bin < 1 || f.bin > nbins)
      fail("functional '" + name + "': bin must be an integer in [1, bins]");
  } else if (kind == "mass") {
    f.kind = FunctionalKind::MassConserved;
  } else if (kind == "tabulated") {
    f.kind = FunctionalKind::Tabulated;
    const std::vector<double> vals = number_list(need(doc, "values"), "values");
    if (static_cast<int>(vals.size()) != nbins)
      fail("functional '" + name + "': values must have one entry per bin");
    f.values = Eigen::Map<const Eigen::ArrayXd>(vals.data(),
                                                static_cast<Eigen::Index>(vals.size()));
  } else {
    fail("functional '" + name + "': kind must be power|indicator|mass|tabulated");
  }
  const double tp = opt_number(doc, "tensor_power", 1.0);
  f.tensor_power = static_cast<int>(tp);
  if (f.tensor_power != tp || f.tensor_power < 1)
    fail("functional '" + name + "': tensor_power must be a positive integer");
  return f;
}

}  // namespace

const FunctionalSpec& ExperimentConfig::functional(const std::string& name) const {
  for (const FunctionalSpec& f : functionals)
    if (f.label == name) return f;
  fail("no functional named '" + name + "'");
}

double ExperimentConfig::level() const {
  if (!(h > 0.0)) fail("this command needs a single level 'h'");
  return h;
}

double ExperimentConfig::gate(const std::string& key, double fallback) const {
  const auto git = doc.find("gates");
  if (git == doc.end()) return fallback;
  if (!git->is_object()) fail("'gates' must be an object");
  const auto it = git->find(key);
  if (it == git->end()) return fallback;
  if (!it->is_number()) fail("gate '" + key + "' must be a number");
  return it->get<double>();
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    fail("parse failure in '" + path + "': " + e.what());
  }
  return parse_config(doc, std::filesystem::path(path).parent_path().string());
}

ExperimentConfig parse_config(const nlohmann::json& doc, const std::string& base_dir) {
  if (!doc.is_object()) fail("document must be a JSON object");
  const double schema = opt_number(doc, "schema", 1.0);
  if (schema != 1.0) fail("unsupported schema version");

  ExperimentConfig cfg;
  cfg.doc = doc;
  cfg.kernel = parse_kernel(need(doc, "kernel"));

  const json& grid = need(doc, "grid");
  if (!grid.is_object()) fail("'grid' must be an object");
  cfg.grid.delta = need_number(grid, "delta");
  const double bins = need_number(grid, "bins");
  cfg.grid.nbins = static_cast<int>(bins);
  if (!(cfg.grid.delta > 0.0)) fail("grid delta must be positive");
  if (cfg.grid.nbins != bins || cfg.grid.nbins < 1)
    fail("grid bins must be a positive integer");

  if (const auto it = doc.find("mu0"); it != doc.end()) {
    if (!it->is_object()) fail("'mu0' must be an object");
    const std::string kind = opt_string(*it, "kind", "monodisperse");
    if (kind == "monodisperse") {
      cfg.mu0_monodisperse = true;
    } else if (kind == "tabulated") {
      cfg.mu0_monodisperse = false;
      const std::string csv = opt_string(*it, "csv", "");
      if (csv.empty()) fail("tabulated mu0 needs a 'csv' path");
      std::filesystem::path p(csv);
      if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
      if (!std::filesystem::exists(p)) fail("mu0 csv '" + p.string() + "' does not exist");
      cfg.mu0_csv = p.string();
    } else {
      fail("mu0 kind must be monodisperse|tabulated");
    }
  }

  cfg.h = opt_number(doc, "h", 0.0);
  if (doc.contains("h") && !(cfg.h > 0.0)) fail("'h' must be positive");
  if (const auto it = doc.find("h_ladder"); it != doc.end()) {
    cfg.h_ladder = number_list(*it, "h_ladder");
    for (std::size_t i = 0; i < cfg.h_ladder.size(); ++i) {
      if (!(cfg.h_ladder[i] > 0.0)) fail("'h_ladder' values must be positive");
      for (std::size_t j = i + 1; j < cfg.h_ladder.size(); ++j)
        if (cfg.h_ladder[i] == cfg.h_ladder[j]) fail("'h_ladder' values must be distinct");
    }
  }
  if (!(cfg.h > 0.0) && cfg.h_ladder.empty()) fail("need 'h' or 'h_ladder'");

  cfg.times = number_list(need(doc, "times"), "times");
  for (std::size_t i = 0; i < cfg.times.size(); ++i) {
    if (cfg.times[i] < 0.0) fail("'times' must be nonnegative");
    if (i > 0 && cfg.times[i] < cfg.times[i - 1]) fail("'times' must be nondecreasing");
  }

  if (const auto it = doc.find("functionals"); it != doc.end()) {
    if (!it->is_object()) fail("'functionals' must be an object of named entries");
    for (const auto& [name, entry] : it->items())
      cfg.functionals.push_back(parse_functional(name, entry, cfg.grid.nbins));
  }

  const double replicas = opt_number(doc, "replicas", 1.0);
  cfg.replicas = static_cast<long long>(replicas);
  if (cfg.replicas != replicas || cfg.replicas < 1)
    fail("'replicas' must be a positive integer");

  if (const auto it = doc.find("seed"); it != doc.end()) {
    if (!it->is_number_integer() && !it->is_number_unsigned())
      fail("'seed' must be an integer");
    if (it->is_number_integer() && it->get<long long>() < 0)
      fail("'seed' must be nonnegative");
    cfg.seed = it->get<std::uint64_t>();
  }

  const double threads = opt_number(doc, "threads", 1.0);
  cfg.threads = static_cast<int>(threads);
  if (cfg.threads != threads || cfg.threads < 1) fail("'threads' must be a positive integer");

  cfg.dt = opt_number(doc, "dt", 1e-3);
  if (!(cfg.dt > 0.0)) fail("'dt' must be positive");

  if (const auto it = doc.find("sobolev"); it != doc.end()) {
    if (!it->is_object()) fail("'sobolev' must be an object");
    cfg.sobolev_k = opt_number(*it, "k", 0.0);
    if (cfg.sobolev_k != 0.0 && cfg.sobolev_k <= 0.5) fail("sobolev k must exceed 1/2");
    const double quad = opt_number(*it, "quad", 6.0);
    cfg.sobolev_quad = static_cast<int>(quad);
    if (cfg.sobolev_quad != quad || cfg.sobolev_quad < 2)
      fail("sobolev quad must be an integer of at least 2");
  }

  cfg.out_dir = opt_string(doc, "out", "out");
  return cfg;
}

std::string config_hash(const nlohmann::json& doc) {
  nlohmann::json canon = doc;
  canon.erase("threads");
  canon.erase("out");
  const std::string s = canon.dump();
  std::uint64_t hsh = 14695981039346656037ull;
  for (const char c : s) {
    hsh ^= static_cast<unsigned char>(c);
    hsh *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hsh));
  return buf;
}

GridMeasure load_measure_csv(const std::string& path, const Grid& grid) {
  std::ifstream in(path);
  if (!in) fail("cannot open measure csv '" + path + "'");
  GridMeasure nu = zero_measure(grid);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    double bin = 0.0, weight = 0.0;
    if (!(row >> bin)) {
      if (lineno == 1) continue;  // header
      fail("measure csv '" + path + "' line " + std::to_string(lineno) + ": bad row");
    }
    if (!(row >> weight))
      fail("measure csv '" + path + "' line " + std::to_string(lineno) + ": bad row");
    const int b = static_cast<int>(bin);
    if (b != bin || b < 0 || b > grid.nbins)
      fail("measure csv '" + path + "' line " + std::to_string(lineno) +
           ": bin must be an integer in [0, bins]");
    if (weight < 0.0)
      fail("measure csv '" + path + "' line " + std::to_string(lineno) +
           ": weights must be nonnegative");
    if (b == 0)
      nu.overflow += weight;
    else
      nu.w[b - 1] += weight;
  }
  return nu;
}

GridMeasure initial_measure(const ExperimentConfig& cfg) {
  if (cfg.mu0_monodisperse) return monodisperse(cfg.grid, cfg.level());
  return load_measure_csv(cfg.mu0_csv, cfg.grid);
}

EnsembleConfig ensemble_config(const ExperimentConfig& cfg) {
  return ensemble_config(cfg, cfg.level());
}

EnsembleConfig ensemble_config(const ExperimentConfig& cfg, double h) {
  if (!cfg.mu0_monodisperse)
    fail("ensemble commands start monodisperse; a tabulated mu0 only feeds 'solve'");
  EnsembleConfig proto;
  proto.grid = cfg.grid;
  proto.kernel = cfg.kernel;
  proto.h = h;
  proto.dt = cfg.dt;
  proto.times = cfg.times;
  proto.functionals = cfg.functionals;
  proto.replicas = cfg.replicas;
  proto.seed = cfg.seed;
  proto.threads = cfg.threads;
  proto.sobolev_k = cfg.sobolev_k;
  proto.sobolev_quad = cfg.sobolev_quad;
  return proto;
}

std::string artifact_dir(const ExperimentConfig& cfg, const std::string& command) {
  return cfg.out_dir + "/" + command + "-" + config_hash(cfg.doc).substr(0, 12);
}

bool artifact_complete(const std::string& dir) {
  return std::filesystem::exists(std::filesystem::path(dir) / "report.json");
}

void write_text_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
  if (!out) throw std::runtime_error("short write to '" + path + "'");
}

}  // namespace coag
