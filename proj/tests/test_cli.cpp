#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "coag/cli.hpp"
#include "coag/io.hpp"
#include "coag/plot.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace coag;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// run_command narrates to stdout; keep the doctest output readable
struct QuietStdout {
  std::streambuf* saved;
  std::ostringstream sink;
  QuietStdout() : saved(std::cout.rdbuf(sink.rdbuf())) {}
  ~QuietStdout() { std::cout.rdbuf(saved); }
};

int run_quiet(const std::vector<std::string>& args) {
  QuietStdout quiet;
  return run_command(args);
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("coag_cli_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

json base_doc(const fs::path& out) {
  json doc;
  doc["schema"] = 1;
  doc["kernel"] = json{{"family", "constant"}, {"coeff", 1.0}};
  doc["grid"] = json{{"delta", 1.0}, {"bins", 12}};
  doc["h"] = 0.05;
  doc["dt"] = 0.01;
  doc["times"] = json::array({0.1, 0.3});
  doc["functionals"] = json{{"n1", json{{"kind", "indicator"}, {"bin", 1}}}};
  doc["replicas"] = 30;
  doc["seed"] = 11;
  doc["out"] = out.string();
  return doc;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("config parsing accepts the documented schema") {
    const fs::path dir = fresh_dir("parse");
    json doc = base_doc(dir);
    doc["h_ladder"] = json::array({0.1, 0.05, 0.025, 0.0125});
    doc["sobolev"] = json{{"k", 1.0}, {"quad", 6}};
    doc["functionals"]["energy"] = json{{"kind", "power"}, {"exponent", 2.0}};
    doc["functionals"]["pairs"] =
        json{{"kind", "power"}, {"exponent", 2.0}, {"tensor_power", 2}};
    doc["functionals"]["mass"] = json{{"kind", "mass"}};

    const ExperimentConfig cfg = parse_config(doc, "");
    CHECK(cfg.kernel.family == KernelFamily::Constant);
    CHECK(cfg.grid.nbins == 12);
    CHECK(cfg.h == 0.05);
    CHECK(cfg.h_ladder.size() == 4);
    CHECK(cfg.replicas == 30);
    CHECK(cfg.seed == 11);
    CHECK(cfg.sobolev_k == 1.0);
    REQUIRE(cfg.functionals.size() == 4);
    // dictionary keys come out sorted
    CHECK(cfg.functionals[0].label == "energy");
    CHECK(cfg.functionals[1].label == "mass");
    CHECK(cfg.functionals[2].label == "n1");
    CHECK(cfg.functionals[3].label == "pairs");
    CHECK(cfg.functionals[3].tensor_power == 2);
    CHECK(cfg.functional("mass").kind == FunctionalKind::MassConserved);
    CHECK_THROWS_AS(cfg.functional("absent"), ConfigError);
    CHECK(cfg.gate("slope_lo", 0.8) == 0.8);
  }

  TEST_CASE("config parsing rejects malformed documents") {
    const json good = base_doc(fresh_dir("reject"));
    CHECK_NOTHROW(parse_config(good, ""));

    auto mutate = [&](const char* pointer, const json& value) {
      json doc = good;
      doc[json::json_pointer(pointer)] = value;
      return doc;
    };
    CHECK_THROWS_AS(parse_config(json::array(), ""), ConfigError);
    CHECK_THROWS_AS(parse_config(mutate("/schema", 2), ""), ConfigError);
    CHECK_THROWS_AS(parse_config(mutate("/kernel/family", "bogus"), ""), ConfigError);
    CHECK_THROWS_AS(parse_config(mutate("/kernel/coeff", -1.0), ""), ConfigError);
    CHECK_THROWS_AS(parse_config(mutate("/grid/bins", 2.5), ""), ConfigError);
    CHECK_THROWS_AS(parse_config(mutate("/grid/delta", 0.0), ""), ConfigError);
    CHECK_THROWS_AS(parse_config(mutate("/h", -0.1), ""), ConfigError);
    CHECK_THROWS_AS(parse_config(mutate("/times", json::array()), ""), ConfigError);
    CHECK_THROWS_AS(parse_config(mutate("/times", json::array({0.3, 0.1})), ""), ConfigError);
    CHECK_THROWS_AS(parse_config(mutate("/replicas", 0), ""), ConfigError);
    CHECK_THROWS_AS(parse_config(mutate("/seed", -4), ""), ConfigError);
    CHECK_THROWS_AS(parse_config(mutate("/dt", 0.0), ""), ConfigError);
    CHECK_THROWS_AS(parse_config(mutate("/functionals/n1/bin", 99), ""), ConfigError);
    CHECK_THROWS_AS(parse_config(mutate("/functionals/n1/kind", "wavelet"), ""), ConfigError);
    CHECK_THROWS_AS(
        parse_config(mutate("/h_ladder", json::array({0.1, 0.1, 0.05, 0.025})), ""),
        ConfigError);
    CHECK_THROWS_AS(parse_config(mutate("/sobolev", json{{"k", 0.4}}), ""), ConfigError);

    json no_h = good;
    no_h.erase("h");
    CHECK_THROWS_AS(parse_config(no_h, ""), ConfigError);
    json no_kernel = good;
    no_kernel.erase("kernel");
    CHECK_THROWS_AS(parse_config(no_kernel, ""), ConfigError);
  }

  TEST_CASE("config hash ignores key order and presentation keys") {
    const json doc = base_doc("out");
    const std::string h = config_hash(doc);
    CHECK(h.size() == 16);

    // same content via a differently-ordered literal
    json reordered;
    reordered["times"] = doc["times"];
    reordered["seed"] = doc["seed"];
    reordered["replicas"] = doc["replicas"];
    reordered["out"] = doc["out"];
    reordered["kernel"] = doc["kernel"];
    reordered["h"] = doc["h"];
    reordered["grid"] = doc["grid"];
    reordered["functionals"] = doc["functionals"];
    reordered["dt"] = doc["dt"];
    reordered["schema"] = doc["schema"];
    CHECK(config_hash(reordered) == h);

    json cosmetic = doc;
    cosmetic["threads"] = 7;
    cosmetic["out"] = "elsewhere";
    CHECK(config_hash(cosmetic) == h);

    json reseeded = doc;
    reseeded["seed"] = 12;
    CHECK(config_hash(reseeded) != h);
  }

  TEST_CASE("measure csv loads bins and overflow") {
    const fs::path dir = fresh_dir("csv");
    const fs::path p = dir / "mu.csv";
    write_file(p, "bin,weight\n1,0.5\n3,0.25\n1,0.125\n0,0.0625\n");
    const Grid grid{1.0, 4};
    const GridMeasure nu = load_measure_csv(p.string(), grid);
    CHECK(nu.w[0] == 0.625);
    CHECK(nu.w[2] == 0.25);
    CHECK(nu.overflow == 0.0625);

    write_file(p, "1,0.5\n9,0.1\n");
    CHECK_THROWS_AS(load_measure_csv(p.string(), grid), ConfigError);
    write_file(p, "1,-0.5\n");
    CHECK_THROWS_AS(load_measure_csv(p.string(), grid), ConfigError);
    write_file(p, "1\n");
    CHECK_THROWS_AS(load_measure_csv(p.string(), grid), ConfigError);
  }

  TEST_CASE("selfcheck passes and writes its report") {
    const fs::path dir = fresh_dir("selfcheck");
    CHECK(run_quiet({"selfcheck", "--out", dir.string()}) == 0);
    fs::directory_iterator it(dir);
    REQUIRE(it != fs::directory_iterator{});
    const json report = json::parse(slurp(it->path() / "report.json"));
    CHECK(report["experiment"] == "selfcheck");
    CHECK(report["pass"] == true);
    CHECK(report["checks"].size() == 7);
    for (const json& c : report["checks"]) CHECK(c["pass"] == true);
  }

  TEST_CASE("solve emits a conserving trajectory and honors the no-op rule") {
    const fs::path dir = fresh_dir("solve");
    const fs::path cfg_path = dir / "exp.json";
    write_file(cfg_path, base_doc(dir / "out").dump());

    CHECK(run_quiet({"solve", "--config", cfg_path.string()}) == 0);
    fs::path report_path;
    for (const auto& e : fs::directory_iterator(dir / "out"))
      if (e.path().filename().string().rfind("solve-", 0) == 0)
        report_path = e.path() / "report.json";
    REQUIRE(!report_path.empty());
    const json report = json::parse(slurp(report_path));
    CHECK(report["pass"] == true);
    CHECK(report["conservation_residual"].get<double>() <= 1e-8);
    CHECK(report["config_hash"].get<std::string>().size() == 16);

    const std::string csv = slurp(report_path.parent_path() / "solution.csv");
    std::size_t rows = 0;
    for (const char c : csv) rows += c == '\n';
    CHECK(rows == 1 + 2 * (12 + 1));  // header + two times x (bins + overflow)

    // a completed directory is left alone without --force
    const fs::path marker = report_path.parent_path() / "marker";
    write_file(marker, "untouched");
    CHECK(run_quiet({"solve", "--config", cfg_path.string()}) == 0);
    CHECK(slurp(marker) == "untouched");
    CHECK(run_quiet({"solve", "--config", cfg_path.string(), "--force"}) == 0);
    CHECK(fs::exists(marker));  // rewrite replaces files, never cleans the directory
  }

  TEST_CASE("solve accepts a tabulated initial measure") {
    const fs::path dir = fresh_dir("tab");
    write_file(dir / "mu.csv", "bin,weight\n1,0.5\n2,0.25\n");
    json doc = base_doc(dir / "out");
    doc["mu0"] = json{{"kind", "tabulated"}, {"csv", "mu.csv"}};
    write_file(dir / "exp.json", doc.dump());
    CHECK(run_quiet({"solve", "--config", (dir / "exp.json").string()}) == 0);
    // but ensemble commands refuse it
    CHECK(run_quiet({"simulate", "--config", (dir / "exp.json").string()}) == 2);
  }

  TEST_CASE("config problems exit 2 without artifacts") {
    const fs::path dir = fresh_dir("errors");
    const fs::path out = dir / "out";

    CHECK(run_quiet({"solve"}) == 2);  // --config required
    CHECK(run_quiet({"bogus_command"}) == 2);
    CHECK(run_quiet({"solve", "--bogus-flag"}) == 2);
    CHECK(run_quiet({"solve", "--config", (dir / "missing.json").string()}) == 2);

    write_file(dir / "broken.json", "{ not json");
    CHECK(run_quiet({"solve", "--config", (dir / "broken.json").string()}) == 2);

    json doc = base_doc(out);
    doc["times"] = json::array({0.1, 0.0});
    write_file(dir / "bad.json", doc.dump());
    CHECK(run_quiet({"solve", "--config", (dir / "bad.json").string()}) == 2);

    // off-mesh time is caught before anything runs
    doc = base_doc(out);
    doc["times"] = json::array({0.1001});
    write_file(dir / "offmesh.json", doc.dump());
    CHECK(run_quiet({"solve", "--config", (dir / "offmesh.json").string()}) == 2);

    doc = base_doc(out);
    write_file(dir / "flags.json", doc.dump());
    CHECK(run_quiet({"simulate", "--config", (dir / "flags.json").string(), "--replicas",
                     "0"}) == 2);

    CHECK(!fs::exists(out));
  }

  TEST_CASE("reports are identical across reruns and thread counts") {
    const fs::path dir = fresh_dir("determinism");
    json doc = base_doc(dir / "out");
    doc["replicas"] = 300;  // enough for two blocks
    write_file(dir / "exp.json", doc.dump());
    const std::vector<std::string> base{"simulate", "--config", (dir / "exp.json").string()};

    CHECK(run_quiet(base) == 0);
    fs::path report_path;
    for (const auto& e : fs::directory_iterator(dir / "out"))
      report_path = e.path() / "report.json";
    const std::string first = slurp(report_path);
    const std::string first_csv = slurp(report_path.parent_path() / "channels.csv");

    std::vector<std::string> rerun = base;
    rerun.push_back("--force");
    CHECK(run_quiet(rerun) == 0);
    CHECK(slurp(report_path) == first);

    std::vector<std::string> threaded = rerun;
    threaded.push_back("--threads");
    threaded.push_back("3");
    CHECK(run_quiet(threaded) == 0);
    json a = json::parse(first);
    json b = json::parse(slurp(report_path));
    b["config"]["threads"] = a["config"]["threads"];  // the echo differs, nothing else may
    CHECK(a == b);
    CHECK(slurp(report_path.parent_path() / "channels.csv") == first_csv);
  }

  TEST_CASE("flag overrides reach the config and its hash") {
    const fs::path dir = fresh_dir("overrides");
    json doc = base_doc(dir / "out");
    write_file(dir / "exp.json", doc.dump());
    const std::string cfg = (dir / "exp.json").string();

    CHECK(run_quiet({"simulate", "--config", cfg}) == 0);
    CHECK(run_quiet({"simulate", "--config", cfg, "--seed", "99"}) == 0);
    CHECK(run_quiet({"simulate", "--config", cfg, "--replicas", "60"}) == 0);
    std::size_t count = 0;
    for (const auto& e : fs::directory_iterator(dir / "out")) {
      (void)e;
      ++count;
    }
    CHECK(count == 3);  // three distinct effective configs, three directories
  }

  TEST_CASE("svg plots are well formed") {
    PlotSeries s;
    s.label = "err <h>";
    s.x = {0.1, 0.05, 0.025};
    s.y = {0.2, 0.1, 0.05};
    const std::string svg = svg_loglog({s}, "h", "error");
    CHECK(svg.find("<svg") == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("err &lt;h&gt;") != std::string::npos);
    CHECK(svg.find("polyline") != std::string::npos);

    const std::string empty = svg_loglog({}, "x", "y");
    CHECK(empty.find("no positive data") != std::string::npos);

    PlotSeries flat;
    flat.x = {1.0};
    flat.y = {1.0};
    CHECK(svg_loglog({flat}, "x", "y").find("<svg") == 0);
  }
}
