#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

#include "doctest.h"
#include "opme/config.hpp"
#include "opme/experiment.hpp"
#include "opme/serialize.hpp"
#include "support.hpp"

using namespace opme;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per call, removed on destruction.
struct ScratchDir {
  fs::path path;
  explicit ScratchDir(const std::string& tag) {
    static int counter = 0;
    path = fs::temp_directory_path() / ("opme_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

std::vector<std::string> violations_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ValidationError& e) {
    return e.violations();
  }
  return {};
}

bool mentions(const std::vector<std::string>& items, const std::string& needle) {
  for (const auto& s : items)
    if (s.find(needle) != std::string::npos) return true;
  return false;
}

const char* kSmallConfig = R"(
name: small
environment:
  generator: recsys-small
  seed: 3
run:
  episodes: 10
  seeds: [0, 1]
  evaluation_cadence: 5
  beta_scale: 0.05
diagnostics:
  naive_baseline: true
)";

}  // namespace

TEST_CASE("a minimal config takes the defaults") {
  const ScenarioConfig cfg = parse_config("environment: {generator: contract-small}\n");
  CHECK(cfg.name == "experiment");
  CHECK(cfg.run.episodes == 100);
  CHECK(cfg.run.delta == 0.1);
  CHECK(cfg.run.seeds == std::vector<std::uint64_t>{0});
  CHECK(cfg.run.optimism == OptimismMode::ExactEnumeration);
  CHECK(cfg.classes.closures.closure_f);
  CHECK(cfg.checkpoints().back() == 100);
  CHECK(cfg.checkpoints().size() == 100);
}

TEST_CASE("config errors are collected") {
  const auto v = violations_of(R"(
environment: {generator: recsys-small, colour: red}
run: {episodes: 0, seeds: [1, 2, 1]}
)");
  CHECK(mentions(v, "environment.colour"));
  CHECK(mentions(v, "run.episodes"));
  CHECK(mentions(v, "run.seeds"));
  CHECK(v.size() >= 3);
  CHECK(mentions(violations_of("environment: {generator: no-such-thing}\n"), "generator"));
  CHECK(mentions(violations_of("run: {episodes: 3}\n"), "environment.generator"));
  CHECK(mentions(violations_of("environment: {generator: recsys-small}\nrun: {delta: 2}\n"), "run.delta"));
  CHECK_THROWS_AS(parse_config("environment: [unclosed\n"), ParseError);
}

TEST_CASE("overrides replace values and create sections") {
  const ScenarioConfig cfg =
      parse_config(kSmallConfig, {{"run.beta_scale", "0.5"}, {"run.seeds", "[4, 5, 6]"}, {"output.formats", "[json]"}});
  CHECK(cfg.run.beta_scale == 0.5);
  CHECK(cfg.run.seeds == std::vector<std::uint64_t>{4, 5, 6});
  CHECK_FALSE(cfg.output.csv);
  CHECK_THROWS_AS(parse_config(kSmallConfig, {{"run..x", "1"}}), ValidationError);
  CHECK_THROWS_AS(parse_config(kSmallConfig, {{"run.bogus", "1"}}), ValidationError);
}

TEST_CASE("sweep parameters") {
  const auto [key, values] = parse_sweep_param("run.beta_scale=0.1,0.2,0.4");
  CHECK(key == "run.beta_scale");
  CHECK(values == std::vector<std::string>{"0.1", "0.2", "0.4"});
  CHECK_THROWS_AS(parse_sweep_param("run.beta_scale"), ValidationError);
  CHECK_THROWS_AS(parse_sweep_param("=1,2"), ValidationError);
}

TEST_CASE("built scenarios honour size assertions and grid options") {
  CHECK_NOTHROW(build_scenario(parse_config("environment: {generator: recsys-small, horizon: 3}\n")));
  CHECK_THROWS_AS(build_scenario(parse_config("environment: {generator: recsys-small, horizon: 4}\n")),
                  ValidationError);
  const Scenario dyn = build_scenario(parse_config("environment: {generator: dyn-1d, grid_cells: 12}\n"));
  CHECK(dyn.env.num_states == 12);
  CHECK_THROWS_AS(build_scenario(parse_config("environment: {generator: recsys-small, grid_cells: 12}\n")),
                  ValidationError);
}

TEST_CASE("inline tables round trip through the config") {
  const Scenario base = make_scenario("contract-small", 2, {false, false, {}});
  ScratchDir dir("inline");
  {
    std::ofstream(dir.path / "model.json") << model_to_json(base.env);
    std::ofstream(dir.path / "classes.json") << classes_to_json(base.classes);
  }
  const std::string text =
      "environment: {generator: inline, tables_file: model.json}\nclasses: {tables_file: classes.json}\n";
  const Scenario built = build_scenario(parse_config(text, {}, dir.path));
  const Scenario closed = make_scenario("contract-small", 2);
  CHECK(model_to_json(built.env) == model_to_json(closed.env));
  CHECK(classes_to_json(built.classes) == classes_to_json(closed.classes));
}

TEST_CASE("every built-in scenario validates and is realizable") {
  for (const auto& name : scenario_names()) {
    CAPTURE(name);
    const Scenario sc = make_scenario(name, 5);
    CHECK_NOTHROW(sc.env.validate());
    CHECK_NOTHROW(sc.classes.validate(sc.env));
    CHECK(check_realizability(sc.env, sc.classes).all_pass());
    const Scenario again = make_scenario(name, 5);
    CHECK(model_to_json(again.env) == model_to_json(sc.env));
  }
  CHECK_THROWS_AS(make_scenario("nope", 1), ConfigError);
}

TEST_CASE("models and classes survive a JSON round trip") {
  for (const auto& name : scenario_names()) {
    CAPTURE(name);
    const Scenario sc = make_scenario(name, 9);
    const std::string mj = model_to_json(sc.env);
    CHECK(model_to_json(model_from_json(mj)) == mj);
    const std::string cj = classes_to_json(sc.classes);
    CHECK(classes_to_json(classes_from_json(cj)) == cj);
  }
  CHECK_THROWS_AS(model_from_json("{\"horizon\": 1}"), ParseError);
  CHECK_THROWS_AS(model_from_json("not json"), ParseError);
}

TEST_CASE("doubles print in shortest round-trip form") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-0.0) == "0");
  CHECK(format_double(1.0 / 0.0) == "inf");
  CHECK(format_double(std::nan("")) == "nan");
  for (double x : {1.0 / 3.0, 2.5e-300, 123456789.123})
    CHECK(std::stod(format_double(x)) == x);
}

TEST_CASE("experiment layout, determinism and summary") {
  const ScenarioConfig cfg = parse_config(kSmallConfig);
  ScratchDir a("run_a"), b("run_b");
  const ExperimentOutcome ra = run_experiment(cfg, a.path);
  const ExperimentOutcome rb = run_experiment(cfg, b.path);
  REQUIRE(ra.exit_code == kExitOk);
  REQUIRE(rb.exit_code == kExitOk);

  for (const char* f : {"manifest.json", "summary.csv", "seed_0/manifest.json", "seed_0/episodes.csv",
                        "seed_0/diagnostics.json", "seed_1/episodes.csv"})
    CHECK(fs::exists(a.path / f));

  for (const char* f : {"seed_0/episodes.csv", "seed_1/episodes.csv"}) {
    // Identical apart from the timing column.
    auto strip = [](std::vector<std::vector<std::string>> rows) {
      for (auto& r : rows) r.pop_back();
      return rows;
    };
    CHECK(strip(read_csv(a.path / f)) == strip(read_csv(b.path / f)));
  }

  const auto summary = read_csv(a.path / "summary.csv");
  REQUIRE(summary.size() == 3);
  CHECK(summary[0] == std::vector<std::string>{"checkpoint", "num_seeds", "mean_cum_regret", "std_cum_regret",
                                               "coverage"});

  // Recompute the checkpoint statistics from the per-seed files.
  std::map<int, std::vector<double>> at;
  for (const char* f : {"seed_0/episodes.csv", "seed_1/episodes.csv"}) {
    const auto rows = read_csv(a.path / f);
    REQUIRE(rows.size() == 11);
    CHECK(rows[0][0] == "seed");
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const int k = std::stoi(rows[i][1]);
      if (k == 5 || k == 10) at[k].push_back(std::stod(rows[i][3]));
    }
  }
  for (std::size_t r = 1; r <= 2; ++r) {
    const int k = std::stoi(summary[r][0]);
    CHECK(k == static_cast<int>(5 * r));
    const auto ms = testing::mean_std(at[k]);
    CHECK(std::stoi(summary[r][1]) == 2);
    CHECK(std::stod(summary[r][2]) == doctest::Approx(ms.mean).epsilon(1e-12));
    CHECK(std::stod(summary[r][3]) == doctest::Approx(ms.sd).epsilon(1e-12));
  }
  const std::string manifest = slurp(a.path / "seed_0" / "manifest.json");
  CHECK(manifest.find("\"status\": \"ok\"") != std::string::npos);
}

TEST_CASE("output root comes from the environment") {
  ScenarioConfig cfg = parse_config(kSmallConfig);
  ::setenv("OPME_OUTPUT_ROOT", "/tmp/opme-root", 1);
  CHECK(resolve_output_dir(cfg) == fs::path("/tmp/opme-root/small"));
  cfg.output.directory = "elsewhere";
  CHECK(resolve_output_dir(cfg) == fs::path("/tmp/opme-root/elsewhere"));
  cfg.output.directory = "/abs/place";
  CHECK(resolve_output_dir(cfg) == fs::path("/abs/place"));
  ::unsetenv("OPME_OUTPUT_ROOT");
  cfg.output.directory.clear();
  CHECK(resolve_output_dir(cfg) == fs::path("results/small"));
}

TEST_CASE("validate and sweep from files") {
  ScratchDir dir("files");
  std::ofstream(dir.path / "good.yaml") << kSmallConfig;
  std::ofstream(dir.path / "bad.yaml") << "environment: {generator: recsys-small}\nrun: {episodes: -1}\n";
  std::ofstream(dir.path / "broken.yaml") << "environment: [\n";
  CHECK(validate_config(dir.path / "good.yaml").exit_code == kExitOk);
  const ValidationOutcome bad = validate_config(dir.path / "bad.yaml");
  CHECK(bad.exit_code == kExitValidation);
  CHECK(mentions(bad.messages, "run.episodes"));
  CHECK(validate_config(dir.path / "broken.yaml").exit_code == kExitValidation);
  CHECK(validate_config(dir.path / "missing.yaml").exit_code == kExitValidation);

  const ExperimentOutcome sw = sweep(dir.path / "good.yaml", "run.beta_scale", {"0.05", "0.2"}, dir.path / "out");
  CHECK(sw.exit_code == kExitOk);
  CHECK(fs::exists(dir.path / "out" / "sweep" / "manifest.json"));
  CHECK(fs::exists(dir.path / "out" / "sweep" / "run.beta_scale=0.05" / "summary.csv"));
  CHECK(fs::exists(dir.path / "out" / "sweep" / "run.beta_scale=0.2" / "seed_1" / "episodes.csv"));
}

TEST_CASE("diagnose writes the oracle report") {
  ScratchDir dir("diag");
  const ScenarioConfig cfg = parse_config("name: tf\nenvironment: {generator: transfer-five}\n");
  const ExperimentOutcome out = diagnose(cfg, dir.path);
  CHECK(out.exit_code == kExitOk);
  bool found = false;
  for (const auto& entry : fs::recursive_directory_iterator(dir.path)) found |= entry.path().extension() == ".json";
  CHECK(found);
}

TEST_CASE("runtime failures become an exit code, not an exception") {
  ScratchDir dir("fail");
  // Dropping the discriminator closure breaks realizability under strict mode.
  const ScenarioConfig cfg =
      parse_config("environment: {generator: recsys-small}\nclasses: {closure_f: false}\nrun: {episodes: 2}\n");
  const ExperimentOutcome out = run_experiment(cfg, dir.path);
  CHECK(out.exit_code != kExitOk);
  CHECK_FALSE(out.errors.empty());
}
