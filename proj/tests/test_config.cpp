#include <filesystem>
#include <fstream>
#include <catch_amalgamated.hpp>

#include "urgate/config.hpp"
#include "urgate/runner.hpp"

using namespace urgate;

TEST_CASE("config round trip is the identity") {
  ExperimentConfig c;
  c.task = "adding";
  c.n = 200;
  c.cell = "gru";
  c.variant = "OR";
  c.hidden = 96;
  c.train.learning_rate = 5e-4;
  c.train.init_seed = 11;
  c.train.data_seed = 12;
  c.sweep_variants = {"UR", "--"};
  c.sweep_seeds = {1, 2, 3};
  c.output_dir = "out";

  nlohmann::json j = config_to_json(c);
  ExperimentConfig c2 = config_from_json(j);
  CHECK(config_to_json(c2) == j);
  CHECK(c2.variant == "OR");
  CHECK(c2.train.init_seed == 11);
  CHECK(c2.sweep_seeds == std::vector<std::uint64_t>{1, 2, 3});
}

TEST_CASE("unknown keys are rejected at every level") {
  nlohmann::json j = config_to_json(ExperimentConfig{});
  j["bogus"] = 1;
  CHECK_THROWS_WITH(config_from_json(j),
                    Catch::Matchers::ContainsSubstring("bogus"));
  j.erase("bogus");
  j["train"]["lr"] = 0.1;  // must be learning_rate
  CHECK_THROWS_WITH(config_from_json(j), Catch::Matchers::ContainsSubstring("lr"));
  j["train"].erase("lr");
  j["model"]["cells"] = "lstm";
  CHECK_THROWS_AS(config_from_json(j), std::invalid_argument);
}

TEST_CASE("validation") {
  ExperimentConfig c;
  c.variant = "XX";
  CHECK_THROWS_WITH(c.validate(), Catch::Matchers::ContainsSubstring("UR"));
  c = ExperimentConfig{};
  c.task = "mystery";
  CHECK_THROWS_WITH(c.validate(),
                    Catch::Matchers::ContainsSubstring("mystery"));
  c = ExperimentConfig{};
  c.task = "pixel";  // needs data paths
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = ExperimentConfig{};
  c.variant = "OM";
  c.downsize_c = 3;
  c.hidden = 128;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = ExperimentConfig{};
  c.train.learning_rate = -1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("load_config") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "urgate_cfg_test";
  fs::create_directories(dir);
  const std::string path = (dir / "c.json").string();
  {
    std::ofstream out(path);
    out << R"({"task":{"name":"copy","n":10},"model":{"variant":"UR","hidden":16}})";
  }
  ExperimentConfig c = load_config(path);
  CHECK(c.task == "copy");
  CHECK(c.n == 10);
  CHECK(c.hidden == 16);
  CHECK_THROWS_WITH(load_config((dir / "nope.json").string()),
                    Catch::Matchers::ContainsSubstring("cannot open"));
}

TEST_CASE("sweep aggregation") {
  auto rec = [](long step, double loss) {
    MetricsRecord r;
    r.step = step;
    r.eval_loss = loss;
    return r;
  };
  std::map<std::string, std::vector<std::vector<MetricsRecord>>> runs;
  runs["UR"] = {{rec(10, 3.0), rec(20, 1.0)},
                {rec(10, 1.0), rec(20, 0.5)},
                {rec(10, 2.0), rec(20, 0.7)}};
  std::vector<SweepRow> rows = aggregate_sweep({"UR"}, runs, 0.2, 0.8);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].step == 10);
  CHECK(rows[0].median == 2.0);  // middle of three curves
  CHECK(rows[1].median == 0.7);
  CHECK(rows[0].q_lo >= 1.0);
  CHECK(rows[0].q_hi <= 3.0);

  // single run: the aggregate equals the run
  std::map<std::string, std::vector<std::vector<MetricsRecord>>> one;
  one["--"] = {{rec(10, 2.5)}};
  std::vector<SweepRow> r1 = aggregate_sweep({"--"}, one, 0.2, 0.8);
  REQUIRE(r1.size() == 1);
  CHECK(r1[0].median == 2.5);
  CHECK(r1[0].q_lo == 2.5);
  CHECK(r1[0].q_hi == 2.5);
}

TEST_CASE("quantile interpolation") {
  std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  CHECK(quantile_sorted(v, 0.5) == 2.5);
  CHECK(quantile_sorted(v, 0.0) == 1.0);
  CHECK(quantile_sorted(v, 1.0) == 4.0);
  CHECK_THROWS_AS(quantile_sorted({}, 0.5), std::invalid_argument);
}
