#include <catch_amalgamated.hpp>

#include <nlohmann/json.hpp>

#include "urgate/runner.hpp"

using namespace urgate;

TEST_CASE("cross entropy masked") {
  const int C = 8, B = 4;
  std::vector<Matrix> logits(3);
  std::vector<std::vector<int>> targets(3);
  std::vector<char> mask = {0, 1, 1};

  logits[1] = Matrix::Zero(C, B);  // uniform
  targets[1] = {0, 3, 5, 7};
  logits[2] = Matrix::Zero(C, B);
  targets[2] = {1, 1, 2, 2};
  for (int b = 0; b < B; ++b) logits[2](targets[2][b], b) = 50.0;  // confident

  const double uniform_loss = cross_entropy_masked(
      {logits[1]}, {targets[1]}, {1});
  CHECK(uniform_loss == Catch::Approx(std::log(8.0)).epsilon(1e-12));
  const double confident = cross_entropy_masked({logits[2]}, {targets[2]}, {1});
  CHECK(confident < 1e-12);
  // mean over the two masked steps
  CHECK(cross_entropy_masked(logits, targets, mask) ==
        Catch::Approx(0.5 * (uniform_loss + confident)).epsilon(1e-12));

  CHECK_THROWS_WITH(cross_entropy_masked(logits, targets, {0, 0, 0}),
                    Catch::Matchers::ContainsSubstring("empty mask"));

  // loss ignores logits at unmasked steps entirely
  std::vector<Matrix> tampered = logits;
  tampered[0] = Matrix::Constant(C, B, 123.0);
  CHECK(cross_entropy_masked(tampered, targets, mask) ==
        cross_entropy_masked(logits, targets, mask));

  // gradient sums to zero per column and points away from the target
  std::vector<Matrix> dl;
  cross_entropy_masked({logits[1]}, {targets[1]}, {1}, &dl);
  CHECK(dl[0].col(0).sum() == Catch::Approx(0.0).margin(1e-12));
  CHECK(dl[0](0, 0) < 0.0);
}

TEST_CASE("mse loss") {
  Eigen::RowVectorXd pred(2);
  pred << 1.0, 2.0;
  Vector tgt(2);
  tgt << 1.0, 2.0;
  CHECK(mse_loss(pred, tgt) == 0.0);
  pred << 1.5, 2.5;
  Eigen::RowVectorXd dp;
  CHECK(mse_loss(pred, tgt, &dp) == Catch::Approx(0.25).epsilon(1e-14));
  CHECK(dp(0) == Catch::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("adam") {
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  Matrix w = Matrix::Constant(1, 1, 1.0);
  Matrix g = Matrix::Zero(1, 1);
  std::vector<Matrix*> params{&w}, grads{&g};
  AdamState st = make_adam_state(params);

  SECTION("zero gradient leaves parameters unchanged") {
    adam_step(params, grads, st, cfg);
    CHECK(w(0, 0) == 1.0);
  }
  SECTION("first step moves by about lr") {
    g(0, 0) = 0.37;
    adam_step(params, grads, st, cfg);
    CHECK(1.0 - w(0, 0) == Catch::Approx(cfg.learning_rate).epsilon(1e-6));
  }
  SECTION("lr zero freezes parameters while moments decay") {
    cfg.learning_rate = 0.0;
    g(0, 0) = 2.0;
    for (int k = 0; k < 5; ++k) adam_step(params, grads, st, cfg);
    CHECK(w(0, 0) == 1.0);
    CHECK(st.m[0](0, 0) != 0.0);
  }
  SECTION("converges on a quadratic") {
    g(0, 0) = 2.0 * w(0, 0);  // d/dw w^2
    for (int k = 0; k < 100; ++k) {
      g(0, 0) = 2.0 * w(0, 0);
      adam_step(params, grads, st, cfg);
    }
    CHECK(std::abs(w(0, 0)) < 0.05);
  }
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.clip_norm = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.batch = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("training determinism and metrics") {
  ExperimentConfig cfg;
  cfg.task = "copy";
  cfg.n = 5;
  cfg.hidden = 12;
  cfg.variant = "UR";
  cfg.train.steps = 30;
  cfg.train.eval_interval = 10;
  cfg.train.eval_batch = 16;
  cfg.train.batch = 4;
  cfg.train.init_seed = 3;
  cfg.train.data_seed = 4;

  std::ostringstream j1, j2;
  RunResult a = run_one(cfg, &j1);
  RunResult b = run_one(cfg, &j2);
  CHECK(j1.str() == j2.str());
  REQUIRE(!a.records.empty());
  long prev = 0;
  for (const MetricsRecord& r : a.records) {
    CHECK(r.step > prev);
    prev = r.step;
  }

  // JSONL schema and field order
  const std::string line = metrics_jsonl_line(a.records[0], "UR", 3);
  CHECK(line.rfind("{\"step\":", 0) == 0);
  CHECK(line.find("\"loss\":") < line.find("\"eval_loss\":"));
  CHECK(line.find("\"eval_loss\":") < line.find("\"variant\":"));
  auto parsed = nlohmann::json::parse(line);
  CHECK(parsed["step"] == a.records[0].step);
  CHECK(parsed["variant"] == "UR");
  CHECK(parsed["seed"] == 3);
  CHECK(parsed["loss"].is_number());
  CHECK(parsed["eval_loss"].is_number());
}

TEST_CASE("divergence is caught") {
  ExperimentConfig cfg;
  cfg.task = "adding";
  cfg.n = 4;
  cfg.hidden = 8;
  cfg.variant = "--";
  cfg.train.steps = 5;
  cfg.train.eval_interval = 1;
  cfg.train.eval_batch = 4;
  cfg.train.batch = 2;

  SourceSpec src = build_source(cfg);
  Rng rng(1, 0);
  Model m = make_model(cfg.cell_kind(), cfg.gate_config(), src.input_dim,
                       cfg.hidden, src.output_dim, rng);
  m.Wy(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(train_loop(m, src.source, cfg.train), Diverged);

  RunResult r = run_one(cfg);  // healthy run does not diverge
  CHECK_FALSE(r.diverged);
}

TEST_CASE("post-clip gradient norm invariant") {
  ExperimentConfig cfg;
  cfg.task = "copy";
  cfg.n = 4;
  cfg.hidden = 8;
  cfg.variant = "U-";
  SourceSpec src = build_source(cfg);
  Rng init(7, 0), data(8, 1);
  Model m = make_model(cfg.cell_kind(), cfg.gate_config(), src.input_dim,
                       cfg.hidden, src.output_dim, init);
  for (int step = 0; step < 10; ++step) {
    TaskBatch tb = src.source(4, data);
    Model grads = m.zeros_like();
    forward_loss(m, tb, &grads);
    std::vector<Matrix*> gs = grads.tensors();
    clip_by_global_norm(gs, 1.0);
    std::vector<const Matrix*> cgs(gs.begin(), gs.end());
    CHECK(global_norm(cgs) <= 1.0 + 1e-9);
  }
}

TEST_CASE("forget bias offset applies to every auxiliary layout") {
  Rng rng(9);
  Model m = make_model(CellKind::Lstm, GateConfig::from_name("-R"), 2, 4, 1, rng);
  apply_forget_bias_offset(m, 6.0);
  CHECK(m.cell.bf(0, 0) == 6.0);
  CHECK(m.cell.ba(0, 0) == -6.0);

  Model mm = make_model(CellKind::Lstm, GateConfig::from_name("UM"), 2, 4, 1, rng);
  apply_forget_bias_offset(mm, 6.0);
  CHECK(mm.cell.bmf(0, 0) == 6.0);
  CHECK(mm.cell.bmi(0, 0) == -6.0);

  // effective forget activations start near sigma(6)
  ExperimentConfig cfg;
  cfg.task = "forgetting";
  cfg.n = 10;
  cfg.hidden = 16;
  cfg.variant = "--";
  SourceSpec src = build_source(cfg);
  Model fm = make_model(cfg.cell_kind(), cfg.gate_config(), src.input_dim,
                        cfg.hidden, src.output_dim, rng);
  apply_forget_bias_offset(fm, 6.0);
  Rng data(10, 1);
  TaskBatch tb = src.source(8, data);
  Vector means = record_forget_unit_means(fm, tb);
  CHECK(means.mean() == Catch::Approx(sigmoid(6.0)).margin(0.01));
}
