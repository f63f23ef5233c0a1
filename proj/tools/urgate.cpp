// Command-line front end. Subcommands:
//   train      train one configuration, streaming metrics JSONL
//   sweep      variants x seeds, aggregated into quantile bands (CSV)
//   analyze    gate contours, gradient-norm bounds, timescale samples,
//              activation histograms from a checkpoint
//   gradcheck  finite-difference verification of the backward pass
//   gen-data   synthetic IDX image/label pair for the pixel task
//
// Exit codes: 0 success, 1 configuration error, 2 divergence,
// 3 gradient check failure.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "urgate/analysis.hpp"
#include "urgate/gradcheck.hpp"
#include "urgate/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitDiverged = 2;
constexpr int kExitGradcheck = 3;

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  long long seed = -1;
  bool deterministic = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool config_required) {
  auto* c = cmd->add_option("--config", o.config_path, "experiment config (JSON)");
  if (config_required) c->required();
  cmd->add_option("--out", o.out_dir, "output directory (overrides config)");
  cmd->add_option("--seed", o.seed, "initialization seed (overrides config)");
  cmd->add_flag("--deterministic", o.deterministic,
                "force single-threaded deterministic execution");
}

urgate::ExperimentConfig resolve_config(const CommonOpts& o) {
  urgate::ExperimentConfig cfg = urgate::load_config(o.config_path);
  if (!o.out_dir.empty()) cfg.output_dir = o.out_dir;
  if (o.seed >= 0) cfg.train.init_seed = static_cast<std::uint64_t>(o.seed);
  if (o.deterministic) cfg.train.deterministic = true;
  cfg.validate();
  return cfg;
}

int cmd_train(const CommonOpts& o) {
  urgate::ExperimentConfig cfg = resolve_config(o);
  urgate::RunResult res;
  if (cfg.output_dir.empty()) {
    res = urgate::run_one(cfg, &std::cout);
  } else {
    res = urgate::run_one_to_dir(cfg);
    for (const urgate::MetricsRecord& r : res.records) {
      std::cout << urgate::metrics_jsonl_line(
                       r, cfg.variant, static_cast<int>(cfg.train.init_seed))
                << '\n';
    }
  }
  if (res.diverged) {
    std::cerr << "diverged at step " << res.diverged_step << '\n';
    return kExitDiverged;
  }
  return kExitOk;
}

int cmd_sweep(const CommonOpts& o) {
  urgate::ExperimentConfig cfg = resolve_config(o);
  if (cfg.train.deterministic) setenv("URGATE_THREADS", "1", 1);
  urgate::SweepResult res = urgate::run_sweep(cfg);
  const std::size_t n_runs =
      std::max<std::size_t>(1, cfg.sweep_variants.size()) *
      std::max<std::size_t>(1, cfg.sweep_seeds.size());
  std::cerr << "sweep: " << n_runs << " runs, " << res.diverged_runs
            << " diverged, " << res.rows.size() << " aggregate rows\n";
  for (const urgate::SweepRow& r : res.rows) {
    std::cout << r.step << ',' << r.variant << ',' << r.median << ',' << r.q_lo
              << ',' << r.q_hi << '\n';
  }
  if (res.diverged_runs > 0 &&
      static_cast<std::size_t>(res.diverged_runs) == n_runs) {
    return kExitDiverged;
  }
  return kExitOk;
}

struct AnalyzeOpts {
  std::string out_dir = ".";
  std::string contour, bounds, timescales, histogram;
  std::string checkpoint;
  std::string variant = "UR";
  int hidden = 128;
  int samples = 10000;
  int grid = 101;
  long long seed = 0;
  std::string task = "copy";
  int n = 100;
  int batch = 64;
};

int cmd_analyze(const AnalyzeOpts& o) {
  namespace fs = std::filesystem;
  fs::create_directories(o.out_dir);
  auto path = [&](const std::string& name) {
    return (fs::path(o.out_dir) / name).string();
  };
  if (!o.contour.empty()) {
    urgate::Vector f = urgate::Vector::LinSpaced(o.grid, 0.0, 1.0);
    urgate::Vector r = urgate::Vector::LinSpaced(o.grid, 0.0, 1.0);
    urgate::write_contour_csv(f, r, urgate::g_contour(f, r), path(o.contour));
  }
  if (!o.bounds.empty()) {
    std::vector<urgate::GradNormBound> bounds;
    for (int i = 1; i < o.grid; ++i) {
      bounds.push_back(
          urgate::grad_norm_bounds(static_cast<double>(i) / o.grid));
    }
    urgate::write_bounds_csv(bounds, path(o.bounds));
  }
  if (!o.timescales.empty()) {
    urgate::GateConfig gc = urgate::GateConfig::from_name(o.variant);
    urgate::Rng rng(static_cast<std::uint64_t>(o.seed));
    urgate::write_timescale_csv(
        urgate::timescale_sampler(gc, o.hidden, o.samples, rng),
        path(o.timescales));
  }
  if (!o.histogram.empty()) {
    if (o.checkpoint.empty()) {
      throw std::invalid_argument("--histogram requires --checkpoint");
    }
    urgate::Model model = urgate::load_checkpoint(o.checkpoint);
    urgate::ExperimentConfig cfg;
    cfg.task = o.task;
    cfg.n = o.n;
    urgate::SourceSpec src = urgate::build_source(cfg);
    urgate::Rng rng(static_cast<std::uint64_t>(o.seed), 3);
    urgate::TaskBatch tb = src.source(o.batch, rng);
    urgate::Vector means = urgate::record_forget_unit_means(model, tb);
    urgate::GateHistogram h =
        urgate::gate_histogram(std::vector<urgate::Matrix>{means}, 50);
    urgate::write_histogram_csv(h, path(o.histogram));
    std::cerr << "fraction outside [0.2, 0.8]: "
              << urgate::fraction_outside(means) << '\n';
  }
  return kExitOk;
}

struct GradcheckOpts {
  std::string cell = "all";
  std::string variant = "all";
  int hidden = 8;
  int input = 4;
  int length = 5;
  int batch = 3;
  int seeds = 1;
  double tol = 1e-4;
  double corrupt = 0.0;
};

int cmd_gradcheck(const GradcheckOpts& o) {
  std::vector<urgate::CellKind> cells;
  if (o.cell == "all") {
    cells = {urgate::CellKind::Lstm, urgate::CellKind::Gru,
             urgate::CellKind::Janet};
  } else {
    cells = {urgate::cell_from_name(o.cell)};
  }
  std::vector<std::string> variants;
  if (o.variant == "all") {
    variants.assign(urgate::GateConfig::kVariantNames.begin(),
                    urgate::GateConfig::kVariantNames.end());
  } else {
    variants = {o.variant};
  }
  bool ok = true;
  for (urgate::CellKind kind : cells) {
    for (const std::string& v : variants) {
      urgate::GateConfig gc = urgate::GateConfig::from_name(v);
      double worst = 0.0;
      std::string worst_tensor;
      for (int s = 0; s < o.seeds; ++s) {
        urgate::GradCheckResult r = urgate::gradcheck_cell(
            kind, gc, o.input, o.hidden, o.length, o.batch,
            static_cast<std::uint64_t>(s + 1), 1e-5, o.corrupt);
        if (r.max_rel_err > worst) {
          worst = r.max_rel_err;
          worst_tensor = r.worst_tensor;
        }
      }
      const bool pass = worst <= o.tol;
      ok = ok && pass;
      std::cout << urgate::cell_name(kind) << ' ' << v << ": max rel err "
                << worst << " (" << worst_tensor << ") "
                << (pass ? "ok" : "FAIL") << '\n';
    }
  }
  return ok ? kExitOk : kExitGradcheck;
}

struct GenDataOpts {
  std::string images, labels;
  int count = 256;
  int rows = 8;
  int cols = 8;
  long long seed = 0;
};

int cmd_gen_data(const GenDataOpts& o) {
  urgate::write_synth_band_idx(o.images, o.labels, o.count, o.rows, o.cols,
                               static_cast<std::uint64_t>(o.seed));
  std::cerr << "wrote " << o.count << " " << o.rows << "x" << o.cols
            << " images\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gated recurrent network laboratory"};
  app.require_subcommand(1);

  CommonOpts train_opts, sweep_opts;
  AnalyzeOpts an;
  GradcheckOpts gc;
  GenDataOpts gd;

  CLI::App* train = app.add_subcommand("train", "train one configuration");
  add_common(train, train_opts, true);
  CLI::App* sweep = app.add_subcommand("sweep", "variants x seeds sweep");
  add_common(sweep, sweep_opts, true);

  CLI::App* analyze = app.add_subcommand("analyze", "analysis CSV emitters");
  analyze->add_option("--out", an.out_dir, "output directory");
  analyze->add_option("--contour", an.contour, "effective-gate contour CSV");
  analyze->add_option("--bounds", an.bounds, "gradient-norm bound CSV");
  analyze->add_option("--timescales", an.timescales, "timescale sample CSV");
  analyze->add_option("--histogram", an.histogram, "gate histogram CSV");
  analyze->add_option("--checkpoint", an.checkpoint, "checkpoint for --histogram");
  analyze->add_option("--variant", an.variant, "gate variant for --timescales");
  analyze->add_option("--hidden", an.hidden, "hidden size for --timescales");
  analyze->add_option("--samples", an.samples, "sample count");
  analyze->add_option("--grid", an.grid, "grid resolution");
  analyze->add_option("--seed", an.seed, "sampling seed");
  analyze->add_option("--task", an.task, "task for --histogram input batch");
  analyze->add_option("--n", an.n, "sequence length for --histogram");
  analyze->add_option("--batch", an.batch, "batch for --histogram");

  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference gradient check");
  gradcheck->add_option("--cell", gc.cell, "lstm | gru | janet | all");
  gradcheck->add_option("--variant", gc.variant, "gate variant or all");
  gradcheck->add_option("--hidden", gc.hidden, "hidden size");
  gradcheck->add_option("--input", gc.input, "input size");
  gradcheck->add_option("--length", gc.length, "sequence length");
  gradcheck->add_option("--batch", gc.batch, "batch size");
  gradcheck->add_option("--seeds", gc.seeds, "number of seeds");
  gradcheck->add_option("--tol", gc.tol, "max relative error");
  gradcheck->add_option("--corrupt", gc.corrupt,
                        "perturb one analytic gradient entry (negative control)");

  CLI::App* gen = app.add_subcommand("gen-data", "write a synthetic IDX pair");
  gen->add_option("--images", gd.images, "output images path")->required();
  gen->add_option("--labels", gd.labels, "output labels path")->required();
  gen->add_option("--count", gd.count, "number of images");
  gen->add_option("--rows", gd.rows, "image rows");
  gen->add_option("--cols", gd.cols, "image cols");
  gen->add_option("--seed", gd.seed, "generation seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (train->parsed()) return cmd_train(train_opts);
    if (sweep->parsed()) return cmd_sweep(sweep_opts);
    if (analyze->parsed()) return cmd_analyze(an);
    if (gradcheck->parsed()) return cmd_gradcheck(gc);
    if (gen->parsed()) return cmd_gen_data(gd);
  } catch (const urgate::Diverged& d) {
    std::cerr << "error: " << d.what() << '\n';
    return kExitDiverged;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}
