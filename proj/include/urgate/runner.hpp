// Experiment orchestration shared by the command-line tool and the
// acceptance suite: builds a batch source from a config, runs training,
// streams metrics JSONL, and aggregates sweeps into quantile bands.

#ifndef URGATE_RUNNER_HPP
#define URGATE_RUNNER_HPP

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "urgate/checkpoint.hpp"
#include "urgate/config.hpp"
#include "urgate/tasks.hpp"
#include "urgate/train.hpp"

namespace urgate {

// Worker cap for sweep runs, from the URGATE_THREADS environment variable.
inline int worker_threads() {
  const char* env = std::getenv("URGATE_THREADS");
  if (!env) return 1;
  const int n = std::atoi(env);
  return n < 1 ? 1 : n;
}

struct SourceSpec {
  BatchSource source;
  int input_dim = 0;
  int output_dim = 0;  // classes, or 1 for regression
};

inline SourceSpec build_source(const ExperimentConfig& cfg) {
  SourceSpec s;
  if (cfg.task == "copy") {
    s.source = make_copy_source(cfg.n);
    s.input_dim = 10;
    s.output_dim = 8;
  } else if (cfg.task == "adding" || cfg.task == "forgetting") {
    s.source = make_adding_source(cfg.n);
    s.input_dim = 2;
    s.output_dim = 1;
  } else if (cfg.task == "pixel") {
    auto images = std::make_shared<IdxImages>(load_idx_images(cfg.images_path));
    auto labels = std::make_shared<IdxLabels>(load_idx_labels(cfg.labels_path));
    BatchSource inner = make_pixel_source(*images, *labels, cfg.bit_reversal);
    // keep the datasets alive inside the closure
    s.source = [images, labels, inner](int batch, Rng& rng) {
      return inner(batch, rng);
    };
    s.input_dim = 1;
    s.output_dim = 10;
  } else {
    throw std::invalid_argument("unknown task " + cfg.task);
  }
  return s;
}

struct RunResult {
  std::vector<MetricsRecord> records;
  bool diverged = false;
  long diverged_step = 0;
  Model model;
};

// Trains one configuration. Metrics lines are appended to *jsonl when
// given; records survive a divergence (partial history up to the throw).
inline RunResult run_one(const ExperimentConfig& cfg,
                         std::ostream* jsonl = nullptr) {
  cfg.validate();
  SourceSpec src = build_source(cfg);
  Rng init_rng(cfg.train.init_seed, 0);
  RunResult out;
  out.model = make_model(cfg.cell_kind(), cfg.gate_config(), src.input_dim,
                         cfg.hidden, src.output_dim, init_rng);
  if (cfg.task == "forgetting") {
    apply_forget_bias_offset(out.model, cfg.bias_offset);
  }
  const int seed = static_cast<int>(cfg.train.init_seed);
  auto on_record = [&](const MetricsRecord& r) {
    out.records.push_back(r);
    if (jsonl) *jsonl << metrics_jsonl_line(r, cfg.variant, seed) << '\n';
    return cfg.stop_at_eval_loss > 0.0 && r.eval_loss <= cfg.stop_at_eval_loss;
  };
  try {
    train_loop(out.model, src.source, cfg.train, on_record);
  } catch (const Diverged& d) {
    out.diverged = true;
    out.diverged_step = d.step;
  }
  return out;
}

// As run_one, but writing metrics atomically to
// <output_dir>/metrics_<variant>_s<seed>.jsonl (tmp file + rename) and the
// final parameters next to it.
inline RunResult run_one_to_dir(const ExperimentConfig& cfg) {
  if (cfg.output_dir.empty()) return run_one(cfg);
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);
  const std::string stem = "metrics_" + cfg.variant + "_s" +
                           std::to_string(cfg.train.init_seed);
  const fs::path final_path = fs::path(cfg.output_dir) / (stem + ".jsonl");
  const fs::path tmp_path = fs::path(cfg.output_dir) / (stem + ".jsonl.tmp");
  RunResult res;
  {
    std::ofstream jsonl(tmp_path);
    if (!jsonl) {
      throw std::runtime_error("cannot open " + tmp_path.string());
    }
    res = run_one(cfg, &jsonl);
  }
  fs::rename(tmp_path, final_path);
  save_checkpoint((fs::path(cfg.output_dir) / (stem + ".ckpt")).string(),
                  res.model);
  return res;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

// Linear-interpolation quantile of a sorted sample.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  if (sorted.size() == 1) return sorted[0];
  const double h = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

struct SweepRow {
  long step = 0;
  std::string variant;
  double median = 0.0, q_lo = 0.0, q_hi = 0.0;
};

// Collapses per-seed eval curves into median and [q_lo, q_hi] bands per
// (variant, step).
inline std::vector<SweepRow> aggregate_sweep(
    const std::vector<std::string>& variants,
    const std::map<std::string, std::vector<std::vector<MetricsRecord>>>& runs,
    double lo, double hi) {
  std::vector<SweepRow> rows;
  for (const std::string& v : variants) {
    auto it = runs.find(v);
    if (it == runs.end()) continue;
    std::map<long, std::vector<double>> by_step;
    for (const auto& curve : it->second)
      for (const MetricsRecord& r : curve) by_step[r.step].push_back(r.eval_loss);
    for (auto& [step, vals] : by_step) {
      std::sort(vals.begin(), vals.end());
      SweepRow row;
      row.step = step;
      row.variant = v;
      row.median = quantile_sorted(vals, 0.5);
      row.q_lo = quantile_sorted(vals, lo);
      row.q_hi = quantile_sorted(vals, hi);
      rows.push_back(row);
    }
  }
  return rows;
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "step,variant,median,q_lo,q_hi\n";
  for (const SweepRow& r : rows) {
    out << r.step << ',' << r.variant << ',' << r.median << ',' << r.q_lo
        << ',' << r.q_hi << '\n';
  }
}

struct SweepResult {
  std::vector<SweepRow> rows;
  long diverged_runs = 0;
};

// Runs variants x seeds (falling back to the single configured
// variant/seed), up to URGATE_THREADS runs in parallel, then aggregates.
inline SweepResult run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<std::string> variants = cfg.sweep_variants;
  if (variants.empty()) variants = {cfg.variant};
  std::vector<std::uint64_t> seeds = cfg.sweep_seeds;
  if (seeds.empty()) seeds = {cfg.train.init_seed};

  struct Job {
    std::string variant;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const std::string& v : variants)
    for (std::uint64_t s : seeds) jobs.push_back({v, s});

  std::map<std::string, std::vector<std::vector<MetricsRecord>>> runs;
  long diverged = 0;
  std::mutex mu;
  std::size_t next = 0;
  auto worker = [&]() {
    for (;;) {
      std::size_t k;
      {
        std::lock_guard<std::mutex> lk(mu);
        if (next >= jobs.size()) return;
        k = next++;
      }
      ExperimentConfig rc = cfg;
      rc.variant = jobs[k].variant;
      rc.train.init_seed = jobs[k].seed;
      RunResult r = run_one_to_dir(rc);
      std::lock_guard<std::mutex> lk(mu);
      runs[jobs[k].variant].push_back(std::move(r.records));
      if (r.diverged) ++diverged;
    }
  };
  const int nthreads =
      std::min<std::size_t>(worker_threads(), jobs.size());
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  SweepResult out;
  out.rows = aggregate_sweep(variants, runs, cfg.quantile_lo, cfg.quantile_hi);
  out.diverged_runs = diverged;
  if (!cfg.output_dir.empty()) {
    write_sweep_csv(out.rows,
                    (std::filesystem::path(cfg.output_dir) / "sweep.csv")
                        .string());
  }
  return out;
}

}  // namespace urgate

#endif  // URGATE_RUNNER_HPP
