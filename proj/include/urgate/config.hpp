// Experiment configuration: a single JSON document with strict key
// checking (unknown keys are errors). Parse -> serialize -> parse is the
// identity.

#ifndef URGATE_CONFIG_HPP
#define URGATE_CONFIG_HPP

#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "urgate/cells.hpp"
#include "urgate/train.hpp"

namespace urgate {

struct ExperimentConfig {
  // task
  std::string task = "copy";  // copy | adding | forgetting | pixel
  int n = 100;                // sequence length for copy/adding/forgetting
  std::string images_path;    // pixel task
  std::string labels_path;
  bool bit_reversal = false;
  double bias_offset = 6.0;   // forgetting task

  // model
  std::string cell = "lstm";
  std::string variant = "UR";
  int hidden = 128;
  double forget_bias = 1.0;
  int t_max = 0;
  double eps = 0.0;
  int downsize_c = 1;

  // training
  TrainConfig train;
  double stop_at_eval_loss = 0.0;  // 0 disables early stop

  // sweep
  std::vector<std::string> sweep_variants;
  std::vector<std::uint64_t> sweep_seeds;
  double quantile_lo = 0.2;
  double quantile_hi = 0.8;

  std::string output_dir;

  GateConfig gate_config() const {
    GateConfig g = GateConfig::from_name(variant);
    g.forget_bias = forget_bias;
    g.t_max = t_max;
    g.eps = eps;
    g.downsize_c = downsize_c;
    return g;
  }
  CellKind cell_kind() const { return cell_from_name(cell); }

  void validate() const {
    if (task != "copy" && task != "adding" && task != "forgetting" &&
        task != "pixel") {
      throw std::invalid_argument("task must be one of: copy adding "
                                  "forgetting pixel (got \"" + task + "\")");
    }
    if (task == "pixel" && (images_path.empty() || labels_path.empty())) {
      throw std::invalid_argument("pixel task requires images and labels paths");
    }
    cell_kind();
    gate_config().validate(hidden);
    train.validate();
    for (const std::string& v : sweep_variants) GateConfig::from_name(v);
  }
};

namespace detail {
inline void check_keys(const nlohmann::json& j,
                       std::initializer_list<const char*> allowed,
                       const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok) {
      throw std::invalid_argument("unknown key \"" + it.key() + "\" in " +
                                  where);
    }
  }
}
}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  detail::check_keys(j, {"task", "model", "train", "seeds", "sweep",
                         "output_dir"},
                     "config");
  ExperimentConfig c;
  if (j.contains("task")) {
    const auto& t = j.at("task");
    detail::check_keys(t, {"name", "n", "images", "labels", "bit_reversal",
                           "bias_offset"},
                       "task");
    c.task = t.value("name", c.task);
    c.n = t.value("n", c.n);
    c.images_path = t.value("images", c.images_path);
    c.labels_path = t.value("labels", c.labels_path);
    c.bit_reversal = t.value("bit_reversal", c.bit_reversal);
    c.bias_offset = t.value("bias_offset", c.bias_offset);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    detail::check_keys(m, {"cell", "variant", "hidden", "forget_bias", "t_max",
                           "eps", "downsize_c"},
                       "model");
    c.cell = m.value("cell", c.cell);
    c.variant = m.value("variant", c.variant);
    c.hidden = m.value("hidden", c.hidden);
    c.forget_bias = m.value("forget_bias", c.forget_bias);
    c.t_max = m.value("t_max", c.t_max);
    c.eps = m.value("eps", c.eps);
    c.downsize_c = m.value("downsize_c", c.downsize_c);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    detail::check_keys(t, {"learning_rate", "beta1", "beta2", "adam_eps",
                           "clip_norm", "batch", "steps", "eval_interval",
                           "eval_batch", "deterministic", "stop_at_eval_loss"},
                       "train");
    c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
    c.train.beta1 = t.value("beta1", c.train.beta1);
    c.train.beta2 = t.value("beta2", c.train.beta2);
    c.train.adam_eps = t.value("adam_eps", c.train.adam_eps);
    c.train.clip_norm = t.value("clip_norm", c.train.clip_norm);
    c.train.batch = t.value("batch", c.train.batch);
    c.train.steps = t.value("steps", c.train.steps);
    c.train.eval_interval = t.value("eval_interval", c.train.eval_interval);
    c.train.eval_batch = t.value("eval_batch", c.train.eval_batch);
    c.train.deterministic = t.value("deterministic", c.train.deterministic);
    c.stop_at_eval_loss = t.value("stop_at_eval_loss", c.stop_at_eval_loss);
  }
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    detail::check_keys(s, {"init", "data"}, "seeds");
    c.train.init_seed = s.value("init", c.train.init_seed);
    c.train.data_seed = s.value("data", c.train.data_seed);
  }
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    detail::check_keys(s, {"variants", "seeds", "quantile_lo", "quantile_hi"},
                       "sweep");
    c.sweep_variants =
        s.value("variants", std::vector<std::string>{});
    c.sweep_seeds = s.value("seeds", std::vector<std::uint64_t>{});
    c.quantile_lo = s.value("quantile_lo", c.quantile_lo);
    c.quantile_hi = s.value("quantile_hi", c.quantile_hi);
  }
  c.output_dir = j.value("output_dir", c.output_dir);
  return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["task"] = {{"name", c.task},
               {"n", c.n},
               {"images", c.images_path},
               {"labels", c.labels_path},
               {"bit_reversal", c.bit_reversal},
               {"bias_offset", c.bias_offset}};
  j["model"] = {{"cell", c.cell},
                {"variant", c.variant},
                {"hidden", c.hidden},
                {"forget_bias", c.forget_bias},
                {"t_max", c.t_max},
                {"eps", c.eps},
                {"downsize_c", c.downsize_c}};
  j["train"] = {{"learning_rate", c.train.learning_rate},
                {"beta1", c.train.beta1},
                {"beta2", c.train.beta2},
                {"adam_eps", c.train.adam_eps},
                {"clip_norm", c.train.clip_norm},
                {"batch", c.train.batch},
                {"steps", c.train.steps},
                {"eval_interval", c.train.eval_interval},
                {"eval_batch", c.train.eval_batch},
                {"deterministic", c.train.deterministic},
                {"stop_at_eval_loss", c.stop_at_eval_loss}};
  j["seeds"] = {{"init", c.train.init_seed}, {"data", c.train.data_seed}};
  j["sweep"] = {{"variants", c.sweep_variants},
                {"seeds", c.sweep_seeds},
                {"quantile_lo", c.quantile_lo},
                {"quantile_hi", c.quantile_hi}};
  j["output_dir"] = c.output_dir;
  return j;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path);
  nlohmann::json j;
  in >> j;
  ExperimentConfig c = config_from_json(j);
  c.validate();
  return c;
}

}  // namespace urgate

#endif  // URGATE_CONFIG_HPP
