// Losses, Adam, gradient clipping and the training loop: fresh random
// batches every step, masked loss, BPTT, clip at clip_norm, Adam update.
// Deterministic given seeds.

#ifndef URGATE_TRAIN_HPP
#define URGATE_TRAIN_HPP

#include <chrono>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "urgate/cells.hpp"
#include "urgate/tasks.hpp"

namespace urgate {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 1.0;
  int batch = 32;
  long steps = 1000;
  long eval_interval = 100;
  int eval_batch = 1024;
  std::uint64_t init_seed = 0;
  std::uint64_t data_seed = 0;
  bool deterministic = true;

  void validate() const {
    if (!(learning_rate > 0.0))
      throw std::invalid_argument("learning rate must be > 0");
    if (!(clip_norm > 0.0)) throw std::invalid_argument("clip_norm must be > 0");
    if (batch < 1 || steps < 1 || eval_interval < 1)
      throw std::invalid_argument("batch/steps/eval_interval must be >= 1");
  }
};

struct MetricsRecord {
  long step = 0;
  double train_loss = 0.0;
  double eval_loss = 0.0;
  double wall_clock = 0.0;
};

// Thrown when the training loss becomes non-finite.
struct Diverged : std::runtime_error {
  long step;
  explicit Diverged(long s)
      : std::runtime_error("diverged at step " + std::to_string(s)), step(s) {}
};

// ---------------------------------------------------------------------------
// Model = recurrent cell + linear readout
// ---------------------------------------------------------------------------

struct Model {
  CellParams cell;
  Matrix Wy;  // out x hidden
  Matrix by;  // out x 1

  std::vector<std::pair<std::string, Matrix*>> named_tensors() {
    auto out = cell.named_tensors();
    out.emplace_back("Wy", &Wy);
    out.emplace_back("by", &by);
    return out;
  }
  std::vector<Matrix*> tensors() {
    std::vector<Matrix*> out;
    for (auto& [n, m] : named_tensors()) out.push_back(m);
    return out;
  }
  Model zeros_like() const {
    Model z = *this;
    z.cell = cell.zeros_like();
    z.Wy.setZero();
    z.by.setZero();
    return z;
  }
};

inline Model make_model(CellKind kind, const GateConfig& cfg, int input,
                        int hidden, int output, Rng& rng) {
  Model m;
  m.cell = make_cell_params(kind, cfg, input, hidden, rng);
  m.Wy = init_weight(output, hidden, rng);
  m.by = Matrix::Zero(output, 1);
  return m;
}

// Sets every forget-gate bias to a constant (the synthetic forgetting
// scenario); the auxiliary refine bias mirrors it negated.
inline void apply_forget_bias_offset(Model& m, double offset) {
  m.cell.bf.setConstant(offset);
  if (m.cell.cfg.aux_kind == AuxKind::Refine) m.cell.ba.setConstant(-offset);
  if (m.cell.bmf.size() > 0) m.cell.bmf.setConstant(offset);
  if (m.cell.bmi.size() > 0) m.cell.bmi.setConstant(-offset);
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

// Mean negative log-likelihood over masked steps. logits[t] is
// (classes x batch) for masked t; grads (same shapes) are written to
// dlogits when non-null.
inline double cross_entropy_masked(const std::vector<Matrix>& logits,
                                   const std::vector<std::vector<int>>& targets,
                                   const std::vector<char>& mask,
                                   std::vector<Matrix>* dlogits = nullptr) {
  long scored = 0;
  for (char m : mask) scored += m ? 1 : 0;
  if (scored == 0) throw std::invalid_argument("cross_entropy_masked: empty mask");
  if (dlogits) dlogits->assign(mask.size(), Matrix());
  double total = 0.0;
  long count = 0;
  for (std::size_t t = 0; t < mask.size(); ++t) {
    if (!mask[t]) continue;
    const Matrix& L = logits[t];
    Matrix dl;
    if (dlogits) dl.resize(L.rows(), L.cols());
    for (Eigen::Index b = 0; b < L.cols(); ++b) {
      const double mx = L.col(b).maxCoeff();
      Vector e = (L.col(b).array() - mx).exp().matrix();
      const double Z = e.sum();
      const int y = targets[t][b];
      total += -(L(y, b) - mx) + std::log(Z);
      ++count;
      if (dlogits) {
        dl.col(b) = e / Z;
        dl(y, b) -= 1.0;
      }
    }
    if (dlogits) (*dlogits)[t] = std::move(dl);
  }
  if (dlogits) {
    for (auto& dl : *dlogits)
      if (dl.size() > 0) dl /= static_cast<double>(count);
  }
  return total / static_cast<double>(count);
}

// Mean squared error over the batch; gradient wrt pred when requested.
inline double mse_loss(const Eigen::RowVectorXd& pred, const Vector& target,
                       Eigen::RowVectorXd* dpred = nullptr) {
  const Eigen::Index B = pred.size();
  Eigen::RowVectorXd diff = pred - target.transpose();
  if (dpred) *dpred = 2.0 * diff / static_cast<double>(B);
  return diff.squaredNorm() / static_cast<double>(B);
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
  std::vector<Matrix> m, v;
  long t = 0;
};

inline AdamState make_adam_state(const std::vector<Matrix*>& params) {
  AdamState s;
  for (const Matrix* p : params) {
    s.m.push_back(Matrix::Zero(p->rows(), p->cols()));
    s.v.push_back(Matrix::Zero(p->rows(), p->cols()));
  }
  return s;
}

inline void adam_step(const std::vector<Matrix*>& params,
                      const std::vector<Matrix*>& grads, AdamState& st,
                      const TrainConfig& cfg) {
  ++st.t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    st.m[k] = cfg.beta1 * st.m[k] + (1.0 - cfg.beta1) * (*grads[k]);
    st.v[k] = (cfg.beta2 * st.v[k].array() +
               (1.0 - cfg.beta2) * grads[k]->array().square())
                  .matrix();
    params[k]->array() -= cfg.learning_rate * (st.m[k].array() / bc1) /
                          ((st.v[k].array() / bc2).sqrt() + cfg.adam_eps);
  }
}

// ---------------------------------------------------------------------------
// Forward + loss (+ gradients)
// ---------------------------------------------------------------------------

inline double forward_loss(Model& model, const TaskBatch& tb,
                           Model* grads_out) {
  Unrolled u = unroll(model.cell, tb.inputs,
                      make_state(model.cell.kind, model.cell.hidden, tb.batch));
  const std::size_t T = tb.inputs.size();
  double loss = 0.0;
  std::vector<Matrix> dh(T);

  if (tb.regression) {
    // Scored at the final step only.
    const Matrix& h = u.outputs[T - 1];
    Eigen::RowVectorXd pred =
        (model.Wy * h).row(0) +
        Eigen::RowVectorXd::Constant(tb.batch, model.by(0, 0));
    Eigen::RowVectorXd dpred;
    loss = mse_loss(pred, tb.reg_target, grads_out ? &dpred : nullptr);
    if (grads_out) {
      dh[T - 1] = model.Wy.transpose() * dpred;
      grads_out->Wy.row(0) += dpred * h.transpose();
      grads_out->by(0, 0) += dpred.sum();
    }
  } else {
    std::vector<Matrix> logits(T);
    for (std::size_t t = 0; t < T; ++t) {
      if (!tb.mask[t]) continue;
      logits[t] = model.Wy * u.outputs[t];
      logits[t].colwise() += model.by.col(0);
    }
    std::vector<Matrix> dlogits;
    loss = cross_entropy_masked(logits, tb.targets, tb.mask,
                                grads_out ? &dlogits : nullptr);
    if (grads_out) {
      for (std::size_t t = 0; t < T; ++t) {
        if (!tb.mask[t]) continue;
        dh[t] = model.Wy.transpose() * dlogits[t];
        grads_out->Wy.noalias() += dlogits[t] * u.outputs[t].transpose();
        grads_out->by.col(0) += dlogits[t].rowwise().sum();
      }
    }
  }
  if (grads_out) {
    grads_out->cell = unroll_backward(model.cell, u, dh);
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

// Callbacks: on_record fires at every eval interval; returning true stops
// training early (used for reached-threshold early exit).
using RecordCallback = std::function<bool(const MetricsRecord&)>;

inline std::vector<MetricsRecord> train_loop(
    Model& model, const BatchSource& source, const TrainConfig& cfg,
    const RecordCallback& on_record = nullptr) {
  cfg.validate();
  Rng data_rng(cfg.data_seed, 1);
  Rng eval_rng(cfg.data_seed, 2);
  std::vector<Matrix*> params = model.tensors();
  AdamState adam = make_adam_state(params);
  std::vector<MetricsRecord> records;
  const auto t0 = std::chrono::steady_clock::now();

  for (long step = 1; step <= cfg.steps; ++step) {
    TaskBatch tb = source(cfg.batch, data_rng);
    Model grads = model.zeros_like();
    const double loss = forward_loss(model, tb, &grads);
    if (!std::isfinite(loss)) throw Diverged(step);
    std::vector<Matrix*> gts = grads.tensors();
    clip_by_global_norm(gts, cfg.clip_norm);
    adam_step(params, gts, adam, cfg);

    if (step % cfg.eval_interval == 0 || step == cfg.steps) {
      // Fresh evaluation batch, forward pass only.
      TaskBatch eb = source(cfg.eval_batch, eval_rng);
      const double eval_loss = forward_loss(model, eb, nullptr);
      if (!std::isfinite(eval_loss)) throw Diverged(step);
      MetricsRecord rec;
      rec.step = step;
      rec.train_loss = loss;
      rec.eval_loss = eval_loss;
      rec.wall_clock =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      records.push_back(rec);
      if (on_record && on_record(rec)) break;
    }
  }
  return records;
}

// One JSONL metrics line; field order and float formatting are fixed so
// deterministic reruns are byte-identical.
inline std::string metrics_jsonl_line(const MetricsRecord& r,
                                      const std::string& variant, int seed) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "{\"step\":%ld,\"loss\":%.17g,\"eval_loss\":%.17g,"
                "\"variant\":\"%s\",\"seed\":%d}",
                r.step, r.train_loss, r.eval_loss, variant.c_str(), seed);
  return buf;
}

// Mean effective forget-gate activation per unit, reduced over time and
// batch, for one forward pass (analysis input).
inline Vector record_forget_unit_means(Model& model, const TaskBatch& tb) {
  Unrolled u = unroll(model.cell, tb.inputs,
                      make_state(model.cell.kind, model.cell.hidden, tb.batch));
  Vector acc = Vector::Zero(model.cell.hidden);
  for (const StepCache& cc : u.caches) acc += cc.F.rowwise().mean();
  return acc / static_cast<double>(u.caches.size());
}

}  // namespace urgate

#endif  // URGATE_TRAIN_HPP
