// Recurrent cells (LSTM, GRU, JANET) with exact forward passes and
// hand-derived backward passes over cached activations. All three cells
// support the full nine-variant gate ablation matrix from gatelib.
//
// Cells operate on minibatches: activations are hidden x batch matrices,
// inputs are input x batch. Single-vector entry points wrap batch size 1.
//
// Gate biases: one trainable bias vector per gate. Distributional
// initialization (uniform/chrono) is folded into those vectors at
// construction, with the auxiliary gate bias set to the negated forget bias.

#ifndef URGATE_CELLS_HPP
#define URGATE_CELLS_HPP

#include <string>
#include <utility>
#include <vector>

#include "urgate/gatelib.hpp"
#include "urgate/ndmath.hpp"

namespace urgate {

enum class CellKind { Lstm, Gru, Janet };

inline std::string cell_name(CellKind k) {
  switch (k) {
    case CellKind::Lstm: return "lstm";
    case CellKind::Gru: return "gru";
    case CellKind::Janet: return "janet";
  }
  return "?";
}

inline CellKind cell_from_name(const std::string& s) {
  if (s == "lstm") return CellKind::Lstm;
  if (s == "gru") return CellKind::Gru;
  if (s == "janet") return CellKind::Janet;
  throw std::invalid_argument("unknown cell \"" + s +
                              "\"; valid: lstm gru janet");
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

struct CellParams {
  CellKind kind = CellKind::Lstm;
  GateConfig cfg;
  int input = 0;
  int hidden = 0;

  // Weight blocks are gate x (input+hidden); biases are n x 1 columns.
  // Empty matrices mark blocks the (cell, variant) pair does not use.
  Matrix Wf, bf;    // forget gate (fine gate under master variants)
  Matrix Wa, ba;    // auxiliary: input gate (untied variants) or refine gate
  Matrix Wq, bq;    // GRU reset gate
  Matrix Wu, bu;    // candidate update
  Matrix Wo, bo;    // LSTM output gate
  Matrix Wmf, bmf;  // master forget projection (hidden/C rows)
  Matrix Wmi, bmi;  // master input projection

  bool has_aux() const {
    if (cfg.aux_kind == AuxKind::Refine) return true;
    if (cfg.aux_kind == AuxKind::Master) return kind != CellKind::Janet;
    // Untied forget/input gates only in the LSTM.
    return kind == CellKind::Lstm;
  }
  bool has_master_f() const { return cfg.aux_kind == AuxKind::Master; }
  bool has_master_i() const {
    return cfg.aux_kind == AuxKind::Master && kind != CellKind::Janet;
  }

  std::vector<std::pair<std::string, Matrix*>> named_tensors() {
    std::vector<std::pair<std::string, Matrix*>> out;
    auto add = [&](const char* n, Matrix& m) {
      if (m.size() > 0) out.emplace_back(n, &m);
    };
    add("Wf", Wf);
    add("bf", bf);
    add("Wa", Wa);
    add("ba", ba);
    add("Wq", Wq);
    add("bq", bq);
    add("Wu", Wu);
    add("bu", bu);
    add("Wo", Wo);
    add("bo", bo);
    add("Wmf", Wmf);
    add("bmf", bmf);
    add("Wmi", Wmi);
    add("bmi", bmi);
    return out;
  }
  std::vector<Matrix*> tensors() {
    std::vector<Matrix*> out;
    for (auto& [n, m] : named_tensors()) out.push_back(m);
    return out;
  }
  std::vector<const Matrix*> tensors() const {
    auto& self = const_cast<CellParams&>(*this);
    std::vector<const Matrix*> out;
    for (auto* m : self.tensors()) out.push_back(m);
    return out;
  }

  long param_count() const {
    long n = 0;
    for (const Matrix* m : tensors()) n += m->size();
    return n;
  }

  CellParams zeros_like() const {
    CellParams g = *this;
    for (Matrix* m : g.tensors()) m->setZero();
    return g;
  }
};

// Fan-in scaled uniform weights, U[-1/sqrt(fan_in), 1/sqrt(fan_in)].
inline Matrix init_weight(int rows, int cols, Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(cols));
  return rng.uniform_matrix(rows, cols, -s, s);
}

inline CellParams make_cell_params(CellKind kind, const GateConfig& cfg,
                                   int input, int hidden, Rng& rng) {
  cfg.validate(hidden);
  CellParams p;
  p.kind = kind;
  p.cfg = cfg;
  p.input = input;
  p.hidden = hidden;
  const int zdim = input + hidden;
  const int m = hidden / cfg.downsize_c;

  const BiasInit dist = make_bias_init(cfg, hidden, rng);

  p.Wf = init_weight(hidden, zdim, rng);
  p.bf = Matrix::Zero(hidden, 1);
  if (p.has_aux()) {
    p.Wa = init_weight(hidden, zdim, rng);
    p.ba = Matrix::Zero(hidden, 1);
  }
  if (kind == CellKind::Gru) {
    p.Wq = init_weight(hidden, zdim, rng);
    p.bq = Matrix::Zero(hidden, 1);
  }
  p.Wu = init_weight(hidden, zdim, rng);
  p.bu = Matrix::Zero(hidden, 1);
  if (kind == CellKind::Lstm) {
    p.Wo = init_weight(hidden, zdim, rng);
    p.bo = Matrix::Zero(hidden, 1);
  }
  if (p.has_master_f()) {
    p.Wmf = init_weight(m, zdim, rng);
    p.bmf = Matrix::Zero(m, 1);
  }
  if (p.has_master_i()) {
    p.Wmi = init_weight(m, zdim, rng);
    p.bmi = Matrix::Zero(m, 1);
  }

  // Fold the distributional bias into the trainable bias vectors.
  switch (cfg.aux_kind) {
    case AuxKind::None:
      p.bf.col(0) = dist.forget_bias;
      if (p.Wa.size() > 0) p.ba.col(0) = dist.input_bias;
      break;
    case AuxKind::Refine:
      p.bf.col(0) = dist.forget_bias;
      p.ba.col(0) = -dist.forget_bias;  // matches f's initial distribution
      break;
    case AuxKind::Master:
      p.bmf.col(0) = dist.forget_bias;
      if (p.bmi.size() > 0) p.bmi.col(0) = dist.input_bias;
      break;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Batched gate math
// ---------------------------------------------------------------------------

namespace detail {

inline void add_bias(Matrix& pre, const Matrix& b) { pre.colwise() += b.col(0); }

inline Matrix sigmoid_backward(const Matrix& d, const Matrix& act) {
  return (d.array() * act.array() * (1.0 - act.array())).matrix();
}

// Per-column cumax. Returns y = cumsum(softmax(col)); softmax values are
// written to s for the backward pass.
inline Matrix cumax_cols(const Matrix& pre, Matrix& s) {
  s.resize(pre.rows(), pre.cols());
  Matrix y(pre.rows(), pre.cols());
  for (Eigen::Index c = 0; c < pre.cols(); ++c) {
    const double mx = pre.col(c).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index r = 0; r < pre.rows(); ++r) {
      const double e = std::exp(pre(r, c) - mx);
      s(r, c) = e;
      sum += e;
    }
    double acc = 0.0;
    for (Eigen::Index r = 0; r < pre.rows(); ++r) {
      s(r, c) /= sum;
      acc += s(r, c);
      y(r, c) = acc;
    }
  }
  return y;
}

inline Matrix cumax_cols_backward(const Matrix& dy, const Matrix& s) {
  Matrix dp(dy.rows(), dy.cols());
  for (Eigen::Index c = 0; c < dy.cols(); ++c) {
    // ds_j = sum_{k>=j} dy_k, then softmax backward.
    double suffix = 0.0;
    for (Eigen::Index r = dy.rows() - 1; r >= 0; --r) {
      suffix += dy(r, c);
      dp(r, c) = suffix;  // holds ds temporarily
    }
    double dot = 0.0;
    for (Eigen::Index r = 0; r < dy.rows(); ++r) dot += s(r, c) * dp(r, c);
    for (Eigen::Index r = 0; r < dy.rows(); ++r)
      dp(r, c) = s(r, c) * (dp(r, c) - dot);
  }
  return dp;
}

// Repeat each master row C times.
inline Matrix expand_rows(const Matrix& m, int c) {
  if (c == 1) return m;
  Matrix out(m.rows() * c, m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (int k = 0; k < c; ++k) out.row(r * c + k) = m.row(r);
  return out;
}

// Adjoint of expand_rows: sum gradient over each chunk.
inline Matrix reduce_rows(const Matrix& m, int c) {
  if (c == 1) return m;
  Matrix out(m.rows() / c, m.cols());
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    out.row(r) = m.row(r * c);
    for (int k = 1; k < c; ++k) out.row(r) += m.row(r * c + k);
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// State and caches
// ---------------------------------------------------------------------------

struct CellState {
  Matrix h;  // hidden x batch
  Matrix c;  // hidden x batch; empty for GRU/JANET
};

inline CellState make_state(CellKind kind, int hidden, int batch) {
  CellState s;
  s.h = Matrix::Zero(hidden, batch);
  if (kind == CellKind::Lstm) s.c = Matrix::Zero(hidden, batch);
  return s;
}

// Everything the backward pass needs; one per timestep.
struct StepCache {
  Matrix z;       // [x; h_prev], (input+hidden) x batch
  Matrix h_prev;
  Matrix c_prev;          // lstm
  Matrix f, i, r, g;      // raw gates as present
  Matrix sf, si;          // softmax values when f/i use cumax
  Matrix mf, mi, omega;   // expanded master gates
  Matrix mf_small, mi_small;    // pre-expansion activations
  Matrix smf, smi;              // softmax values for cumax masters
  Matrix F, I;            // effective forget/input
  Matrix u;               // tanh candidate
  Matrix o, c_new, tanh_c;  // lstm
  Matrix q, zr;           // gru reset gate and [x; q.*h_prev]
};

// Computes effective gates F, I for any variant from the bias-included
// pre-activations; fills the relevant cache fields.
namespace detail {

inline void gates_forward(const CellParams& p, const Matrix& pf,
                          const Matrix& pa, const Matrix& pmf,
                          const Matrix& pmi, bool tied, StepCache& cc) {
  const GateConfig& cfg = p.cfg;
  const bool ordered = cfg.init_kind == InitKind::OrderedCumax;
  switch (cfg.aux_kind) {
    case AuxKind::None: {
      cc.f = ordered ? cumax_cols(pf, cc.sf) : sigmoid(pf);
      cc.F = cc.f;
      if (tied) {
        cc.I = (1.0 - cc.F.array()).matrix();
      } else {
        cc.i = ordered ? (1.0 - cumax_cols(pa, cc.si).array()).matrix()
                       : sigmoid(pa);
        cc.I = cc.i;
      }
      break;
    }
    case AuxKind::Refine: {
      cc.f = ordered ? cumax_cols(pf, cc.sf) : sigmoid(pf);
      cc.r = sigmoid(pa);
      cc.g = refine_compose(cc.f, cc.r);
      cc.F = cc.g;
      cc.I = (1.0 - cc.g.array()).matrix();
      break;
    }
    case AuxKind::Master: {
      cc.f = sigmoid(pf);
      if (p.kind == CellKind::Janet) {
        // Tied master: the fine forget gate refines the master gate.
        cc.mf_small = ordered ? cumax_cols(pmf, cc.smf) : sigmoid(pmf);
        cc.mf = expand_rows(cc.mf_small, cfg.downsize_c);
        cc.omega = (cc.mf.array() * (1.0 - cc.mf.array())).matrix();
        cc.F = (2.0 * cc.f.array() * cc.omega.array() + cc.mf.array() -
                cc.omega.array())
                   .matrix();
        cc.I = (1.0 - cc.F.array()).matrix();
      } else {
        cc.i = sigmoid(pa);
        cc.mf_small = ordered ? cumax_cols(pmf, cc.smf) : sigmoid(pmf);
        cc.mi_small = ordered
                          ? (1.0 - cumax_cols(pmi, cc.smi).array()).matrix()
                          : sigmoid(pmi);
        cc.mf = expand_rows(cc.mf_small, cfg.downsize_c);
        cc.mi = expand_rows(cc.mi_small, cfg.downsize_c);
        cc.omega = (cc.mf.array() * cc.mi.array()).matrix();
        cc.F = (cc.f.array() * cc.omega.array() + cc.mf.array() -
                cc.omega.array())
                   .matrix();
        cc.I = (cc.i.array() * cc.omega.array() + cc.mi.array() -
                cc.omega.array())
                   .matrix();
      }
      break;
    }
  }
}

// Backward through gates_forward. dF/dI are gradients wrt the effective
// gates (dI ignored when the variant ties I = 1-F; pass dI and it is folded
// here). Outputs pre-activation gradients (empty when the block is absent).
inline void gates_backward(const CellParams& p, const StepCache& cc,
                           const Matrix& dF_in, const Matrix& dI_in, bool tied,
                           Matrix& dpf, Matrix& dpa, Matrix& dpmf,
                           Matrix& dpmi) {
  const GateConfig& cfg = p.cfg;
  const bool ordered = cfg.init_kind == InitKind::OrderedCumax;
  auto f_backward = [&](const Matrix& df) {
    return ordered ? cumax_cols_backward(df, cc.sf)
                   : sigmoid_backward(df, cc.f);
  };
  switch (cfg.aux_kind) {
    case AuxKind::None: {
      if (tied) {
        dpf = f_backward(dF_in - dI_in);
      } else {
        dpf = f_backward(dF_in);
        dpa = ordered ? cumax_cols_backward(-dI_in, cc.si)
                      : sigmoid_backward(dI_in, cc.i);
      }
      break;
    }
    case AuxKind::Refine: {
      const Matrix dG = dF_in - dI_in;  // I = 1 - G
      // dG/df = 2(r + f - 2rf), dG/dr = 2 f (1-f)
      Matrix df = (dG.array() * 2.0 *
                   (cc.r.array() + cc.f.array() -
                    2.0 * cc.r.array() * cc.f.array()))
                      .matrix();
      Matrix dr =
          (dG.array() * 2.0 * cc.f.array() * (1.0 - cc.f.array())).matrix();
      dpf = f_backward(df);
      dpa = sigmoid_backward(dr, cc.r);
      break;
    }
    case AuxKind::Master: {
      if (p.kind == CellKind::Janet) {
        const Matrix dF = dF_in - dI_in;  // I = 1 - F
        Matrix df = (dF.array() * 2.0 * cc.omega.array()).matrix();
        Matrix dmf_exp =
            (dF.array() * 2.0 *
             (cc.f.array() + cc.mf.array() -
              2.0 * cc.f.array() * cc.mf.array()))
                .matrix();
        dpf = sigmoid_backward(df, cc.f);
        Matrix dmf = reduce_rows(dmf_exp, cfg.downsize_c);
        dpmf = ordered ? cumax_cols_backward(dmf, cc.smf)
                       : sigmoid_backward(dmf, cc.mf_small);
      } else {
        // F = f.*omega + mf - omega, I = i.*omega + mi - omega,
        // omega = mf.*mi
        Matrix df = (dF_in.array() * cc.omega.array()).matrix();
        Matrix di = (dI_in.array() * cc.omega.array()).matrix();
        Matrix dmf_exp =
            (dF_in.array() * (cc.f.array() * cc.mi.array() + 1.0 -
                              cc.mi.array()) +
             dI_in.array() * (cc.mi.array() * (cc.i.array() - 1.0)))
                .matrix();
        Matrix dmi_exp =
            (dF_in.array() * (cc.mf.array() * (cc.f.array() - 1.0)) +
             dI_in.array() * (cc.i.array() * cc.mf.array() + 1.0 -
                              cc.mf.array()))
                .matrix();
        dpf = sigmoid_backward(df, cc.f);
        dpa = sigmoid_backward(di, cc.i);
        Matrix dmf = reduce_rows(dmf_exp, cfg.downsize_c);
        Matrix dmi = reduce_rows(dmi_exp, cfg.downsize_c);
        if (ordered) {
          dpmf = cumax_cols_backward(dmf, cc.smf);
          dpmi = cumax_cols_backward(-dmi, cc.smi);  // mi = 1 - cumax
        } else {
          dpmf = sigmoid_backward(dmf, cc.mf_small);
          dpmi = sigmoid_backward(dmi, cc.mi_small);
        }
      }
      break;
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

inline void cell_forward(const CellParams& p, const Matrix& x,
                         const CellState& state, CellState& next,
                         StepCache& cc) {
  if (x.rows() != p.input || state.h.rows() != p.hidden ||
      x.cols() != state.h.cols()) {
    throw std::invalid_argument(
        "cell_forward: shape mismatch, x is " + std::to_string(x.rows()) +
        "x" + std::to_string(x.cols()) + ", h is " +
        std::to_string(state.h.rows()) + "x" + std::to_string(state.h.cols()) +
        ", cell expects input " + std::to_string(p.input) + " hidden " +
        std::to_string(p.hidden));
  }
  const Eigen::Index B = x.cols();
  cc = StepCache{};
  cc.h_prev = state.h;
  cc.z.resize(p.input + p.hidden, B);
  cc.z.topRows(p.input) = x;
  cc.z.bottomRows(p.hidden) = state.h;

  Matrix pf = p.Wf * cc.z;
  detail::add_bias(pf, p.bf);
  Matrix pa, pmf, pmi;
  if (p.Wa.size() > 0) {
    pa = p.Wa * cc.z;
    detail::add_bias(pa, p.ba);
  }
  if (p.Wmf.size() > 0) {
    pmf = p.Wmf * cc.z;
    detail::add_bias(pmf, p.bmf);
  }
  if (p.Wmi.size() > 0) {
    pmi = p.Wmi * cc.z;
    detail::add_bias(pmi, p.bmi);
  }

  switch (p.kind) {
    case CellKind::Lstm: {
      cc.c_prev = state.c;
      detail::gates_forward(p, pf, pa, pmf, pmi, /*tied=*/false, cc);
      Matrix pu = p.Wu * cc.z;
      detail::add_bias(pu, p.bu);
      cc.u = tanh_act(pu);
      Matrix po = p.Wo * cc.z;
      detail::add_bias(po, p.bo);
      cc.o = sigmoid(po);
      cc.c_new = (cc.F.array() * state.c.array() +
                  cc.I.array() * cc.u.array())
                     .matrix();
      cc.tanh_c = tanh_act(cc.c_new);
      next.c = cc.c_new;
      next.h = (cc.o.array() * cc.tanh_c.array()).matrix();
      break;
    }
    case CellKind::Gru: {
      Matrix pq = p.Wq * cc.z;
      detail::add_bias(pq, p.bq);
      cc.q = sigmoid(pq);
      detail::gates_forward(p, pf, pa, pmf, pmi,
                            /*tied=*/p.cfg.aux_kind != AuxKind::Master, cc);
      cc.zr.resize(p.input + p.hidden, B);
      cc.zr.topRows(p.input) = x;
      cc.zr.bottomRows(p.hidden) =
          (cc.q.array() * state.h.array()).matrix();
      Matrix pu = p.Wu * cc.zr;
      detail::add_bias(pu, p.bu);
      cc.u = tanh_act(pu);
      next.c.resize(0, 0);
      next.h = (cc.F.array() * state.h.array() +
                cc.I.array() * cc.u.array())
                   .matrix();
      break;
    }
    case CellKind::Janet: {
      detail::gates_forward(p, pf, pa, pmf, pmi, /*tied=*/true, cc);
      Matrix pu = p.Wu * cc.z;
      detail::add_bias(pu, p.bu);
      cc.u = tanh_act(pu);
      next.c.resize(0, 0);
      next.h = (cc.F.array() * state.h.array() +
                cc.I.array() * cc.u.array())
                   .matrix();
      break;
    }
  }
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

// Accumulates parameter gradients into `grads` (same layout as `p`) and
// returns gradients wrt the previous state; dx may be null when not needed.
inline void cell_backward(const CellParams& p, const StepCache& cc,
                          const Matrix& dh_new, const Matrix& dc_new,
                          CellParams& grads, Matrix& dh_prev, Matrix& dc_prev,
                          Matrix* dx) {
  const bool tied = p.kind == CellKind::Janet ||
                    (p.kind == CellKind::Gru &&
                     p.cfg.aux_kind != AuxKind::Master);
  Matrix dz = Matrix::Zero(cc.z.rows(), cc.z.cols());
  dh_prev = Matrix::Zero(p.hidden, cc.z.cols());

  auto accum = [&](const Matrix& W, Matrix& dW, Matrix& db, const Matrix& dpre,
                   const Matrix& zin, Matrix& dzin) {
    dW.noalias() += dpre * zin.transpose();
    db.col(0) += dpre.rowwise().sum();
    dzin.noalias() += W.transpose() * dpre;
  };

  Matrix dF, dI, du_pre;
  switch (p.kind) {
    case CellKind::Lstm: {
      Matrix do_pre = detail::sigmoid_backward(
          (dh_new.array() * cc.tanh_c.array()).matrix(), cc.o);
      Matrix dC = (dc_new.size() > 0 ? dc_new : Matrix::Zero(p.hidden, cc.z.cols()));
      dC += (dh_new.array() * cc.o.array() *
             (1.0 - cc.tanh_c.array().square()))
                .matrix();
      dF = (dC.array() * cc.c_prev.array()).matrix();
      dI = (dC.array() * cc.u.array()).matrix();
      du_pre = (dC.array() * cc.I.array() *
                (1.0 - cc.u.array().square()))
                   .matrix();
      dc_prev = (dC.array() * cc.F.array()).matrix();
      accum(p.Wo, grads.Wo, grads.bo, do_pre, cc.z, dz);
      break;
    }
    case CellKind::Gru:
    case CellKind::Janet: {
      dF = (dh_new.array() * cc.h_prev.array()).matrix();
      dI = (dh_new.array() * cc.u.array()).matrix();
      du_pre = (dh_new.array() * cc.I.array() *
                (1.0 - cc.u.array().square()))
                   .matrix();
      dh_prev += (dh_new.array() * cc.F.array()).matrix();
      dc_prev.resize(0, 0);
      break;
    }
  }

  // Candidate path.
  if (p.kind == CellKind::Gru) {
    Matrix dzr = Matrix::Zero(cc.zr.rows(), cc.zr.cols());
    accum(p.Wu, grads.Wu, grads.bu, du_pre, cc.zr, dzr);
    // zr bottom half is q .* h_prev
    Matrix dqh = dzr.bottomRows(p.hidden);
    Matrix dq_pre = detail::sigmoid_backward(
        (dqh.array() * cc.h_prev.array()).matrix(), cc.q);
    dh_prev += (dqh.array() * cc.q.array()).matrix();
    accum(p.Wq, grads.Wq, grads.bq, dq_pre, cc.z, dz);
    if (dx) *dx = dzr.topRows(p.input);
  } else {
    accum(p.Wu, grads.Wu, grads.bu, du_pre, cc.z, dz);
  }

  // Gate paths.
  Matrix dpf, dpa, dpmf, dpmi;
  detail::gates_backward(p, cc, dF, dI, tied, dpf, dpa, dpmf, dpmi);
  accum(p.Wf, grads.Wf, grads.bf, dpf, cc.z, dz);
  if (dpa.size() > 0) accum(p.Wa, grads.Wa, grads.ba, dpa, cc.z, dz);
  if (dpmf.size() > 0) accum(p.Wmf, grads.Wmf, grads.bmf, dpmf, cc.z, dz);
  if (dpmi.size() > 0) accum(p.Wmi, grads.Wmi, grads.bmi, dpmi, cc.z, dz);

  dh_prev += dz.bottomRows(p.hidden);
  if (dx) {
    if (p.kind == CellKind::Gru) {
      *dx += dz.topRows(p.input);
    } else {
      *dx = dz.topRows(p.input);
    }
  }
}

// ---------------------------------------------------------------------------
// Unroll
// ---------------------------------------------------------------------------

struct Unrolled {
  std::vector<StepCache> caches;   // one per timestep
  std::vector<Matrix> outputs;     // h_t per timestep
  CellState final_state;
};

inline Unrolled unroll(const CellParams& p, const std::vector<Matrix>& xs,
                       const CellState& initial) {
  if (xs.empty()) throw std::invalid_argument("unroll: empty sequence");
  Unrolled u;
  u.caches.resize(xs.size());
  u.outputs.resize(xs.size());
  CellState state = initial;
  CellState next;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    cell_forward(p, xs[t], state, next, u.caches[t]);
    u.outputs[t] = next.h;
    state = next;
  }
  u.final_state = state;
  return u;
}

// BPTT over an unrolled sequence. dh_per_step[t] is the loss gradient wrt
// the step-t output (may be empty for unscored steps).
inline CellParams unroll_backward(const CellParams& p, const Unrolled& u,
                                  const std::vector<Matrix>& dh_per_step) {
  CellParams grads = p.zeros_like();
  const Eigen::Index B = u.caches.front().z.cols();
  Matrix dh = Matrix::Zero(p.hidden, B);
  Matrix dc;
  if (p.kind == CellKind::Lstm) dc = Matrix::Zero(p.hidden, B);
  for (std::size_t ti = u.caches.size(); ti-- > 0;) {
    if (ti < dh_per_step.size() && dh_per_step[ti].size() > 0) {
      dh += dh_per_step[ti];
    }
    Matrix dh_prev, dc_prev;
    cell_backward(p, u.caches[ti], dh, dc, grads, dh_prev, dc_prev, nullptr);
    dh = std::move(dh_prev);
    dc = std::move(dc_prev);
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Single-vector convenience wrappers
// ---------------------------------------------------------------------------

inline std::pair<CellState, StepCache> lstm_forward(const CellParams& p,
                                                    const Vector& x,
                                                    const CellState& state) {
  if (p.kind != CellKind::Lstm)
    throw std::invalid_argument("lstm_forward: params are not an LSTM");
  CellState next;
  StepCache cc;
  cell_forward(p, x, state, next, cc);
  return {next, cc};
}

inline std::pair<CellState, StepCache> gru_forward(const CellParams& p,
                                                   const Vector& x,
                                                   const CellState& state) {
  if (p.kind != CellKind::Gru)
    throw std::invalid_argument("gru_forward: params are not a GRU");
  CellState next;
  StepCache cc;
  cell_forward(p, x, state, next, cc);
  return {next, cc};
}

inline std::pair<CellState, StepCache> janet_forward(const CellParams& p,
                                                     const Vector& x,
                                                     const CellState& state) {
  if (p.kind != CellKind::Janet)
    throw std::invalid_argument("janet_forward: params are not a JANET");
  CellState next;
  StepCache cc;
  cell_forward(p, x, state, next, cc);
  return {next, cc};
}

}  // namespace urgate

#endif  // URGATE_CELLS_HPP
