// Gate initializers, activations and auxiliary-gate compositions covering the
// nine-variant ablation matrix:
//
//   name  init/activation      auxiliary
//   --    standard bias        none
//   C-    chrono               none
//   O-    cumax                none
//   U-    uniform              none
//   -R    standard bias        refine
//   OM    cumax                master
//   UM    uniform              master
//   OR    cumax                refine
//   UR    uniform              refine

#ifndef URGATE_GATELIB_HPP
#define URGATE_GATELIB_HPP

#include <array>
#include <stdexcept>
#include <string>

#include "urgate/ndmath.hpp"

namespace urgate {

enum class InitKind { StandardBias, UniformInit, ChronoInit, OrderedCumax };
enum class AuxKind { None, Refine, Master };

struct GateConfig {
  InitKind init_kind = InitKind::StandardBias;
  AuxKind aux_kind = AuxKind::None;
  double forget_bias = 1.0;  // StandardBias only
  int t_max = 0;             // ChronoInit only; 0 means "use hidden size"
  double eps = 0.0;          // UniformInit clamp; 0 means "use 1/hidden"
  int downsize_c = 1;        // Master only

  static constexpr std::array<const char*, 9> kVariantNames = {
      "--", "C-", "O-", "U-", "-R", "OM", "UM", "OR", "UR"};

  static GateConfig from_name(const std::string& name) {
    GateConfig cfg;
    if (name == "--") {
      cfg.init_kind = InitKind::StandardBias;
      cfg.aux_kind = AuxKind::None;
    } else if (name == "C-") {
      cfg.init_kind = InitKind::ChronoInit;
      cfg.aux_kind = AuxKind::None;
    } else if (name == "O-") {
      cfg.init_kind = InitKind::OrderedCumax;
      cfg.aux_kind = AuxKind::None;
    } else if (name == "U-") {
      cfg.init_kind = InitKind::UniformInit;
      cfg.aux_kind = AuxKind::None;
    } else if (name == "-R") {
      cfg.init_kind = InitKind::StandardBias;
      cfg.aux_kind = AuxKind::Refine;
    } else if (name == "OM") {
      cfg.init_kind = InitKind::OrderedCumax;
      cfg.aux_kind = AuxKind::Master;
    } else if (name == "UM") {
      cfg.init_kind = InitKind::UniformInit;
      cfg.aux_kind = AuxKind::Master;
    } else if (name == "OR") {
      cfg.init_kind = InitKind::OrderedCumax;
      cfg.aux_kind = AuxKind::Refine;
    } else if (name == "UR") {
      cfg.init_kind = InitKind::UniformInit;
      cfg.aux_kind = AuxKind::Refine;
    } else {
      std::string msg = "unknown gate variant \"" + name + "\"; valid names:";
      for (const char* n : kVariantNames) msg += std::string(" ") + n;
      throw std::invalid_argument(msg);
    }
    return cfg;
  }

  std::string name() const {
    switch (aux_kind) {
      case AuxKind::None:
        switch (init_kind) {
          case InitKind::StandardBias: return "--";
          case InitKind::ChronoInit: return "C-";
          case InitKind::OrderedCumax: return "O-";
          case InitKind::UniformInit: return "U-";
        }
        break;
      case AuxKind::Refine:
        switch (init_kind) {
          case InitKind::StandardBias: return "-R";
          case InitKind::OrderedCumax: return "OR";
          case InitKind::UniformInit: return "UR";
          default: break;
        }
        break;
      case AuxKind::Master:
        switch (init_kind) {
          case InitKind::OrderedCumax: return "OM";
          case InitKind::UniformInit: return "UM";
          default: break;
        }
        break;
    }
    throw std::logic_error("GateConfig: (init, aux) pair is not one of the "
                           "nine supported variants");
  }

  void validate(int hidden) const {
    name();  // rejects invalid (init, aux) pairs
    if (hidden < 1) throw std::invalid_argument("hidden size must be >= 1");
    if (init_kind == InitKind::ChronoInit && effective_t_max(hidden) < 2) {
      throw std::invalid_argument("chrono init requires t_max >= 2");
    }
    if (init_kind == InitKind::UniformInit && hidden < 2) {
      throw std::invalid_argument(
          "uniform init requires hidden >= 2 (degenerate interval)");
    }
    if (aux_kind == AuxKind::Master) {
      if (downsize_c < 1 || hidden % downsize_c != 0) {
        throw std::invalid_argument("downsize factor C=" +
                                    std::to_string(downsize_c) +
                                    " must divide hidden size " +
                                    std::to_string(hidden));
      }
    }
  }

  int effective_t_max(int hidden) const { return t_max > 0 ? t_max : hidden; }
  double effective_eps(int hidden) const {
    return eps > 0.0 ? eps : 1.0 / static_cast<double>(hidden);
  }
  // Size of the gate vector the distributional bias applies to (the master
  // gates for OM/UM, the main forget gate otherwise).
  int bias_size(int hidden) const {
    return aux_kind == AuxKind::Master ? hidden / downsize_c : hidden;
  }
};

// Per-unit forget/input gate biases. For uniform and chrono initialization
// input_bias = -forget_bias elementwise (tied-at-initialization trick).
struct BiasInit {
  Vector forget_bias;
  Vector input_bias;
};

inline BiasInit init_standard(int hidden, double forget_bias) {
  if (hidden < 1) throw std::invalid_argument("init_standard: hidden >= 1");
  BiasInit b;
  b.forget_bias = Vector::Constant(hidden, forget_bias);
  b.input_bias = Vector::Zero(hidden);
  return b;
}

// b_f = sigma^-1(u), u ~ U[eps, 1-eps]; b_i = -b_f.
inline BiasInit init_uniform(int hidden, Rng& rng, double eps) {
  if (hidden < 2) {
    throw std::invalid_argument("init_uniform: hidden >= 2 required");
  }
  BiasInit b;
  b.forget_bias = Vector(hidden);
  for (int j = 0; j < hidden; ++j) {
    // eps = 1/d makes the sampling interval itself [1/d, 1-1/d]; the clamp
    // in inverse_sigmoid is then inactive.
    const double u = hidden == 2 ? 0.5 : rng.uniform(eps, 1.0 - eps);
    b.forget_bias[j] = inverse_sigmoid(u, eps);
  }
  b.input_bias = -b.forget_bias;
  return b;
}

// b_f = log(u), u ~ U[1, t_max-1]; b_i = -b_f. Decay periods 1+e^{b_f} land
// in [2, t_max].
inline BiasInit init_chrono(int hidden, int t_max, Rng& rng) {
  if (t_max < 2) throw std::invalid_argument("init_chrono: t_max >= 2");
  BiasInit b;
  b.forget_bias = Vector(hidden);
  for (int j = 0; j < hidden; ++j) {
    const double u =
        t_max == 2 ? 1.0 : rng.uniform(1.0, static_cast<double>(t_max - 1));
    b.forget_bias[j] = std::log(u);
  }
  b.input_bias = -b.forget_bias;
  return b;
}

inline BiasInit make_bias_init(const GateConfig& cfg, int hidden, Rng& rng) {
  const int n = cfg.bias_size(hidden);
  switch (cfg.init_kind) {
    case InitKind::StandardBias: return init_standard(n, cfg.forget_bias);
    case InitKind::UniformInit:
      return init_uniform(n, rng, cfg.effective_eps(hidden));
    case InitKind::ChronoInit:
      return init_chrono(n, cfg.effective_t_max(hidden), rng);
    case InitKind::OrderedCumax:
      // cumax gates get no distributional bias; the activation itself
      // spreads the units.
      return init_standard(n, 0.0);
  }
  throw std::logic_error("make_bias_init: unreachable");
}

// ---------------------------------------------------------------------------
// Refine gate
// ---------------------------------------------------------------------------

// alpha(f) = f(1-f): the half-width of the band the refine gate can reach.
inline double adjustment(double f) { return f * (1.0 - f); }

// g = r (1-(1-f)^2) + (1-r) f^2 = f + f(1-f)(2r-1).
inline double refine_compose(double f, double r) {
  return r * (1.0 - (1.0 - f) * (1.0 - f)) + (1.0 - r) * f * f;
}

inline Vector refine_compose(const Vector& f, const Vector& r) {
  if (f.size() != r.size()) {
    throw std::invalid_argument("refine_compose: length mismatch");
  }
  return (r.array() * (1.0 - (1.0 - f.array()).square()) +
          (1.0 - r.array()) * f.array().square())
      .matrix();
}

inline Matrix refine_compose(const Matrix& f, const Matrix& r) {
  if (f.rows() != r.rows() || f.cols() != r.cols()) {
    throw std::invalid_argument("refine_compose: shape mismatch");
  }
  return (r.array() * (1.0 - (1.0 - f.array()).square()) +
          (1.0 - r.array()) * f.array().square())
      .matrix();
}

// ---------------------------------------------------------------------------
// Master gates
// ---------------------------------------------------------------------------

// omega = mf.*mi, fhat = f.*omega + (mf - omega), ihat = i.*omega + (mi - omega)
inline std::pair<Vector, Vector> master_compose(const Vector& f,
                                                const Vector& i,
                                                const Vector& mf,
                                                const Vector& mi) {
  if (f.size() != i.size() || f.size() != mf.size() || f.size() != mi.size()) {
    throw std::invalid_argument("master_compose: length mismatch");
  }
  const auto omega = (mf.array() * mi.array()).eval();
  Vector fhat = (f.array() * omega + mf.array() - omega).matrix();
  Vector ihat = (i.array() * omega + mi.array() - omega).matrix();
  return {fhat, ihat};
}

// Tied masters plus the x2 rescaling; equivalent to a refine gate where the
// master plays the main role and the fine forget gate refines it.
inline std::pair<Vector, Vector> tied_master_rescaled(const Vector& f,
                                                      const Vector& mf) {
  if (f.size() != mf.size()) {
    throw std::invalid_argument("tied_master_rescaled: length mismatch");
  }
  const auto omega = (mf.array() * (1.0 - mf.array())).eval();
  Vector fhat = (2.0 * f.array() * omega + mf.array() - omega).matrix();
  Vector ihat =
      (2.0 * (1.0 - f.array()) * omega + (1.0 - mf.array()) - omega).matrix();
  return {fhat, ihat};
}

// Each master value is shared by a chunk of C consecutive units.
inline Vector master_downsize_expand(const Vector& master, int c) {
  if (c < 1) throw std::invalid_argument("downsize factor must be >= 1");
  if (c == 1) return master;
  Vector out(master.size() * c);
  for (Eigen::Index j = 0; j < master.size(); ++j)
    out.segment(j * c, c).setConstant(master[j]);
  return out;
}

// ---------------------------------------------------------------------------
// Variant dispatch
// ---------------------------------------------------------------------------

struct GatePack {
  Vector effective_forget;  // used in place of f in the state update
  Vector effective_input;
  Vector f;         // raw (fine) forget gate
  Vector i;         // raw (fine) input gate, when untied
  Vector r;         // refine gate, when present
  Vector g;         // refined effective forget, when present
  Vector master_f;  // expanded master gates, when present
  Vector master_i;
  Vector omega;
};

// Computes the effective forget/input gates for one variant from raw
// pre-activations. `bias` is the distributional bias (applied to the master
// gates for OM/UM). Exactly the pre-activations the variant requires must be
// present; pass empty vectors for the rest.
inline GatePack effective_gates(const GateConfig& cfg, const Vector& pre_f,
                                const Vector& pre_aux, const Vector& pre_mf,
                                const Vector& pre_mi, const BiasInit& bias) {
  const std::string variant = cfg.name();
  auto require = [&](const Vector& v, const char* what) {
    if (v.size() == 0) {
      throw std::invalid_argument("effective_gates: variant " + variant +
                                  " requires pre-activation " + what);
    }
  };
  GatePack p;
  require(pre_f, "pre_f");
  switch (cfg.aux_kind) {
    case AuxKind::None: {
      require(pre_aux, "pre_i");
      if (cfg.init_kind == InitKind::OrderedCumax) {
        p.f = cumax(pre_f);
        p.i = (1.0 - cumax(pre_aux).array()).matrix();
      } else {
        p.f = sigmoid(pre_f + bias.forget_bias);
        p.i = sigmoid(pre_aux + bias.input_bias);
      }
      p.effective_forget = p.f;
      p.effective_input = p.i;
      break;
    }
    case AuxKind::Refine: {
      require(pre_aux, "pre_r");
      p.f = cfg.init_kind == InitKind::OrderedCumax
                ? cumax(pre_f)
                : sigmoid(pre_f + bias.forget_bias);
      p.r = sigmoid(pre_aux - bias.forget_bias);
      p.g = refine_compose(p.f, p.r);
      p.effective_forget = p.g;
      p.effective_input = (1.0 - p.g.array()).matrix();
      break;
    }
    case AuxKind::Master: {
      require(pre_aux, "pre_i");
      require(pre_mf, "pre_master_f");
      require(pre_mi, "pre_master_i");
      // Fine gates: zero-bias standard sigmoids.
      p.f = sigmoid(pre_f);
      p.i = sigmoid(pre_aux);
      Vector mf, mi;
      if (cfg.init_kind == InitKind::OrderedCumax) {
        mf = cumax(pre_mf);
        mi = (1.0 - cumax(pre_mi).array()).matrix();
      } else {
        mf = sigmoid(pre_mf + bias.forget_bias);
        mi = sigmoid(pre_mi + bias.input_bias);
      }
      p.master_f = master_downsize_expand(mf, cfg.downsize_c);
      p.master_i = master_downsize_expand(mi, cfg.downsize_c);
      p.omega = (p.master_f.array() * p.master_i.array()).matrix();
      auto [fhat, ihat] = master_compose(p.f, p.i, p.master_f, p.master_i);
      p.effective_forget = fhat;
      p.effective_input = ihat;
      break;
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Gradient norm of the refined gate
// ---------------------------------------------------------------------------

// ||grad g|| with respect to the two sigmoid pre-activations, as a function
// of (f, g) on the admissible band f^2 <= g <= 1-(1-f)^2:
//   ||grad g||^2 = ((g-f^2)(1-2f) + 2f^2(1-f))^2
//                + (g-f^2)^2 (1 - (g-f^2)/(2f(1-f)))^2
inline double refine_grad_norm(double f, double g) {
  if (!(f > 0.0 && f < 1.0)) {
    throw std::invalid_argument("refine_grad_norm: f must be in (0,1)");
  }
  const double lo = f * f;
  const double hi = 1.0 - (1.0 - f) * (1.0 - f);
  const double slack = 1e-12 * std::max(1.0, std::abs(g));
  if (g < lo - slack || g > hi + slack) {
    throw std::invalid_argument("refine_grad_norm: g outside admissible band");
  }
  const double d = std::min(std::max(g, lo), hi) - lo;
  const double a = d * (1.0 - 2.0 * f) + 2.0 * f * f * (1.0 - f);
  const double b = d * (1.0 - d / (2.0 * f * (1.0 - f)));
  return std::sqrt(a * a + b * b);
}

}  // namespace urgate

#endif  // URGATE_GATELIB_HPP
