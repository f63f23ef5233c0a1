// Finite-difference verification of the analytic backward pass. Central
// differences with step delta against the surrogate loss
// L = sum_t 0.5 * ||h_t||^2, whose per-step gradient is h_t itself.

#ifndef URGATE_GRADCHECK_HPP
#define URGATE_GRADCHECK_HPP

#include <string>
#include <vector>

#include "urgate/cells.hpp"

namespace urgate {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_tensor;
};

namespace detail {
inline double surrogate_loss(CellParams& p, const std::vector<Matrix>& xs,
                             const CellState& s0) {
  Unrolled u = unroll(p, xs, s0);
  double loss = 0.0;
  for (const Matrix& h : u.outputs) loss += 0.5 * h.squaredNorm();
  return loss;
}
}  // namespace detail

// `corrupt` perturbs one analytic gradient entry before comparison; it is a
// negative-control hook so harnesses can verify the check actually fails.
inline GradCheckResult gradcheck_cell(CellKind kind, const GateConfig& cfg,
                                      int input, int hidden, int length,
                                      int batch, std::uint64_t seed,
                                      double delta = 1e-5,
                                      double corrupt = 0.0) {
  Rng rng(seed);
  CellParams p = make_cell_params(kind, cfg, input, hidden, rng);
  std::vector<Matrix> xs(length);
  for (Matrix& x : xs) x = rng.uniform_matrix(input, batch, -1.0, 1.0);
  const CellState s0 = make_state(kind, hidden, batch);

  Unrolled u = unroll(p, xs, s0);
  std::vector<Matrix> dh(u.outputs.begin(), u.outputs.end());
  CellParams analytic = unroll_backward(p, u, dh);
  if (corrupt != 0.0) analytic.Wf(0, 0) += corrupt;

  GradCheckResult res;
  auto named = p.named_tensors();
  auto agrad = analytic.named_tensors();
  for (std::size_t k = 0; k < named.size(); ++k) {
    Matrix* m = named[k].second;
    const Matrix* g = agrad[k].second;
    for (Eigen::Index r = 0; r < m->rows(); ++r)
      for (Eigen::Index c = 0; c < m->cols(); ++c) {
        const double save = (*m)(r, c);
        (*m)(r, c) = save + delta;
        const double lp = detail::surrogate_loss(p, xs, s0);
        (*m)(r, c) = save - delta;
        const double lm = detail::surrogate_loss(p, xs, s0);
        (*m)(r, c) = save;
        const double num = (lp - lm) / (2.0 * delta);
        const double ana = (*g)(r, c);
        const double rel =
            std::abs(num - ana) / std::max(std::abs(num) + std::abs(ana), 1e-6);
        if (rel > res.max_rel_err) {
          res.max_rel_err = rel;
          res.worst_tensor = named[k].first;
        }
      }
  }
  return res;
}

}  // namespace urgate

#endif  // URGATE_GRADCHECK_HPP
