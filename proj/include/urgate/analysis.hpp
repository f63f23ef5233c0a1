// Post-hoc analysis: gate activation histograms, timescale math,
// gradient-norm bounds of the refined gate, and effective-gate contour
// grids. Results are emitted as CSV for external plotting.

#ifndef URGATE_ANALYSIS_HPP
#define URGATE_ANALYSIS_HPP

#include <algorithm>
#include <fstream>
#include <vector>

#include "urgate/gatelib.hpp"
#include "urgate/ndmath.hpp"

namespace urgate {

// ---------------------------------------------------------------------------
// Activation histograms
// ---------------------------------------------------------------------------

struct GateHistogram {
  int bins = 50;
  std::vector<long> counts;  // per bin over [0,1]; sum == hidden
  Vector unit_means;         // length hidden
};

// Reduces recorded activations (one hidden x batch matrix per timestep)
// over time and batch to per-unit means, then histograms the units.
inline GateHistogram gate_histogram(const std::vector<Matrix>& recorded,
                                    int bins = 50) {
  if (recorded.empty() || recorded.front().size() == 0) {
    throw std::invalid_argument("gate_histogram: empty recording");
  }
  GateHistogram h;
  h.bins = bins;
  const Eigen::Index hidden = recorded.front().rows();
  Vector acc = Vector::Zero(hidden);
  for (const Matrix& m : recorded) acc += m.rowwise().mean();
  h.unit_means = acc / static_cast<double>(recorded.size());
  h.counts.assign(bins, 0);
  for (Eigen::Index j = 0; j < hidden; ++j) {
    int b = static_cast<int>(h.unit_means[j] * bins);
    b = std::clamp(b, 0, bins - 1);
    ++h.counts[b];
  }
  return h;
}

// Fraction of unit means outside [lo, hi]; the bimodality statistic.
inline double fraction_outside(const Vector& unit_means, double lo = 0.2,
                               double hi = 0.8) {
  long n = 0;
  for (Eigen::Index j = 0; j < unit_means.size(); ++j)
    if (unit_means[j] < lo || unit_means[j] > hi) ++n;
  return static_cast<double>(n) / static_cast<double>(unit_means.size());
}

// ---------------------------------------------------------------------------
// Timescales
// ---------------------------------------------------------------------------

// D = 1/(1-f), the number of steps for a unit's memory to decay by a
// constant factor.
inline double decay_period(double f) {
  if (f >= 1.0) throw std::invalid_argument("decay_period: infinite timescale");
  return 1.0 / (1.0 - f);
}

// A refine gate moves a timescale-D gate anywhere in (D/2, D^2).
inline std::pair<double, double> refine_timescale_band(double d) {
  return {d / 2.0, d * d};
}

// Samples decay periods from the initialization distribution of one
// init kind:
//   constant bias b      -> point mass at 1 + e^b
//   chrono (T_max)       -> uniform on [2, T_max]
//   uniform / cumax      -> Pareto(alpha = 2): P(D > x) = 1/x
inline Vector timescale_sampler(const GateConfig& cfg, int hidden, int n,
                                Rng& rng) {
  if (n < 1) throw std::invalid_argument("timescale_sampler: n >= 1");
  Vector out(n);
  switch (cfg.init_kind) {
    case InitKind::StandardBias:
      out.setConstant(1.0 + std::exp(cfg.forget_bias));
      break;
    case InitKind::ChronoInit: {
      const int t_max = cfg.effective_t_max(hidden);
      if (t_max < 2) throw std::invalid_argument("timescale_sampler: t_max >= 2");
      for (int k = 0; k < n; ++k) {
        // b_f = log u, u ~ U[1, T_max-1]; D = 1 + e^{b_f} = 1 + u.
        const double u = t_max == 2
                             ? 1.0
                             : rng.uniform(1.0, static_cast<double>(t_max - 1));
        out[k] = 1.0 + u;
      }
      break;
    }
    case InitKind::UniformInit:
    case InitKind::OrderedCumax:
      // Both spread activations uniformly on (0,1) at initialization.
      for (int k = 0; k < n; ++k) out[k] = decay_period(rng.next_double());
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gradient-norm bounds of the refined gate
// ---------------------------------------------------------------------------

struct GradNormBound {
  double g = 0.0;
  double min = 0.0, max = 0.0;
  double standard = 0.0;  // g(1-g), the plain sigmoid gate gradient
};

namespace detail {
// Golden-section refinement of fn on [a, b].
template <typename Fn>
double golden_section(Fn&& fn, double a, double b, bool maximize,
                      double tol = 1e-9) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = fn(c), fd = fn(d);
  while (b - a > tol) {
    const bool keep_left = maximize ? fc > fd : fc < fd;
    if (keep_left) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = fn(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = fn(d);
    }
  }
  return fn(0.5 * (a + b));
}
}  // namespace detail

// Min/max of ||grad g|| over admissible f in [1-sqrt(1-g), sqrt(g)],
// by dense grid plus golden-section refinement around the best cells.
inline GradNormBound grad_norm_bounds(double g, int grid = 1024) {
  if (!(g > 0.0 && g < 1.0)) {
    throw std::invalid_argument("grad_norm_bounds: g in (0,1) required");
  }
  GradNormBound out;
  out.g = g;
  out.standard = g * (1.0 - g);
  const double flo = 1.0 - std::sqrt(1.0 - g);
  const double fhi = std::sqrt(g);
  auto fn = [g](double f) { return refine_grad_norm(f, g); };
  int imin = 0, imax = 0;
  double vmin = fn(flo), vmax = vmin;
  for (int i = 1; i <= grid; ++i) {
    const double f = flo + (fhi - flo) * i / grid;
    const double v = fn(f);
    if (v < vmin) { vmin = v; imin = i; }
    if (v > vmax) { vmax = v; imax = i; }
  }
  auto bracket = [&](int i) {
    const double step = (fhi - flo) / grid;
    return std::pair<double, double>{
        std::max(flo, flo + (i - 1) * step), std::min(fhi, flo + (i + 1) * step)};
  };
  auto [a1, b1] = bracket(imin);
  out.min = detail::golden_section(fn, a1, b1, /*maximize=*/false);
  auto [a2, b2] = bracket(imax);
  out.max = detail::golden_section(fn, a2, b2, /*maximize=*/true);
  return out;
}

// ---------------------------------------------------------------------------
// Effective-gate contour grid
// ---------------------------------------------------------------------------

// g_contour(i, j) = refine_compose(f_grid[i], r_grid[j]).
inline Matrix g_contour(const Vector& f_grid, const Vector& r_grid) {
  Matrix out(f_grid.size(), r_grid.size());
  for (Eigen::Index i = 0; i < f_grid.size(); ++i)
    for (Eigen::Index j = 0; j < r_grid.size(); ++j)
      out(i, j) = refine_compose(f_grid[i], r_grid[j]);
  return out;
}

// ---------------------------------------------------------------------------
// CSV emitters
// ---------------------------------------------------------------------------

inline void write_histogram_csv(const GateHistogram& h,
                                const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "bin_lo,bin_hi,count\n";
  for (int b = 0; b < h.bins; ++b) {
    out << static_cast<double>(b) / h.bins << ','
        << static_cast<double>(b + 1) / h.bins << ',' << h.counts[b] << '\n';
  }
}

inline void write_contour_csv(const Vector& f_grid, const Vector& r_grid,
                              const Matrix& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "f,r,g\n";
  for (Eigen::Index i = 0; i < f_grid.size(); ++i)
    for (Eigen::Index j = 0; j < r_grid.size(); ++j)
      out << f_grid[i] << ',' << r_grid[j] << ',' << g(i, j) << '\n';
}

inline void write_bounds_csv(const std::vector<GradNormBound>& bounds,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "g,min,max,standard\n";
  for (const GradNormBound& b : bounds)
    out << b.g << ',' << b.min << ',' << b.max << ',' << b.standard << '\n';
}

inline void write_timescale_csv(const Vector& samples,
                                const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "decay_period\n";
  for (Eigen::Index i = 0; i < samples.size(); ++i) out << samples[i] << '\n';
}

}  // namespace urgate

#endif  // URGATE_ANALYSIS_HPP
