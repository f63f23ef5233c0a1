// Benchmark generators and data ingestion: Copy, Adding, synthetic
// forgetting, bit-reversal permutation, IDX image files and scanline
// sequencing. Generators are pure given an Rng stream.

#ifndef URGATE_TASKS_HPP
#define URGATE_TASKS_HPP

#include <cstdint>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "urgate/ndmath.hpp"

namespace urgate {

// Generic minibatch handed to the training loop. Inputs are one
// (input_dim x batch) matrix per timestep. Classification batches carry
// integer targets on masked steps; regression batches carry one real target
// per batch element, scored at the final step.
struct TaskBatch {
  std::vector<Matrix> inputs;
  std::vector<std::vector<int>> targets;  // per step; empty when unscored
  std::vector<char> mask;                 // per step, 1 = scored
  Vector reg_target;
  bool regression = false;
  int num_classes = 0;
  int input_dim = 0;
  int batch = 0;
};

using BatchSource = std::function<TaskBatch(int batch, Rng& rng)>;

// ---------------------------------------------------------------------------
// Copy task
// ---------------------------------------------------------------------------

// Sequence layout over alphabet {0..9}: 10 memorized digits from {1..8},
// N filler zeros, 10 cue tokens '9'. Only the last 10 steps are scored,
// with 8-way targets (digit - 1). Baseline loss is log 8.
struct CopyBatch {
  int N = 0;
  std::vector<std::vector<int>> tokens;  // T rows of batch ints
  std::vector<std::vector<int>> digits;  // 10 rows of batch ints in {1..8}
};

inline CopyBatch gen_copy(int N, int batch, Rng& rng) {
  if (N < 1) throw std::invalid_argument("gen_copy: N must be >= 1");
  CopyBatch cb;
  cb.N = N;
  const int T = N + 20;
  cb.tokens.assign(T, std::vector<int>(batch, 0));
  cb.digits.assign(10, std::vector<int>(batch, 0));
  for (int b = 0; b < batch; ++b) {
    for (int t = 0; t < 10; ++t) {
      const int d = static_cast<int>(rng.uniform_int(1, 8));
      cb.digits[t][b] = d;
      cb.tokens[t][b] = d;
    }
    for (int t = N + 10; t < T; ++t) cb.tokens[t][b] = 9;
  }
  return cb;
}

inline TaskBatch copy_to_task_batch(const CopyBatch& cb) {
  const int T = static_cast<int>(cb.tokens.size());
  const int batch = static_cast<int>(cb.tokens[0].size());
  TaskBatch tb;
  tb.input_dim = 10;
  tb.batch = batch;
  tb.num_classes = 8;
  tb.inputs.resize(T);
  tb.targets.assign(T, {});
  tb.mask.assign(T, 0);
  for (int t = 0; t < T; ++t) {
    Matrix x = Matrix::Zero(10, batch);
    for (int b = 0; b < batch; ++b) x(cb.tokens[t][b], b) = 1.0;
    tb.inputs[t] = std::move(x);
  }
  for (int k = 0; k < 10; ++k) {
    const int t = T - 10 + k;
    tb.mask[t] = 1;
    tb.targets[t].resize(batch);
    for (int b = 0; b < batch; ++b) tb.targets[t][b] = cb.digits[k][b] - 1;
  }
  return tb;
}

// ---------------------------------------------------------------------------
// Adding task
// ---------------------------------------------------------------------------

// Channel 0: N values from U[0,1). Channel 1: two-hot marker, one index in
// each half. Target is the sum of the two marked values; baseline MSE 1/6.
struct AddingBatch {
  int N = 0;
  Matrix values;   // N x batch
  std::vector<int> i0, i1;
  Vector target;
};

inline AddingBatch gen_adding(int N, int batch, Rng& rng) {
  if (N < 2 || N % 2 != 0) {
    throw std::invalid_argument("gen_adding: N must be even and >= 2");
  }
  AddingBatch ab;
  ab.N = N;
  ab.values.resize(N, batch);
  ab.i0.resize(batch);
  ab.i1.resize(batch);
  ab.target.resize(batch);
  for (int b = 0; b < batch; ++b) {
    for (int t = 0; t < N; ++t) ab.values(t, b) = rng.next_double();
    ab.i0[b] = static_cast<int>(rng.uniform_int(0, N / 2 - 1));
    ab.i1[b] = static_cast<int>(rng.uniform_int(N / 2, N - 1));
    ab.target[b] = ab.values(ab.i0[b], b) + ab.values(ab.i1[b], b);
  }
  return ab;
}

inline TaskBatch adding_to_task_batch(const AddingBatch& ab) {
  const int batch = static_cast<int>(ab.i0.size());
  TaskBatch tb;
  tb.input_dim = 2;
  tb.batch = batch;
  tb.regression = true;
  tb.reg_target = ab.target;
  tb.inputs.resize(ab.N);
  tb.targets.assign(ab.N, {});
  tb.mask.assign(ab.N, 0);
  tb.mask[ab.N - 1] = 1;
  for (int t = 0; t < ab.N; ++t) {
    Matrix x = Matrix::Zero(2, batch);
    for (int b = 0; b < batch; ++b) {
      x(0, b) = ab.values(t, b);
      if (t == ab.i0[b] || t == ab.i1[b]) x(1, b) = 1.0;
    }
    tb.inputs[t] = std::move(x);
  }
  return tb;
}

// ---------------------------------------------------------------------------
// Synthetic forgetting scenario
// ---------------------------------------------------------------------------

// Adding task started from extremely saturated gates (forget biases +6,
// effective activation ~= sigma(6)) at a reduced learning rate.
struct ForgettingScenario {
  int hidden = 64;
  int N = 100;
  double bias_offset = 6.0;
  double learning_rate = 1e-4;
};

inline ForgettingScenario forgetting_scenario(int hidden = 64, int N = 100,
                                              double bias_offset = 6.0) {
  ForgettingScenario s;
  s.hidden = hidden;
  s.N = N;
  s.bias_offset = bias_offset;
  return s;
}

// ---------------------------------------------------------------------------
// Bit-reversal permutation
// ---------------------------------------------------------------------------

// Index i maps to the index whose binary representation (over the next
// power of two) is i's reversed. Non-power-of-two n keeps the entries < n.
inline std::vector<int> bit_reversal_perm(int n) {
  if (n < 1) throw std::invalid_argument("bit_reversal_perm: n >= 1");
  int m = 0;
  while ((1 << m) < n) ++m;
  const int full = 1 << m;
  std::vector<int> perm;
  perm.reserve(n);
  for (int i = 0; i < full; ++i) {
    int rev = 0;
    for (int b = 0; b < m; ++b)
      if (i & (1 << b)) rev |= 1 << (m - 1 - b);
    if (rev < n) perm.push_back(rev);
  }
  return perm;
}

// ---------------------------------------------------------------------------
// IDX files (MNIST container format; big-endian magic + dims + payload)
// ---------------------------------------------------------------------------

struct IdxImages {
  int count = 0, rows = 0, cols = 0;
  std::vector<double> data;  // count*rows*cols values scaled to [0,1]
};

struct IdxLabels {
  std::vector<int> labels;
};

namespace detail {
inline std::uint32_t read_be32(std::istream& in, const std::string& path,
                               std::size_t offset) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) {
    throw std::runtime_error("load_idx: " + path + ": truncated at byte " +
                             std::to_string(offset));
  }
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}
inline void write_be32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<char*>(b), 4);
}
}  // namespace detail

inline IdxImages load_idx_images(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_idx: cannot open " + path);
  const std::uint32_t magic = detail::read_be32(in, path, 0);
  if (magic != 0x00000803u) {
    throw std::runtime_error("load_idx: " + path +
                             ": bad magic at byte 0 (expected 0x00000803)");
  }
  IdxImages im;
  im.count = static_cast<int>(detail::read_be32(in, path, 4));
  im.rows = static_cast<int>(detail::read_be32(in, path, 8));
  im.cols = static_cast<int>(detail::read_be32(in, path, 12));
  const std::size_t n =
      std::size_t(im.count) * std::size_t(im.rows) * std::size_t(im.cols);
  std::vector<unsigned char> raw(n);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw std::runtime_error(
        "load_idx: " + path + ": truncated payload at byte " +
        std::to_string(16 + static_cast<std::size_t>(in.gcount())));
  }
  im.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) im.data[i] = raw[i] / 255.0;
  return im;
}

inline IdxLabels load_idx_labels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_idx: cannot open " + path);
  const std::uint32_t magic = detail::read_be32(in, path, 0);
  if (magic != 0x00000801u) {
    throw std::runtime_error("load_idx: " + path +
                             ": bad magic at byte 0 (expected 0x00000801)");
  }
  const int count = static_cast<int>(detail::read_be32(in, path, 4));
  std::vector<unsigned char> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()), count);
  if (in.gcount() != count) {
    throw std::runtime_error(
        "load_idx: " + path + ": truncated payload at byte " +
        std::to_string(8 + static_cast<std::size_t>(in.gcount())));
  }
  IdxLabels out;
  out.labels.assign(raw.begin(), raw.end());
  return out;
}

inline void write_idx_images(const std::string& path,
                             const std::vector<unsigned char>& pixels,
                             int count, int rows, int cols) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_idx: cannot open " + path);
  detail::write_be32(out, 0x00000803u);
  detail::write_be32(out, static_cast<std::uint32_t>(count));
  detail::write_be32(out, static_cast<std::uint32_t>(rows));
  detail::write_be32(out, static_cast<std::uint32_t>(cols));
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
}

inline void write_idx_labels(const std::string& path,
                             const std::vector<unsigned char>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_idx: cannot open " + path);
  detail::write_be32(out, 0x00000801u);
  detail::write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
}

// Synthetic learnable image set. Label k in 0..9 sets a base intensity
// level and paints a brighter band at row k mod rows, both over noise, so
// even a simple integrator over the pixel sequence can separate classes.
inline void write_synth_band_idx(const std::string& images_path,
                                 const std::string& labels_path, int count,
                                 int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<unsigned char> px(static_cast<std::size_t>(count) * rows * cols);
  std::vector<unsigned char> lb(count);
  std::size_t k = 0;
  for (int i = 0; i < count; ++i) {
    const int label = static_cast<int>(rng.uniform_int(0, 9));
    lb[i] = static_cast<unsigned char>(label);
    const int band = label % rows;
    const double base = 0.1 + 0.6 * label / 9.0;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const double noise = rng.next_double() * 0.15;
        const double v =
            std::min(1.0, base + (r == band ? 0.25 : 0.0) + noise);
        px[k++] = static_cast<unsigned char>(v * 255.0);
      }
  }
  write_idx_images(images_path, px, count, rows, cols);
  write_idx_labels(labels_path, lb);
}

// ---------------------------------------------------------------------------
// Scanline sequencing
// ---------------------------------------------------------------------------

struct PixelSequence {
  Vector values;  // length rows*cols, scanline order, optionally permuted
};

// Flatten left-to-right top-to-bottom, then permute the time axis so that
// output[t] = flat[perm[t]].
inline PixelSequence scanline_sequence(const Matrix& image,
                                       const std::vector<int>* perm = nullptr) {
  const Eigen::Index n = image.rows() * image.cols();
  Vector flat(n);
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < image.rows(); ++r)
    for (Eigen::Index c = 0; c < image.cols(); ++c) flat[k++] = image(r, c);
  PixelSequence seq;
  if (perm) {
    if (static_cast<Eigen::Index>(perm->size()) != n) {
      throw std::invalid_argument(
          "scanline_sequence: permutation length " +
          std::to_string(perm->size()) + " != pixel count " +
          std::to_string(n));
    }
    seq.values.resize(n);
    for (Eigen::Index t = 0; t < n; ++t) seq.values[t] = flat[(*perm)[t]];
  } else {
    seq.values = std::move(flat);
  }
  return seq;
}

// Batch source drawing random images from an ingested IDX dataset,
// presented one pixel per step with a 10-way classification target on the
// final step.
inline BatchSource make_pixel_source(const IdxImages& images,
                                     const IdxLabels& labels,
                                     bool bit_reversal = false) {
  if (images.count != static_cast<int>(labels.labels.size())) {
    throw std::invalid_argument("pixel source: image/label count mismatch");
  }
  const int T = images.rows * images.cols;
  std::vector<int> perm;
  if (bit_reversal) perm = bit_reversal_perm(T);
  return [&images, &labels, perm, T](int batch, Rng& rng) {
    TaskBatch tb;
    tb.input_dim = 1;
    tb.batch = batch;
    tb.num_classes = 10;
    tb.inputs.assign(T, Matrix::Zero(1, batch));
    tb.targets.assign(T, {});
    tb.mask.assign(T, 0);
    tb.mask[T - 1] = 1;
    tb.targets[T - 1].resize(batch);
    for (int b = 0; b < batch; ++b) {
      const int idx = static_cast<int>(rng.uniform_int(0, images.count - 1));
      const double* px = images.data.data() + std::size_t(idx) * T;
      for (int t = 0; t < T; ++t) {
        tb.inputs[t](0, b) = perm.empty() ? px[t] : px[perm[t]];
      }
      tb.targets[T - 1][b] = labels.labels[idx];
    }
    return tb;
  };
}

inline BatchSource make_copy_source(int N) {
  return [N](int batch, Rng& rng) {
    return copy_to_task_batch(gen_copy(N, batch, rng));
  };
}

inline BatchSource make_adding_source(int N) {
  return [N](int batch, Rng& rng) {
    return adding_to_task_batch(gen_adding(N, batch, rng));
  };
}

}  // namespace urgate

#endif  // URGATE_TASKS_HPP
