#pragma once

#include <span>
#include <string>
#include <vector>

#include "otonav/net/params.hpp"

namespace otonav::net {

template <typename T>
using ColVector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

inline constexpr double kLayerNormEps = 1e-5;

// While enabled on the current thread, every ReLU layer folds its on/off
// pattern into a hash. Gradient checks use it to detect finite-difference
// steps that cross a kink.
struct ActivationPattern {
  static void enable(bool on);
  static void reset();
  static std::uint64_t hash();
  static bool enabled();
  static void mix(std::uint64_t word);
};

// A run of consecutive rows that attend to each other.
struct Segment {
  Index start = 0;
  Index len = 0;
};

// y = x W + b, optionally followed by ReLU. Rows are independent samples.
struct Dense {
  std::size_t w = 0, b = 0;
  Index in = 0, out = 0;
  bool relu = false;

  template <typename T>
  static Dense create(ModelParams<T>& p, const std::string& name, Index in, Index out, bool relu, Rng& rng);

  template <typename T>
  void forward(const ModelParams<T>& p, const Matrix<T>& x, Matrix<T>& y) const;

  // Accumulates parameter gradients. `dy` is overwritten with the
  // pre-activation gradient. `dx` may be null.
  template <typename T>
  void backward(ModelParams<T>& p, const Matrix<T>& x, const Matrix<T>& y, Matrix<T>& dy, Matrix<T>* dx) const;
};

template <typename T>
struct LayerNormCache {
  Matrix<T> xhat;
  ColVector<T> rstd;
};

struct LayerNorm {
  std::size_t gain = 0, bias = 0;
  Index dim = 0;

  template <typename T>
  static LayerNorm create(ModelParams<T>& p, const std::string& name, Index dim);

  template <typename T>
  void forward(const ModelParams<T>& p, const Matrix<T>& x, Matrix<T>& y, LayerNormCache<T>& cache) const;

  template <typename T>
  void backward(ModelParams<T>& p, const LayerNormCache<T>& cache, const Matrix<T>& dy, Matrix<T>& dx) const;
};

// Learned lookup table, e.g. one row per episode time step.
struct Embedding {
  std::size_t table = 0;
  Index rows = 0, dim = 0;

  template <typename T>
  static Embedding create(ModelParams<T>& p, const std::string& name, Index rows, Index dim, Rng& rng);

  // y.row(i) += table.row(index[i])
  template <typename T>
  void add_forward(const ModelParams<T>& p, std::span<const int> index, Matrix<T>& y) const;

  template <typename T>
  void backward(ModelParams<T>& p, std::span<const int> index, const Matrix<T>& dy) const;
};

// Scaled dot-product attention per segment and head. `qkv` holds the query,
// key and value projections side by side (columns [0,H), [H,2H), [2H,3H)).
// Softmax probabilities are stored in `probs` for the backward pass.
template <typename T>
void attention_forward(const Matrix<T>& qkv, Index hidden, int heads, std::span<const Segment> segments, bool causal,
                       Matrix<T>& out, AlignedVector<T>& probs);

template <typename T>
void attention_backward(const Matrix<T>& qkv, Index hidden, int heads, std::span<const Segment> segments, bool causal,
                        const AlignedVector<T>& probs, const Matrix<T>& dout, Matrix<T>& dqkv);

struct BlockSpec {
  Index hidden = 128;
  int heads = 4;
  Index ffn = 256;
  bool causal = false;
  bool qkv_relu = true;  // ReLU projections for Q, K, V
  bool pre_ln = false;   // normalize the input before attention
};

template <typename T>
struct BlockCache {
  Matrix<T> x, n0, qkv, att, h, n1, f1, f2;
  LayerNormCache<T> ln0, ln1;
  AlignedVector<T> probs;
};

// Attention sub-layer with residual, then normalized two-layer feed-forward
// with residual:
//   h = x + W_o MHA(QKV(x)),  y = h + FFN(LN(h))
// With pre_ln the QKV projection reads LN0(x) instead of x.
struct TransformerBlock {
  BlockSpec spec;
  LayerNorm ln0, ln1;
  Dense qkv, out, ff1, ff2;

  template <typename T>
  static TransformerBlock create(ModelParams<T>& p, const std::string& name, const BlockSpec& spec, Rng& rng);

  template <typename T>
  void forward(const ModelParams<T>& p, const Matrix<T>& x, std::span<const Segment> segments, Matrix<T>& y,
               BlockCache<T>& cache) const;

  template <typename T>
  void backward(ModelParams<T>& p, std::span<const Segment> segments, const BlockCache<T>& cache, const Matrix<T>& dy,
                Matrix<T>& dx) const;
};

}  // namespace otonav::net
