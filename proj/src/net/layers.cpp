#include "otonav/net/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace otonav::net {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

thread_local bool pattern_on = false;
thread_local std::uint64_t pattern_hash = 0;

}  // namespace

void ActivationPattern::enable(bool on) { pattern_on = on; }
void ActivationPattern::reset() { pattern_hash = 0xCBF29CE484222325ULL; }
std::uint64_t ActivationPattern::hash() { return pattern_hash; }
bool ActivationPattern::enabled() { return pattern_on; }
void ActivationPattern::mix(std::uint64_t word) { pattern_hash = splitmix64(pattern_hash ^ word); }

// ---- Dense ----

template <typename T>
Dense Dense::create(ModelParams<T>& p, const std::string& name, Index in, Index out, bool relu, Rng& rng) {
  Dense d;
  d.in = in;
  d.out = out;
  d.relu = relu;
  d.w = p.add(name + ".w", in, out);
  d.b = p.add(name + ".b", 1, out);
  init_uniform(p[d.w], in, out, rng);
  return d;
}

template <typename T>
void Dense::forward(const ModelParams<T>& p, const Matrix<T>& x, Matrix<T>& y) const {
  require(x.cols() == in, "dense: input width mismatch");
  y.resize(x.rows(), out);
  y.noalias() = x * p[w].value;
  y.rowwise() += p[b].value.row(0);
  if (relu) {
    y = y.cwiseMax(T(0));
    if (pattern_on) {
      std::uint64_t word = 0;
      int bits = 0;
      for (Index i = 0; i < y.size(); ++i) {
        word = (word << 1) | (y.data()[i] > T(0) ? 1u : 0u);
        if (++bits == 64) {
          ActivationPattern::mix(word);
          word = 0;
          bits = 0;
        }
      }
      ActivationPattern::mix(word ^ static_cast<std::uint64_t>(bits));
    }
  }
}

template <typename T>
void Dense::backward(ModelParams<T>& p, const Matrix<T>& x, const Matrix<T>& y, Matrix<T>& dy, Matrix<T>* dx) const {
  require(dy.cols() == out && dy.rows() == x.rows(), "dense: gradient shape mismatch");
  if (relu) dy = (y.array() > T(0)).select(dy, T(0));
  p[w].grad.noalias() += x.transpose() * dy;
  p[b].grad.row(0) += dy.colwise().sum();
  if (dx) {
    dx->resize(x.rows(), in);
    dx->noalias() = dy * p[w].value.transpose();
  }
}

// ---- LayerNorm ----

template <typename T>
LayerNorm LayerNorm::create(ModelParams<T>& p, const std::string& name, Index dim) {
  LayerNorm ln;
  ln.dim = dim;
  ln.gain = p.add(name + ".gain", 1, dim);
  ln.bias = p.add(name + ".bias", 1, dim);
  p[ln.gain].value.setOnes();
  return ln;
}

template <typename T>
void LayerNorm::forward(const ModelParams<T>& p, const Matrix<T>& x, Matrix<T>& y, LayerNormCache<T>& c) const {
  require(x.cols() == dim, "layer_norm: width mismatch");
  const Index n = x.rows();
  c.xhat.resize(n, dim);
  c.rstd.resize(n);
  const T inv_d = T(1) / static_cast<T>(dim);
  for (Index i = 0; i < n; ++i) {
    const T mean = x.row(i).sum() * inv_d;
    c.xhat.row(i) = x.row(i).array() - mean;
    const T var = c.xhat.row(i).squaredNorm() * inv_d;
    c.rstd(i) = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
    c.xhat.row(i) *= c.rstd(i);
  }
  y.resize(n, dim);
  y = (c.xhat.array().rowwise() * p[gain].value.row(0).array()).rowwise() + p[bias].value.row(0).array();
}

template <typename T>
void LayerNorm::backward(ModelParams<T>& p, const LayerNormCache<T>& c, const Matrix<T>& dy, Matrix<T>& dx) const {
  const Index n = dy.rows();
  p[gain].grad.row(0) += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  p[bias].grad.row(0) += dy.colwise().sum();
  dx.resize(n, dim);
  const T inv_d = T(1) / static_cast<T>(dim);
  for (Index i = 0; i < n; ++i) {
    const auto g = (dy.row(i).array() * p[gain].value.row(0).array()).eval();
    const T mean_g = g.sum() * inv_d;
    const T mean_gx = (g * c.xhat.row(i).array()).sum() * inv_d;
    dx.row(i) = c.rstd(i) * (g - mean_g - c.xhat.row(i).array() * mean_gx);
  }
}

// ---- Embedding ----

template <typename T>
Embedding Embedding::create(ModelParams<T>& p, const std::string& name, Index rows, Index dim, Rng& rng) {
  Embedding e;
  e.rows = rows;
  e.dim = dim;
  e.table = p.add(name, rows, dim);
  init_uniform(p[e.table], 1, dim, rng);
  return e;
}

template <typename T>
void Embedding::add_forward(const ModelParams<T>& p, std::span<const int> index, Matrix<T>& y) const {
  require(static_cast<Index>(index.size()) == y.rows() && y.cols() == dim, "embedding: shape mismatch");
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= rows) throw std::out_of_range("embedding: index out of range");
    y.row(static_cast<Index>(i)) += p[table].value.row(index[i]);
  }
}

template <typename T>
void Embedding::backward(ModelParams<T>& p, std::span<const int> index, const Matrix<T>& dy) const {
  for (std::size_t i = 0; i < index.size(); ++i) p[table].grad.row(index[i]) += dy.row(static_cast<Index>(i));
}

// ---- attention ----

template <typename T>
void attention_forward(const Matrix<T>& qkv, Index hidden, int heads, std::span<const Segment> segments, bool causal,
                       Matrix<T>& out, AlignedVector<T>& probs) {
  require(heads > 0 && hidden % heads == 0, "attention: hidden size not divisible by head count");
  require(qkv.cols() == 3 * hidden, "attention: qkv width mismatch");
  const Index dk = hidden / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dk));
  std::size_t total = 0;
  for (const auto& s : segments) total += static_cast<std::size_t>(heads * s.len * s.len);
  probs.assign(total, T(0));
  out.setZero(qkv.rows(), hidden);

  std::size_t offset = 0;
  for (const auto& s : segments) {
    const Index L = s.len;
    for (int h = 0; h < heads; ++h) {
      const auto q = qkv.block(s.start, h * dk, L, dk);
      const auto k = qkv.block(s.start, hidden + h * dk, L, dk);
      const auto v = qkv.block(s.start, 2 * hidden + h * dk, L, dk);
      Eigen::Map<Matrix<T>> P(probs.data() + offset, L, L);
      P.noalias() = (q * k.transpose()) * scale;
      // Scalar loops keep the rounding independent of buffer alignment.
      for (Index i = 0; i < L; ++i) {
        T* row = P.data() + i * L;
        const Index n = causal ? i + 1 : L;
        T mx = row[0];
        for (Index j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        T sum = 0;
        for (Index j = 0; j < n; ++j) {
          row[j] = std::exp(row[j] - mx);
          sum += row[j];
        }
        const T inv = T(1) / sum;
        for (Index j = 0; j < n; ++j) row[j] *= inv;
        for (Index j = n; j < L; ++j) row[j] = T(0);
      }
      out.block(s.start, h * dk, L, dk).noalias() = P * v;
      offset += static_cast<std::size_t>(L * L);
    }
  }
}

template <typename T>
void attention_backward(const Matrix<T>& qkv, Index hidden, int heads, std::span<const Segment> segments, bool,
                        const AlignedVector<T>& probs, const Matrix<T>& dout, Matrix<T>& dqkv) {
  const Index dk = hidden / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dk));
  dqkv.setZero(qkv.rows(), 3 * hidden);
  Matrix<T> dP, dS;
  std::size_t offset = 0;
  for (const auto& s : segments) {
    const Index L = s.len;
    for (int h = 0; h < heads; ++h) {
      const auto q = qkv.block(s.start, h * dk, L, dk);
      const auto k = qkv.block(s.start, hidden + h * dk, L, dk);
      const auto v = qkv.block(s.start, 2 * hidden + h * dk, L, dk);
      const auto dO = dout.block(s.start, h * dk, L, dk);
      Eigen::Map<const Matrix<T>> P(probs.data() + offset, L, L);
      dqkv.block(s.start, 2 * hidden + h * dk, L, dk).noalias() = P.transpose() * dO;
      dP.noalias() = dO * v.transpose();
      // Masked entries have P = 0, so their score gradient vanishes.
      const ColVector<T> rs = (dP.array() * P.array()).rowwise().sum();
      dS = P.array() * (dP.array().colwise() - rs.array());
      dqkv.block(s.start, h * dk, L, dk).noalias() = (dS * k) * scale;
      dqkv.block(s.start, hidden + h * dk, L, dk).noalias() = (dS.transpose() * q) * scale;
      offset += static_cast<std::size_t>(L * L);
    }
  }
}

// ---- TransformerBlock ----

template <typename T>
TransformerBlock TransformerBlock::create(ModelParams<T>& p, const std::string& name, const BlockSpec& spec, Rng& rng) {
  require(spec.heads > 0 && spec.hidden % spec.heads == 0, "transformer block: hidden size not divisible by heads");
  TransformerBlock tb;
  tb.spec = spec;
  const Index H = spec.hidden;
  if (spec.pre_ln) tb.ln0 = LayerNorm::create(p, name + ".ln0", H);
  tb.qkv = Dense::create(p, name + ".qkv", H, 3 * H, spec.qkv_relu, rng);
  tb.out = Dense::create(p, name + ".out", H, H, false, rng);
  tb.ln1 = LayerNorm::create(p, name + ".ln1", H);
  tb.ff1 = Dense::create(p, name + ".ff1", H, spec.ffn, true, rng);
  tb.ff2 = Dense::create(p, name + ".ff2", spec.ffn, H, false, rng);
  return tb;
}

template <typename T>
void TransformerBlock::forward(const ModelParams<T>& p, const Matrix<T>& x, std::span<const Segment> segments,
                               Matrix<T>& y, BlockCache<T>& c) const {
  c.x = x;
  const Matrix<T>* attn_in = &c.x;
  if (spec.pre_ln) {
    ln0.forward(p, c.x, c.n0, c.ln0);
    attn_in = &c.n0;
  }
  qkv.forward(p, *attn_in, c.qkv);
  attention_forward(c.qkv, spec.hidden, spec.heads, segments, spec.causal, c.att, c.probs);
  out.forward(p, c.att, c.h);
  c.h += c.x;
  ln1.forward(p, c.h, c.n1, c.ln1);
  ff1.forward(p, c.n1, c.f1);
  ff2.forward(p, c.f1, c.f2);
  y = c.h + c.f2;
}

template <typename T>
void TransformerBlock::backward(ModelParams<T>& p, std::span<const Segment> segments, const BlockCache<T>& c,
                                const Matrix<T>& dy, Matrix<T>& dx) const {
  Matrix<T> g = dy, df1, dn1, dh;
  ff2.backward(p, c.f1, c.f2, g, &df1);
  ff1.backward(p, c.n1, c.f1, df1, &dn1);
  ln1.backward(p, c.ln1, dn1, dh);
  dh += dy;
  Matrix<T> datt, dqkv, din;
  Matrix<T> dh_copy = dh;
  out.backward(p, c.att, c.h, dh_copy, &datt);
  attention_backward(c.qkv, spec.hidden, spec.heads, segments, spec.causal, c.probs, datt, dqkv);
  const Matrix<T>& attn_in = spec.pre_ln ? c.n0 : c.x;
  qkv.backward(p, attn_in, c.qkv, dqkv, &din);
  if (spec.pre_ln) {
    ln0.backward(p, c.ln0, din, dx);
    dx += dh;
  } else {
    dx = din + dh;
  }
}

#define OTONAV_INSTANTIATE(T)                                                                                        \
  template Dense Dense::create(ModelParams<T>&, const std::string&, Index, Index, bool, Rng&);                       \
  template void Dense::forward(const ModelParams<T>&, const Matrix<T>&, Matrix<T>&) const;                           \
  template void Dense::backward(ModelParams<T>&, const Matrix<T>&, const Matrix<T>&, Matrix<T>&, Matrix<T>*) const; \
  template LayerNorm LayerNorm::create(ModelParams<T>&, const std::string&, Index);                                  \
  template void LayerNorm::forward(const ModelParams<T>&, const Matrix<T>&, Matrix<T>&, LayerNormCache<T>&) const;   \
  template void LayerNorm::backward(ModelParams<T>&, const LayerNormCache<T>&, const Matrix<T>&, Matrix<T>&) const;  \
  template Embedding Embedding::create(ModelParams<T>&, const std::string&, Index, Index, Rng&);                     \
  template void Embedding::add_forward(const ModelParams<T>&, std::span<const int>, Matrix<T>&) const;               \
  template void Embedding::backward(ModelParams<T>&, std::span<const int>, const Matrix<T>&) const;                  \
  template void attention_forward(const Matrix<T>&, Index, int, std::span<const Segment>, bool, Matrix<T>&,          \
                                  AlignedVector<T>&);                                                                  \
  template void attention_backward(const Matrix<T>&, Index, int, std::span<const Segment>, bool,                     \
                                   const AlignedVector<T>&, const Matrix<T>&, Matrix<T>&);                             \
  template TransformerBlock TransformerBlock::create(ModelParams<T>&, const std::string&, const BlockSpec&, Rng&);   \
  template void TransformerBlock::forward(const ModelParams<T>&, const Matrix<T>&, std::span<const Segment>,         \
                                          Matrix<T>&, BlockCache<T>&) const;                                         \
  template void TransformerBlock::backward(ModelParams<T>&, std::span<const Segment>, const BlockCache<T>&,          \
                                           const Matrix<T>&, Matrix<T>&) const;

OTONAV_INSTANTIATE(float)
OTONAV_INSTANTIATE(double)

#undef OTONAV_INSTANTIATE

}  // namespace otonav::net
