#include "otonav/rtgp/rtgp.hpp"

#include <algorithm>
#include <stdexcept>

namespace otonav::rtgp {

using net::BlockSpec;
using net::Dense;
using net::Embedding;
using net::TransformerBlock;

void RtgpConfig::validate() const {
  if (hidden <= 0 || heads <= 0 || hidden % heads != 0) throw ConfigError("rtgp: hidden must be a positive multiple of heads");
  if (ffn <= 0 || head_hidden <= 0) throw ConfigError("rtgp: layer widths must be positive");
  if (window == 0) throw ConfigError("rtgp: window must be positive");
  if (max_steps == 0) throw ConfigError("rtgp: max_steps must be positive");
}

void to_json(Json& j, const RtgpConfig& c) {
  j = Json{{"num_peds", c.num_peds}, {"hidden", c.hidden}, {"heads", c.heads},           {"ffn", c.ffn},
           {"window", c.window},     {"head_hidden", c.head_hidden}, {"max_steps", c.max_steps}};
}

void from_json(const Json& j, RtgpConfig& c) {
  require_keys(j, "rtgp", {"num_peds", "hidden", "heads", "ffn", "window", "head_hidden", "max_steps"});
  read_optional(j, "rtgp", "num_peds", c.num_peds);
  read_optional(j, "rtgp", "hidden", c.hidden);
  read_optional(j, "rtgp", "heads", c.heads);
  read_optional(j, "rtgp", "ffn", c.ffn);
  read_optional(j, "rtgp", "window", c.window);
  read_optional(j, "rtgp", "head_hidden", c.head_hidden);
  read_optional(j, "rtgp", "max_steps", c.max_steps);
  c.validate();
}

template <typename T>
RtgpBatch<T> make_batch(std::span<const dataset::StepWindow> windows, std::size_t num_peds) {
  RtgpBatch<T> b;
  const Index N = static_cast<Index>(num_peds) + 1;
  const std::size_t state_dim = sim::joint_width(num_peds);
  b.tokens_per_step = N;
  Index steps = 0;
  for (const auto& w : windows) {
    if (w.size() == 0) throw std::invalid_argument("rtgp: empty window");
    if (w.state_dim != state_dim) throw std::invalid_argument("rtgp: state width does not match pedestrian count");
    steps += static_cast<Index>(w.size());
  }
  b.tokens.setZero(steps * N, kTokenWidth);
  b.timestep.reserve(static_cast<std::size_t>(steps));
  b.token_major.resize(static_cast<std::size_t>(steps * N));
  b.track_time.resize(static_cast<std::size_t>(steps * N));

  Index step_row = 0;
  for (const auto& w : windows) {
    const Index T_w = static_cast<Index>(w.size());
    const Index step0 = step_row;
    for (std::size_t t = w.begin; t < w.end; ++t, ++step_row) {
      const double* s = w.state(t);
      const Index r0 = step_row * N;
      for (Index k = 0; k < sim::kRobotFeatures; ++k) b.tokens(r0, k) = static_cast<T>(s[k]);
      if (t > 0) {
        b.tokens(r0, 7) = static_cast<T>(w.actions[t - 1].x);
        b.tokens(r0, 8) = static_cast<T>(w.actions[t - 1].y);
        b.tokens(r0, 9) = static_cast<T>(w.rewards[t - 1]);
      }
      for (Index i = 1; i < N; ++i) {
        const double* ped = s + sim::kRobotFeatures + (i - 1) * sim::kPedFeatures;
        for (Index k = 0; k < sim::kPedFeatures; ++k) b.tokens(r0 + i, k) = static_cast<T>(ped[k]);
      }
      b.spatial.push_back({r0, N});
      b.timestep.push_back(static_cast<int>(t));
    }
    b.steps.push_back({step0, T_w});
    const Index tok0 = step0 * N;
    for (Index i = 0; i < N; ++i) {
      b.token_tracks.push_back({tok0 + i * T_w, T_w});
      for (Index tau = 0; tau < T_w; ++tau) {
        const auto r = static_cast<std::size_t>(tok0 + i * T_w + tau);
        b.token_major[r] = tok0 + tau * N + i;
        b.track_time[r] = b.timestep[static_cast<std::size_t>(step0 + tau)];
      }
    }
  }
  return b;
}

Rtgp::Rtgp(const RtgpConfig& cfg, ModelParams<float>& params, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  build(params, rng);
}

Rtgp Rtgp::bind(const RtgpConfig& cfg, const ModelParams<float>& params) {
  ModelParams<float> scratch;
  Rtgp model(cfg, scratch, 0);
  if (scratch.size() != params.size()) throw std::invalid_argument("rtgp: parameter set does not match the configuration");
  for (std::size_t i = 0; i < scratch.size(); ++i)
    if (scratch[i].name != params[i].name || scratch[i].value.rows() != params[i].value.rows() ||
        scratch[i].value.cols() != params[i].value.cols())
      throw std::invalid_argument("rtgp: parameter block '" + params[i].name + "' does not match the configuration");
  return model;
}

void Rtgp::build(ModelParams<float>& p, Rng& rng) {
  const Index H = cfg_.hidden;
  const auto steps = static_cast<Index>(cfg_.max_steps);
  BlockSpec spatial{H, cfg_.heads, cfg_.ffn, false, true, false};
  BlockSpec temporal = spatial;
  temporal.causal = true;
  embed_s_ = Dense::create(p, "rtgp.embed_s", kTokenWidth, H, true, rng);
  sb1_ = TransformerBlock::create(p, "rtgp.spatial1", spatial, rng);
  embed_t_ = Dense::create(p, "rtgp.embed_t", kTokenWidth, H, true, rng);
  time1_ = Embedding::create(p, "rtgp.time1", steps, H, rng);
  tb1_ = TransformerBlock::create(p, "rtgp.temporal1", temporal, rng);
  fuse_ = Dense::create(p, "rtgp.fuse", 2 * H, H, true, rng);
  sb2_ = TransformerBlock::create(p, "rtgp.spatial2", spatial, rng);
  time2_ = Embedding::create(p, "rtgp.time2", steps, H, rng);
  tb2_ = TransformerBlock::create(p, "rtgp.temporal2", temporal, rng);
  embed_state_ = Dense::create(p, "rtgp.embed_state", kTokenStateWidth, H, true, rng);
  head1_ = Dense::create(p, "rtgp.head1", 2 * H, cfg_.head_hidden, true, rng);
  head2_ = Dense::create(p, "rtgp.head2", cfg_.head_hidden, 1, false, rng);
}

std::size_t Rtgp::parameter_count(const RtgpConfig& c) {
  const auto H = static_cast<std::size_t>(c.hidden), F = static_cast<std::size_t>(c.ffn);
  const auto dense = [](std::size_t i, std::size_t o) { return i * o + o; };
  const std::size_t block = dense(H, 3 * H) + dense(H, H) + 2 * H + dense(H, F) + dense(F, H);
  return 2 * dense(kTokenWidth, H) + dense(2 * H, H) + dense(kTokenStateWidth, H) +
         dense(2 * H, static_cast<std::size_t>(c.head_hidden)) + dense(static_cast<std::size_t>(c.head_hidden), 1) +
         4 * block + 2 * c.max_steps * H;
}

namespace {

// out.row(s) = mean of the N token rows of step s
template <typename T>
void token_mean(const Matrix<T>& x, Index N, Matrix<T>& out) {
  const Index S = x.rows() / N;
  out.setZero(S, x.cols());
  for (Index s = 0; s < S; ++s) out.row(s) = x.middleRows(s * N, N).colwise().sum() / static_cast<T>(N);
}

template <typename T>
void token_mean_backward(const Matrix<T>& d, Index N, Matrix<T>& dx) {
  dx.resize(d.rows() * N, d.cols());
  for (Index s = 0; s < d.rows(); ++s) dx.middleRows(s * N, N).rowwise() = d.row(s) / static_cast<T>(N);
}

}  // namespace

template <typename T>
void Rtgp::forward(const ModelParams<T>& p, const RtgpBatch<T>& b, Matrix<T>& out, RtgpCache<T>& c) const {
  const Index H = cfg_.hidden;
  const Index N = b.tokens_per_step;
  if (N != static_cast<Index>(cfg_.num_peds) + 1) throw std::invalid_argument("rtgp: batch pedestrian count mismatch");
  for (const auto& s : b.steps)
    if (static_cast<std::size_t>(s.len) > cfg_.window) throw std::invalid_argument("rtgp: window longer than configured");
  const Matrix<T>& X = b.tokens;
  const Index R = X.rows();

  // Spatial path.
  embed_s_.forward(p, X, c.es);
  sb1_.forward(p, c.es, b.spatial, c.fs, c.sb1);

  // Temporal path, one causal track per token.
  c.xp.resize(R, X.cols());
  for (Index r = 0; r < R; ++r) c.xp.row(r) = X.row(b.token_major[static_cast<std::size_t>(r)]);
  embed_t_.forward(p, c.xp, c.et);
  c.et_in = c.et;
  time1_.add_forward(p, b.track_time, c.et_in);
  Matrix<T> ftp;
  tb1_.forward(p, c.et_in, b.token_tracks, ftp, c.tb1);
  c.ft.resize(R, H);
  for (Index r = 0; r < R; ++r) c.ft.row(b.token_major[static_cast<std::size_t>(r)]) = ftp.row(r);

  // Fusion and refinement.
  c.cat.resize(R, 2 * H);
  c.cat << c.fs, c.ft;
  fuse_.forward(p, c.cat, c.g);
  sb2_.forward(p, c.g, b.spatial, c.g2, c.sb2);
  token_mean(c.g2, N, c.pooled);
  time2_.add_forward(p, b.timestep, c.pooled);
  tb2_.forward(p, c.pooled, b.steps, c.fst, c.tb2);

  // Causal average over the window prefix.
  c.avg.resize(c.fst.rows(), H);
  for (const auto& s : b.steps) {
    net::ColVector<T> acc;
    acc.setZero(H);
    for (Index j = 0; j < s.len; ++j) {
      acc += c.fst.row(s.start + j).transpose();
      c.avg.row(s.start + j) = acc.transpose() / static_cast<T>(j + 1);
    }
  }

  // Current-state embedding, pooled over agents.
  c.xs = X.leftCols(kTokenStateWidth);
  embed_state_.forward(p, c.xs, c.se_tok);
  token_mean(c.se_tok, N, c.se);

  c.head_in.resize(c.avg.rows(), 2 * H);
  c.head_in << c.avg, c.se;
  head1_.forward(p, c.head_in, c.h1);
  head2_.forward(p, c.h1, c.out);
  out = c.out;
}

template <typename T>
void Rtgp::backward(ModelParams<T>& p, const RtgpBatch<T>& b, const RtgpCache<T>& c, const Matrix<T>& d_out) const {
  const Index H = cfg_.hidden;
  const Index N = b.tokens_per_step;
  const Index R = b.tokens.rows();

  Matrix<T> g = d_out, dh1, dhead;
  head2_.backward<T>(p, c.h1, c.out, g, &dh1);
  head1_.backward<T>(p, c.head_in, c.h1, dh1, &dhead);

  Matrix<T> dse_tok;
  token_mean_backward<T>(dhead.rightCols(H), N, dse_tok);
  embed_state_.backward<T>(p, c.xs, c.se_tok, dse_tok, nullptr);

  const Matrix<T> davg = dhead.leftCols(H);
  Matrix<T> dfst(davg.rows(), H);
  for (const auto& s : b.steps) {
    net::ColVector<T> acc;
    acc.setZero(H);
    for (Index j = s.len; j-- > 0;) {
      acc += davg.row(s.start + j).transpose() / static_cast<T>(j + 1);
      dfst.row(s.start + j) = acc.transpose();
    }
  }

  Matrix<T> dpooled;
  tb2_.backward(p, b.steps, c.tb2, dfst, dpooled);
  time2_.backward(p, b.timestep, dpooled);
  Matrix<T> dg2, dg, dcat;
  token_mean_backward(dpooled, N, dg2);
  sb2_.backward(p, b.spatial, c.sb2, dg2, dg);
  fuse_.backward<T>(p, c.cat, c.g, dg, &dcat);

  Matrix<T> dftp(R, H);
  for (Index r = 0; r < R; ++r) dftp.row(r) = dcat.block(b.token_major[static_cast<std::size_t>(r)], H, 1, H);
  Matrix<T> det;
  tb1_.backward(p, b.token_tracks, c.tb1, dftp, det);
  time1_.backward(p, b.track_time, det);
  embed_t_.backward<T>(p, c.xp, c.et, det, nullptr);

  Matrix<T> dfs = dcat.leftCols(H), des;
  sb1_.backward(p, b.spatial, c.sb1, dfs, des);
  embed_s_.backward<T>(p, b.tokens, c.es, des, nullptr);
}

template <typename T>
double rtgp_loss(const Matrix<T>& pred, std::span<const double> targets, Matrix<T>* d_out) {
  if (pred.rows() == 0) throw std::invalid_argument("rtgp_loss: empty batch");
  if (static_cast<std::size_t>(pred.rows()) != targets.size() || pred.cols() != 1)
    throw std::invalid_argument("rtgp_loss: target count mismatch");
  const double n = static_cast<double>(targets.size());
  double loss = 0.0;
  if (d_out) d_out->resize(pred.rows(), 1);
  for (Index i = 0; i < pred.rows(); ++i) {
    const double e = static_cast<double>(pred(i, 0)) - targets[static_cast<std::size_t>(i)];
    loss += e * e;
    if (d_out) (*d_out)(i, 0) = static_cast<T>(2.0 * e / n);
  }
  return loss / n;
}

std::vector<dataset::StepWindow> prediction_blocks(const dataset::Trajectory& t, std::size_t window) {
  return dataset::tile_windows(t, window);
}

std::vector<double> predict_trajectory(const Rtgp& model, const ModelParams<float>& params,
                                       const dataset::Trajectory& t) {
  const auto blocks = prediction_blocks(t, model.config().window);
  const auto batch = make_batch<float>(blocks, model.config().num_peds);
  Matrix<float> out;
  RtgpCache<float> cache;
  model.forward(params, batch, out, cache);
  std::vector<double> r(static_cast<std::size_t>(out.rows()));
  for (Index i = 0; i < out.rows(); ++i) r[static_cast<std::size_t>(i)] = out(i, 0);
  return r;
}

std::vector<double> window_targets(const dataset::Trajectory& t, std::span<const dataset::StepWindow> windows) {
  std::vector<double> y;
  for (const auto& w : windows) y.insert(y.end(), t.rtg.begin() + static_cast<std::ptrdiff_t>(w.begin),
                                         t.rtg.begin() + static_cast<std::ptrdiff_t>(w.end));
  return y;
}

template RtgpBatch<float> make_batch(std::span<const dataset::StepWindow>, std::size_t);
template RtgpBatch<double> make_batch(std::span<const dataset::StepWindow>, std::size_t);
template void Rtgp::forward(const ModelParams<float>&, const RtgpBatch<float>&, Matrix<float>&, RtgpCache<float>&) const;
template void Rtgp::forward(const ModelParams<double>&, const RtgpBatch<double>&, Matrix<double>&,
                            RtgpCache<double>&) const;
template void Rtgp::backward(ModelParams<float>&, const RtgpBatch<float>&, const RtgpCache<float>&,
                             const Matrix<float>&) const;
template void Rtgp::backward(ModelParams<double>&, const RtgpBatch<double>&, const RtgpCache<double>&,
                             const Matrix<double>&) const;
template double rtgp_loss(const Matrix<float>&, std::span<const double>, Matrix<float>*);
template double rtgp_loss(const Matrix<double>&, std::span<const double>, Matrix<double>*);

}  // namespace otonav::rtgp
