#pragma once

#include <span>
#include <vector>

#include "otonav/dataset/trajectory.hpp"
#include "otonav/json_util.hpp"
#include "otonav/net/layers.hpp"

namespace otonav::rtgp {

using net::Index;
using net::Matrix;
using net::ModelParams;
using net::Segment;

// Token layout: 7 state slots (robot state padded by one zero), previous
// action (2), previous reward (1). Pedestrian tokens leave the last three
// slots at zero.
inline constexpr Index kTokenWidth = 10;
inline constexpr Index kTokenStateWidth = 7;

struct RtgpConfig {
  std::size_t num_peds = 5;
  Index hidden = 128;
  int heads = 4;
  Index ffn = 256;
  std::size_t window = 20;  // K_r
  Index head_hidden = 256;
  std::size_t max_steps = 100;

  void validate() const;
};

void to_json(Json& j, const RtgpConfig& c);
void from_json(const Json& j, RtgpConfig& c);

// Model inputs for a batch of windows. Step rows are grouped by window;
// token rows are step-major (robot token first, then pedestrians).
template <typename T>
struct RtgpBatch {
  Index tokens_per_step = 0;
  Matrix<T> tokens;
  std::vector<int> timestep;            // absolute episode step, one per step row
  std::vector<Segment> spatial;         // token rows of each step
  std::vector<Segment> steps;           // step rows of each window
  std::vector<Segment> token_tracks;    // rows of the token-major layout, one per (window, token)
  std::vector<Index> token_major;       // token_major[r] = step-major row of token-major row r
  std::vector<int> track_time;          // timestep of each token-major row

  Index num_steps() const { return static_cast<Index>(timestep.size()); }
};

template <typename T>
RtgpBatch<T> make_batch(std::span<const dataset::StepWindow> windows, std::size_t num_peds);

template <typename T>
struct RtgpCache {
  Matrix<T> es, fs, xp, et, et_in, ftp, ft, cat, g, g2, pooled, fst, avg, xs, se_tok, se, head_in, h1, out;
  net::BlockCache<T> sb1, tb1, sb2, tb2;
};

// Spatio-temporal return-to-go predictor. A spatial block attends over the
// agents of each step; a causal temporal block follows each token through
// time. The two encodings are fused per token, refined by a second spatial
// block, averaged over tokens, refined by a causal block over steps and
// prefix-averaged. The head combines that summary with an embedding of the
// current state and predicts the return-to-go at every window position.
class Rtgp {
 public:
  // Registers and initializes all parameter blocks in `params`.
  Rtgp(const RtgpConfig& cfg, ModelParams<float>& params, std::uint64_t seed);
  // Architecture only; `params` must already hold matching blocks.
  static Rtgp bind(const RtgpConfig& cfg, const ModelParams<float>& params);

  const RtgpConfig& config() const { return cfg_; }

  template <typename T>
  void forward(const ModelParams<T>& p, const RtgpBatch<T>& batch, Matrix<T>& out, RtgpCache<T>& cache) const;

  // d_out: gradient with respect to forward's output (one value per step row).
  template <typename T>
  void backward(ModelParams<T>& p, const RtgpBatch<T>& batch, const RtgpCache<T>& cache, const Matrix<T>& d_out) const;

  // Closed-form parameter count for a configuration.
  static std::size_t parameter_count(const RtgpConfig& cfg);

  // Indices for tests that set individual layers.
  const net::Dense& head_hidden_layer() const { return head1_; }
  const net::Dense& head_output_layer() const { return head2_; }

 private:
  Rtgp() = default;
  void build(ModelParams<float>& params, Rng& rng);

  RtgpConfig cfg_;
  net::Dense embed_s_, embed_t_, fuse_, embed_state_, head1_, head2_;
  net::Embedding time1_, time2_;
  net::TransformerBlock sb1_, tb1_, sb2_, tb2_;
};

// Mean squared error over every step row; fills d_out with its gradient.
template <typename T>
double rtgp_loss(const Matrix<T>& pred, std::span<const double> targets, Matrix<T>* d_out);

// Blocked context: the prediction for step t uses steps
// [window * floor(t / window), t]. One forward pass per block covers it.
std::vector<dataset::StepWindow> prediction_blocks(const dataset::Trajectory& t, std::size_t window);

// Predicted return-to-go for every step of a trajectory under blocked context.
std::vector<double> predict_trajectory(const Rtgp& model, const ModelParams<float>& params,
                                       const dataset::Trajectory& t);

// Targets (rtg labels) for the step rows of a window batch, in batch order.
std::vector<double> window_targets(const dataset::Trajectory& t, std::span<const dataset::StepWindow> windows);

}  // namespace otonav::rtgp
