#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "otonav/dataset/trajectory.hpp"
#include "otonav/json_util.hpp"
#include "otonav/net/layers.hpp"
#include "otonav/rtgp/rtgp.hpp"

namespace otonav::policy {

using net::Index;
using net::Matrix;
using net::ModelParams;
using net::Segment;

// Dataset actions are clipped to this fraction of v_max before regression,
// which keeps them inside the open range of the squashing map.
inline constexpr double kActionClip = 0.999;

struct PolicyConfig {
  std::size_t state_dim = 41;
  Index hidden = 128;
  int heads = 4;
  Index ffn = 256;
  int layers = 3;
  std::size_t context = 20;  // K
  std::size_t max_steps = 100;
  double v_max = 1.0;
  bool use_action_tokens = true;
  // false hides the robot's own velocity (state slots 1 and 2) from the
  // policy. Under a smooth behavior policy that velocity is nearly the next
  // action, and a network that sees it learns to copy it.
  bool velocity_input = true;

  std::size_t tokens_per_step() const { return use_action_tokens ? 3 : 2; }
  void validate() const;
};

void to_json(Json& j, const PolicyConfig& c);
void from_json(const Json& j, PolicyConfig& c);

enum class RtgSource { labels, rtgp, fixed };

std::string_view to_string(RtgSource s);
RtgSource rtg_source_from_string(std::string_view s);

// (R, s, a) triples for a batch of windows. Step rows are grouped by window.
// The action of a step that has not been taken yet is zero; causal masking
// keeps it from influencing that step's own prediction.
template <typename T>
struct TokenSequence {
  Matrix<T> rtg;      // steps x 1
  Matrix<T> states;   // steps x state_dim
  Matrix<T> actions;  // steps x 2
  std::vector<int> timestep;
  std::vector<Segment> steps;

  Index num_steps() const { return rtg.rows(); }
};

// rtg[w] lists return-to-go values by absolute step for window w (offline
// labels or RTGP predictions). In fixed mode every slot holds `fixed_value`
// and `rtg` may be empty.
template <typename T>
TokenSequence<T> tokenize(std::span<const dataset::StepWindow> windows, std::span<const std::span<const double>> rtg,
                          RtgSource source, double fixed_value = 2.0);

// Regression targets: dataset actions clipped to kActionClip * v_max.
Matrix<double> action_targets(std::span<const dataset::StepWindow> windows, double v_max);

template <typename T>
struct PolicyCache {
  Matrix<T> states_in;  // masked copy when the velocity input is off
  Matrix<T> er, es, ea, x, x0, y, ys, z;
  net::LayerNormCache<T> ln_in, ln_out;
  std::vector<net::BlockCache<T>> blocks;
  std::vector<Matrix<T>> block_out;
};

// Causal transformer over interleaved (R, s, a) tokens. Actions are read at
// the state-token positions and squashed radially:
//   a = v_max * tanh(|z|) * z / |z|
class Policy {
 public:
  Policy(const PolicyConfig& cfg, ModelParams<float>& params, std::uint64_t seed);
  static Policy bind(const PolicyConfig& cfg, const ModelParams<float>& params);

  const PolicyConfig& config() const { return cfg_; }

  template <typename T>
  void forward(const ModelParams<T>& p, const TokenSequence<T>& seq, Matrix<T>& actions, PolicyCache<T>& cache) const;

  template <typename T>
  void backward(ModelParams<T>& p, const TokenSequence<T>& seq, const PolicyCache<T>& cache,
                const Matrix<T>& d_actions) const;

  static std::size_t parameter_count(const PolicyConfig& cfg);

  const net::Dense& head() const { return head_; }

 private:
  Policy() = default;
  void build(ModelParams<float>& p, Rng& rng);

  PolicyConfig cfg_;
  net::Dense embed_rtg_, embed_state_, embed_action_, head_;
  net::Embedding time_;
  net::LayerNorm ln_in_, ln_out_;
  std::vector<net::TransformerBlock> blocks_;
};

// Radial tanh squash and its Jacobian-vector product.
void squash(double zx, double zy, double v_max, double& ax, double& ay);
void squash_backward(double zx, double zy, double v_max, double gx, double gy, double& dzx, double& dzy);

// Mean over windows of the per-window mean squared action error
// (1/K_w) sum_k |a_k - a_hat_k|^2.
template <typename T>
double dt_loss(const Matrix<T>& pred, const Matrix<double>& targets, std::span<const Segment> steps, Matrix<T>* d_pred);

// Per-episode rollout state. Each call computes the conditioning value for
// the current step, appends it to the context and returns the action at the
// last position of the most recent K steps.
class Agent {
 public:
  Agent(const Policy& policy, const ModelParams<float>& theta, RtgSource source, double fixed_value = 2.0,
        const rtgp::Rtgp* rtgp = nullptr, const ModelParams<float>* phi = nullptr);

  // Labels mode reads conditioning from these values (absolute step index).
  void set_labels(std::vector<double> labels) { labels_ = std::move(labels); }

  void reset();
  // Returns the action in the robot-centric frame of `obs`; controller()
  // rotates it into the world frame.
  sim::Action act(const sim::RobotFrameState& obs, const dataset::Trajectory& so_far);
  const std::vector<double>& conditioning() const { return rtg_; }

  dataset::Controller controller();

 private:
  const Policy* policy_;
  const ModelParams<float>* theta_;
  RtgSource source_;
  double fixed_value_;
  const rtgp::Rtgp* rtgp_;
  const ModelParams<float>* phi_;
  std::vector<double> labels_;
  std::vector<double> states_;
  std::vector<double> rtg_;
};

}  // namespace otonav::policy
