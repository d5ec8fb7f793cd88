#include "otonav/policy/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "otonav/sim/robot_frame.hpp"

namespace otonav::policy {

using net::BlockSpec;
using net::Dense;
using net::Embedding;
using net::LayerNorm;
using net::TransformerBlock;

void PolicyConfig::validate() const {
  if (state_dim == 0) throw ConfigError("policy: state_dim must be positive");
  if (!velocity_input && state_dim < 3) throw ConfigError("policy: state too narrow to hold a velocity");
  if (hidden <= 0 || heads <= 0 || hidden % heads != 0) throw ConfigError("policy: hidden must be a positive multiple of heads");
  if (ffn <= 0 || layers <= 0) throw ConfigError("policy: ffn and layers must be positive");
  if (context == 0 || max_steps == 0) throw ConfigError("policy: context and max_steps must be positive");
  if (!(v_max > 0.0)) throw ConfigError("policy: v_max must be positive");
}

void to_json(Json& j, const PolicyConfig& c) {
  j = Json{{"state_dim", c.state_dim}, {"hidden", c.hidden},   {"heads", c.heads},
           {"ffn", c.ffn},             {"layers", c.layers},   {"context", c.context},
           {"max_steps", c.max_steps}, {"v_max", c.v_max},     {"use_action_tokens", c.use_action_tokens},
           {"velocity_input", c.velocity_input}};
}

void from_json(const Json& j, PolicyConfig& c) {
  require_keys(j, "policy",
               {"state_dim", "hidden", "heads", "ffn", "layers", "context", "max_steps", "v_max", "use_action_tokens",
                "velocity_input"});
  read_optional(j, "policy", "state_dim", c.state_dim);
  read_optional(j, "policy", "hidden", c.hidden);
  read_optional(j, "policy", "heads", c.heads);
  read_optional(j, "policy", "ffn", c.ffn);
  read_optional(j, "policy", "layers", c.layers);
  read_optional(j, "policy", "context", c.context);
  read_optional(j, "policy", "max_steps", c.max_steps);
  read_optional(j, "policy", "v_max", c.v_max);
  read_optional(j, "policy", "use_action_tokens", c.use_action_tokens);
  read_optional(j, "policy", "velocity_input", c.velocity_input);
  c.validate();
}

std::string_view to_string(RtgSource s) {
  switch (s) {
    case RtgSource::labels: return "labels";
    case RtgSource::rtgp: return "rtgp";
    case RtgSource::fixed: return "fixed";
  }
  return "labels";
}

RtgSource rtg_source_from_string(std::string_view s) {
  if (s == "labels") return RtgSource::labels;
  if (s == "rtgp") return RtgSource::rtgp;
  if (s == "fixed") return RtgSource::fixed;
  throw ConfigError("unknown rtg source '" + std::string(s) + "'");
}

template <typename T>
TokenSequence<T> tokenize(std::span<const dataset::StepWindow> windows, std::span<const std::span<const double>> rtg,
                          RtgSource source, double fixed_value) {
  if (windows.empty()) throw std::invalid_argument("tokenize: empty batch");
  if (source != RtgSource::fixed && rtg.size() != windows.size())
    throw std::invalid_argument("tokenize: one return-to-go array per window required");
  Index S = 0;
  for (const auto& w : windows) {
    if (w.size() == 0) throw std::invalid_argument("tokenize: empty window");
    S += static_cast<Index>(w.size());
  }
  const auto sd = static_cast<Index>(windows.front().state_dim);
  TokenSequence<T> seq;
  seq.rtg.resize(S, 1);
  seq.states.resize(S, sd);
  seq.actions.setZero(S, 2);
  seq.timestep.reserve(static_cast<std::size_t>(S));
  Index row = 0;
  for (std::size_t k = 0; k < windows.size(); ++k) {
    const auto& w = windows[k];
    if (static_cast<Index>(w.state_dim) != sd) throw std::invalid_argument("tokenize: mixed state widths");
    if (source != RtgSource::fixed && rtg[k].size() < w.end) throw std::invalid_argument("tokenize: return-to-go array too short");
    seq.steps.push_back({row, static_cast<Index>(w.size())});
    for (std::size_t t = w.begin; t < w.end; ++t, ++row) {
      seq.rtg(row, 0) = static_cast<T>(source == RtgSource::fixed ? fixed_value : rtg[k][t]);
      const double* s = w.state(t);
      for (Index c = 0; c < sd; ++c) seq.states(row, c) = static_cast<T>(s[c]);
      if (t < w.actions.size()) {
        seq.actions(row, 0) = static_cast<T>(w.actions[t].x);
        seq.actions(row, 1) = static_cast<T>(w.actions[t].y);
      }
      seq.timestep.push_back(static_cast<int>(t));
    }
  }
  return seq;
}

Matrix<double> action_targets(std::span<const dataset::StepWindow> windows, double v_max) {
  Index S = 0;
  for (const auto& w : windows) S += static_cast<Index>(w.size());
  Matrix<double> y(S, 2);
  const double limit = kActionClip * v_max;
  Index row = 0;
  for (const auto& w : windows)
    for (std::size_t t = w.begin; t < w.end; ++t, ++row) {
      sim::Vec2 a = w.actions[t];
      const double n = sim::norm(a);
      if (n > limit) a = a * (limit / n);
      y(row, 0) = a.x;
      y(row, 1) = a.y;
    }
  return y;
}

void squash(double zx, double zy, double v_max, double& ax, double& ay) {
  const double n = std::hypot(zx, zy);
  const double f = n < 1e-3 ? 1.0 - n * n / 3.0 + 2.0 * n * n * n * n / 15.0 : std::tanh(n) / n;
  ax = v_max * f * zx;
  ay = v_max * f * zy;
}

void squash_backward(double zx, double zy, double v_max, double gx, double gy, double& dzx, double& dzy) {
  const double n = std::hypot(zx, zy);
  double f, g;  // f = tanh(n)/n, g = f'(n)/n
  if (n < 1e-3) {
    f = 1.0 - n * n / 3.0 + 2.0 * n * n * n * n / 15.0;
    g = -2.0 / 3.0 + 8.0 * n * n / 15.0;
  } else {
    const double th = std::tanh(n);
    const double sech2 = 1.0 - th * th;
    f = th / n;
    g = (n * sech2 - th) / (n * n * n);
  }
  const double zg = zx * gx + zy * gy;
  dzx = v_max * (f * gx + g * zg * zx);
  dzy = v_max * (f * gy + g * zg * zy);
}

Policy::Policy(const PolicyConfig& cfg, ModelParams<float>& params, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  build(params, rng);
}

Policy Policy::bind(const PolicyConfig& cfg, const ModelParams<float>& params) {
  ModelParams<float> scratch;
  Policy model(cfg, scratch, 0);
  if (scratch.size() != params.size()) throw std::invalid_argument("policy: parameter set does not match the configuration");
  for (std::size_t i = 0; i < scratch.size(); ++i)
    if (scratch[i].name != params[i].name || scratch[i].value.rows() != params[i].value.rows() ||
        scratch[i].value.cols() != params[i].value.cols())
      throw std::invalid_argument("policy: parameter block '" + params[i].name + "' does not match the configuration");
  return model;
}

void Policy::build(ModelParams<float>& p, Rng& rng) {
  const Index H = cfg_.hidden;
  embed_rtg_ = Dense::create(p, "policy.embed_rtg", 1, H, false, rng);
  embed_state_ = Dense::create(p, "policy.embed_state", static_cast<Index>(cfg_.state_dim), H, false, rng);
  if (cfg_.use_action_tokens) embed_action_ = Dense::create(p, "policy.embed_action", 2, H, false, rng);
  time_ = Embedding::create(p, "policy.time", static_cast<Index>(cfg_.max_steps), H, rng);
  ln_in_ = LayerNorm::create(p, "policy.ln_in", H);
  const BlockSpec spec{H, cfg_.heads, cfg_.ffn, true, false, true};
  for (int l = 0; l < cfg_.layers; ++l)
    blocks_.push_back(TransformerBlock::create(p, "policy.block" + std::to_string(l), spec, rng));
  ln_out_ = LayerNorm::create(p, "policy.ln_out", H);
  head_ = Dense::create(p, "policy.head", H, 2, false, rng);
}

std::size_t Policy::parameter_count(const PolicyConfig& c) {
  const auto H = static_cast<std::size_t>(c.hidden), F = static_cast<std::size_t>(c.ffn);
  const auto dense = [](std::size_t i, std::size_t o) { return i * o + o; };
  const std::size_t block = 2 * H + dense(H, 3 * H) + dense(H, H) + 2 * H + dense(H, F) + dense(F, H);
  std::size_t n = dense(1, H) + dense(c.state_dim, H) + c.max_steps * H + 4 * H + dense(H, 2);
  if (c.use_action_tokens) n += dense(2, H);
  return n + static_cast<std::size_t>(c.layers) * block;
}

template <typename T>
void Policy::forward(const ModelParams<T>& p, const TokenSequence<T>& seq, Matrix<T>& actions,
                     PolicyCache<T>& c) const {
  const Index H = cfg_.hidden;
  const auto k = static_cast<Index>(cfg_.tokens_per_step());
  const Index S = seq.num_steps();
  for (const auto& s : seq.steps)
    if (static_cast<std::size_t>(s.len) > cfg_.context) throw std::invalid_argument("policy: window longer than context");

  embed_rtg_.forward(p, seq.rtg, c.er);
  if (!cfg_.velocity_input) {
    c.states_in = seq.states;
    c.states_in.col(1).setZero();
    c.states_in.col(2).setZero();
  }
  embed_state_.forward(p, cfg_.velocity_input ? seq.states : c.states_in, c.es);
  time_.add_forward(p, seq.timestep, c.er);
  time_.add_forward(p, seq.timestep, c.es);
  if (cfg_.use_action_tokens) {
    embed_action_.forward(p, seq.actions, c.ea);
    time_.add_forward(p, seq.timestep, c.ea);
  }
  c.x.resize(k * S, H);
  for (Index s = 0; s < S; ++s) {
    c.x.row(k * s) = c.er.row(s);
    c.x.row(k * s + 1) = c.es.row(s);
    if (k == 3) c.x.row(k * s + 2) = c.ea.row(s);
  }
  std::vector<Segment> tokens;
  for (const auto& s : seq.steps) tokens.push_back({k * s.start, k * s.len});

  ln_in_.forward(p, c.x, c.x0, c.ln_in);
  c.blocks.resize(blocks_.size());
  c.block_out.resize(blocks_.size());
  const Matrix<T>* in = &c.x0;
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    blocks_[l].forward(p, *in, tokens, c.block_out[l], c.blocks[l]);
    in = &c.block_out[l];
  }
  ln_out_.forward(p, *in, c.y, c.ln_out);
  c.ys.resize(S, H);
  for (Index s = 0; s < S; ++s) c.ys.row(s) = c.y.row(k * s + 1);
  head_.forward(p, c.ys, c.z);
  actions.resize(S, 2);
  for (Index s = 0; s < S; ++s) {
    double ax, ay;
    squash(static_cast<double>(c.z(s, 0)), static_cast<double>(c.z(s, 1)), cfg_.v_max, ax, ay);
    actions(s, 0) = static_cast<T>(ax);
    actions(s, 1) = static_cast<T>(ay);
  }
}

template <typename T>
void Policy::backward(ModelParams<T>& p, const TokenSequence<T>& seq, const PolicyCache<T>& c,
                      const Matrix<T>& d_actions) const {
  const Index H = cfg_.hidden;
  const auto k = static_cast<Index>(cfg_.tokens_per_step());
  const Index S = seq.num_steps();
  std::vector<Segment> tokens;
  for (const auto& s : seq.steps) tokens.push_back({k * s.start, k * s.len});

  Matrix<T> dz(S, 2);
  for (Index s = 0; s < S; ++s) {
    double dx, dy;
    squash_backward(static_cast<double>(c.z(s, 0)), static_cast<double>(c.z(s, 1)), cfg_.v_max,
                    static_cast<double>(d_actions(s, 0)), static_cast<double>(d_actions(s, 1)), dx, dy);
    dz(s, 0) = static_cast<T>(dx);
    dz(s, 1) = static_cast<T>(dy);
  }
  Matrix<T> dys;
  head_.backward<T>(p, c.ys, c.z, dz, &dys);
  Matrix<T> dy = Matrix<T>::Zero(k * S, H);
  for (Index s = 0; s < S; ++s) dy.row(k * s + 1) = dys.row(s);

  Matrix<T> g;
  ln_out_.backward(p, c.ln_out, dy, g);
  for (std::size_t l = blocks_.size(); l-- > 0;) {
    Matrix<T> dx;
    blocks_[l].backward(p, tokens, c.blocks[l], g, dx);
    g = std::move(dx);
  }
  Matrix<T> dx;
  ln_in_.backward(p, c.ln_in, g, dx);

  Matrix<T> der(S, H), des(S, H), dea;
  for (Index s = 0; s < S; ++s) {
    der.row(s) = dx.row(k * s);
    des.row(s) = dx.row(k * s + 1);
  }
  time_.backward(p, seq.timestep, der);
  time_.backward(p, seq.timestep, des);
  embed_rtg_.backward<T>(p, seq.rtg, c.er, der, nullptr);
  embed_state_.backward<T>(p, cfg_.velocity_input ? seq.states : c.states_in, c.es, des, nullptr);
  if (k == 3) {
    dea.resize(S, H);
    for (Index s = 0; s < S; ++s) dea.row(s) = dx.row(k * s + 2);
    time_.backward(p, seq.timestep, dea);
    embed_action_.backward<T>(p, seq.actions, c.ea, dea, nullptr);
  }
}

template <typename T>
double dt_loss(const Matrix<T>& pred, const Matrix<double>& targets, std::span<const Segment> steps, Matrix<T>* d_pred) {
  if (steps.empty() || pred.rows() == 0) throw std::invalid_argument("dt_loss: empty batch");
  if (pred.rows() != targets.rows() || pred.cols() != 2 || targets.cols() != 2)
    throw std::invalid_argument("dt_loss: shape mismatch");
  const double W = static_cast<double>(steps.size());
  if (d_pred) d_pred->setZero(pred.rows(), 2);
  std::vector<double> per_window;
  per_window.reserve(steps.size());
  for (const auto& s : steps) {
    double acc = 0.0;
    for (Index r = s.start; r < s.start + s.len; ++r) {
      const double ex = static_cast<double>(pred(r, 0)) - targets(r, 0);
      const double ey = static_cast<double>(pred(r, 1)) - targets(r, 1);
      acc += ex * ex + ey * ey;
      if (d_pred) {
        const double scale = 2.0 / (static_cast<double>(s.len) * W);
        (*d_pred)(r, 0) = static_cast<T>(scale * ex);
        (*d_pred)(r, 1) = static_cast<T>(scale * ey);
      }
    }
    per_window.push_back(acc / static_cast<double>(s.len));
  }
  // Summing in sorted order makes the value independent of window order.
  std::sort(per_window.begin(), per_window.end());
  double total = 0.0;
  for (double v : per_window) total += v;
  return total / W;
}

// ---- Agent ----

Agent::Agent(const Policy& policy, const ModelParams<float>& theta, RtgSource source, double fixed_value,
             const rtgp::Rtgp* rtgp, const ModelParams<float>* phi)
    : policy_(&policy), theta_(&theta), source_(source), fixed_value_(fixed_value), rtgp_(rtgp), phi_(phi) {
  if (source == RtgSource::rtgp && (!rtgp || !phi)) throw std::invalid_argument("agent: rtgp conditioning needs a model");
}

void Agent::reset() {
  states_.clear();
  rtg_.clear();
}

sim::Action Agent::act(const sim::RobotFrameState& obs, const dataset::Trajectory& so_far) {
  const std::size_t t = so_far.size();
  if (rtg_.size() != t) throw std::logic_error("agent: episode history out of sync; call reset() per episode");
  const auto joint = obs.joint();
  const std::size_t sd = joint.size();
  states_.insert(states_.end(), joint.begin(), joint.end());
  const dataset::StepWindow full{states_, so_far.actions, so_far.rewards, sd, 0, t + 1};

  double value = fixed_value_;
  if (source_ == RtgSource::rtgp) {
    dataset::StepWindow w = full;
    const std::size_t K_r = rtgp_->config().window;
    w.begin = K_r * (t / K_r);
    const auto batch = rtgp::make_batch<float>(std::span(&w, 1), rtgp_->config().num_peds);
    Matrix<float> out;
    rtgp::RtgpCache<float> cache;
    rtgp_->forward(*phi_, batch, out, cache);
    value = out(out.rows() - 1, 0);
  } else if (source_ == RtgSource::labels) {
    if (t >= labels_.size()) throw std::out_of_range("agent: no label for this step");
    value = labels_[t];
  }
  rtg_.push_back(value);

  dataset::StepWindow w = full;
  const std::size_t K = policy_->config().context;
  w.begin = t + 1 > K ? t + 1 - K : 0;
  const std::span<const double> rtg_view(rtg_);
  const auto seq = tokenize<float>(std::span(&w, 1), std::span(&rtg_view, 1), RtgSource::labels);
  Matrix<float> a;
  PolicyCache<float> cache;
  policy_->forward(*theta_, seq, a, cache);
  const Index last = a.rows() - 1;
  sim::Action act{static_cast<double>(a(last, 0)), static_cast<double>(a(last, 1))};
  // Float rounding may put the norm a hair above the limit.
  const double n = sim::norm(act);
  const double v_max = policy_->config().v_max;
  if (n > v_max) act = act * (v_max / n);
  return act;
}

dataset::Controller Agent::controller() {
  return [this](const sim::CrowdEnv& env, const sim::RobotFrameState& obs, const dataset::Trajectory& so_far) {
    if (so_far.size() == 0) reset();
    sim::Action a = sim::rotate(act(obs, so_far), sim::frame_angle(env.robot()));
    const double n = sim::norm(a);
    const double v_max = policy_->config().v_max;
    if (n > v_max) a = a * (v_max / n);
    return a;
  };
}

template TokenSequence<float> tokenize(std::span<const dataset::StepWindow>, std::span<const std::span<const double>>,
                                       RtgSource, double);
template TokenSequence<double> tokenize(std::span<const dataset::StepWindow>, std::span<const std::span<const double>>,
                                        RtgSource, double);
template void Policy::forward(const ModelParams<float>&, const TokenSequence<float>&, Matrix<float>&,
                              PolicyCache<float>&) const;
template void Policy::forward(const ModelParams<double>&, const TokenSequence<double>&, Matrix<double>&,
                              PolicyCache<double>&) const;
template void Policy::backward(ModelParams<float>&, const TokenSequence<float>&, const PolicyCache<float>&,
                               const Matrix<float>&) const;
template void Policy::backward(ModelParams<double>&, const TokenSequence<double>&, const PolicyCache<double>&,
                               const Matrix<double>&) const;
template double dt_loss(const Matrix<float>&, const Matrix<double>&, std::span<const Segment>, Matrix<float>*);
template double dt_loss(const Matrix<double>&, const Matrix<double>&, std::span<const Segment>, Matrix<double>*);

}  // namespace otonav::policy
