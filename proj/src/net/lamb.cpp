#include "otonav/net/lamb.hpp"

#include <algorithm>
#include <cmath>

namespace otonav::net {

template <typename T>
void lamb_step(ModelParams<T>& p, const LambConfig& cfg) {
  for (const auto& b : p.blocks())
    if (!b.grad.allFinite()) throw NonFiniteError("non-finite gradient in block '" + b.name + "'");

  ++p.step;
  const double t = static_cast<double>(p.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);

  Matrix<T> u;
  for (auto& b : p.blocks()) {
    b.m = b1 * b.m + (T(1) - b1) * b.grad;
    b.v = b2 * b.v + (T(1) - b2) * b.grad.cwiseProduct(b.grad);
    u = (b.m.array() / static_cast<T>(c1)) /
        ((b.v.array() / static_cast<T>(c2)).sqrt() + static_cast<T>(cfg.eps));
    if (cfg.weight_decay != 0.0) u += static_cast<T>(cfg.weight_decay) * b.value;
    const double wn = static_cast<double>(b.value.norm());
    const double un = static_cast<double>(u.norm());
    double trust = 1.0;
    if (wn > 0.0 && un > 0.0) trust = std::clamp(wn / un, 0.0, cfg.max_trust);
    b.value -= static_cast<T>(cfg.lr * trust) * u;
  }
}

bool all_finite(const ModelParams<float>& p) {
  for (const auto& b : p.blocks())
    if (!b.value.allFinite()) return false;
  return true;
}

template void lamb_step(ModelParams<float>&, const LambConfig&);
template void lamb_step(ModelParams<double>&, const LambConfig&);

}  // namespace otonav::net
