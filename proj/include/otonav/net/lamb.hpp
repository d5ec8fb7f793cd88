#pragma once

#include <stdexcept>

#include "otonav/net/params.hpp"

namespace otonav::net {

struct LambConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-6;
  double weight_decay = 0.0;  // decoupled
  double max_trust = 10.0;
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One LAMB step over every block using the accumulated gradients. All
// gradients are validated before any parameter changes.
template <typename T>
void lamb_step(ModelParams<T>& p, const LambConfig& cfg);

bool all_finite(const ModelParams<float>& p);

}  // namespace otonav::net
