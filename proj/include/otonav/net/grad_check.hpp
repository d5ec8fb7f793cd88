#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "otonav/net/params.hpp"

namespace otonav::net {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates whose step crossed a ReLU kink
  std::string worst_block;
  Index worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Returns the loss; when `backward` is set it also accumulates gradients into
// the (already zeroed) parameter gradients.
using LossFunction = std::function<double(ModelParams<double>&, bool backward)>;

// Central differences against the analytic gradient. With samples == 0 or
// samples >= the parameter count every coordinate is checked; otherwise
// coordinates are drawn round-robin over blocks so each block is covered.
// Relative error is |a - n| / max(|a|, |n|, floor).
// A central difference is only a valid oracle where the loss is smooth over
// [w - h, w + h]. When the ReLU on/off pattern differs between the two
// evaluations the sampled coordinate is replaced by a fresh draw (full-sweep
// mode just skips it); `skipped` counts these.
GradCheckReport grad_check(ModelParams<double>& params, const LossFunction& loss, std::size_t samples,
                           std::uint64_t seed, double h = 1e-5, double floor = 1e-6);

}  // namespace otonav::net
