#pragma once

#include <cstdint>

#include "otonav/sim/config.hpp"
#include "otonav/sim/types.hpp"

namespace otonav::sim {

// Circle-crossing layout: pedestrian i starts at angle 2*pi*i/n on the circle
// and heads for the antipode; both points receive per-axis uniform noise of
// +-cfg.perturbation. The robot crosses from (0,-R) to (0,R).
Scenario sample_scenario(std::uint64_t seed, const SimConfig& cfg);

}  // namespace otonav::sim
