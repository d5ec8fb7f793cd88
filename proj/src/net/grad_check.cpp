#include "otonav/net/grad_check.hpp"

#include "otonav/net/layers.hpp"

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

namespace otonav::net {

GradCheckReport grad_check(ModelParams<double>& params, const LossFunction& loss, std::size_t samples,
                           std::uint64_t seed, double h, double floor) {
  params.zero_grad();
  loss(params, true);

  const std::size_t total = params.num_values();
  const bool sweep = samples == 0 || samples >= total;
  const std::size_t target = sweep ? total : samples;
  const std::size_t max_attempts = sweep ? total : 20 * samples;
  Rng rng(seed);
  std::size_t sweep_block = 0;
  Index sweep_index = 0;

  GradCheckReport report;
  struct PatternScope {
    PatternScope() { ActivationPattern::enable(true); }
    ~PatternScope() { ActivationPattern::enable(false); }
  } scope;
  for (std::size_t attempt = 0; attempt < max_attempts && report.checked < target; ++attempt) {
    std::size_t b;
    Index i;
    if (sweep) {
      while (sweep_index >= params[sweep_block].value.size()) {
        ++sweep_block;
        sweep_index = 0;
      }
      b = sweep_block;
      i = sweep_index++;
    } else {
      b = report.checked % params.size();
      i = static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(params[b].value.size())));
    }
    double& w = params[b].value.data()[i];
    const double saved = w;
    w = saved + h;
    ActivationPattern::reset();
    const double up = loss(params, false);
    const std::uint64_t pattern_up = ActivationPattern::hash();
    w = saved - h;
    ActivationPattern::reset();
    const double down = loss(params, false);
    const std::uint64_t pattern_down = ActivationPattern::hash();
    w = saved;
    if (pattern_up != pattern_down) {
      ++report.skipped;
      continue;
    }
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = params[b].grad.data()[i];
    const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
    ++report.checked;
    if (rel > report.max_rel_error || report.checked == 1) {
      report.max_rel_error = rel;
      report.worst_block = params[b].name;
      report.worst_index = i;
      report.worst_analytic = analytic;
      report.worst_numeric = numeric;
    }
  }
  return report;
}

}  // namespace otonav::net
