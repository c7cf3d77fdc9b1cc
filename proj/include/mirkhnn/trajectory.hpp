#pragma once

#include <string>
#include <vector>

#include "mirkhnn/errors.hpp"
#include "mirkhnn/types.hpp"

namespace mirkhnn {

/// Samples y(t_n) on the uniform grid t_n = t0 + n h, n = 0..N.
struct Trajectory {
  double t0 = 0.0;
  double h = 0.0;
  std::vector<State> states;
  std::string system_name;

  /// Number of transitions N (one less than the number of samples).
  long transitions() const noexcept { return static_cast<long>(states.size()) - 1; }
  double time(long n) const noexcept { return t0 + static_cast<double>(n) * h; }
  Eigen::Index dim() const noexcept { return states.empty() ? 0 : states.front().size(); }

  void validate() const {
    if (!(h > 0.0)) throw InvalidArgument("trajectory: step size must be positive");
    if (states.empty()) throw InvalidArgument("trajectory: no samples");
    for (const auto& y : states)
      if (y.size() != dim()) throw InvalidArgument("trajectory: inconsistent state dimensions");
  }
};

}  // namespace mirkhnn
