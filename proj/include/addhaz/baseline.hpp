#pragma once

#include <algorithm>
#include <vector>

namespace addhaz {

/// Step-function cumulative baseline hazard over distinct event times.
struct BaselineHazard {
  std::vector<double> times;        // strictly increasing event times
  std::vector<double> increments;   // dH0 at each time
  std::vector<double> cumulative;   // running sum of increments

  /// Number of event times <= t.
  std::size_t steps_through(double t) const {
    return static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
  }

  /// H0(t); 0 before the first event time, last value beyond the support.
  double cumulative_at(double t) const {
    const std::size_t k = steps_through(t);
    return k == 0 ? 0.0 : cumulative[k - 1];
  }

  bool operator==(const BaselineHazard&) const = default;
};

}  // namespace addhaz
