#pragma once

// Generators and brute-force oracles shared by the unit and acceptance
// tests. Oracles are written directly from the definitions, without the
// sorting and streaming tricks the library uses.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "addhaz/data.hpp"
#include "addhaz/model.hpp"
#include "addhaz/random.hpp"

namespace addhaz::testing {

struct SyntheticSpec {
  Index rows = 200;
  int features = 3;
  int binary_features = 0;     // the last `binary_features` columns are 0/1
  std::vector<double> beta;    // true log-risk coefficients (padded with 0)
  double censor_rate = 0.3;    // exponential censoring rate
  double tie_grid = 0.0;       // round durations up to multiples of this (0 = none)
};

inline SurvivalDataset synthetic_survival(const SyntheticSpec& spec, Rng& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SurvivalDataset d;
  d.features.resize(spec.rows, spec.features);
  d.durations.resize(spec.rows);
  d.events.resize(spec.rows);
  for (int k = 0; k < spec.features; ++k) {
    d.names.push_back("x" + std::to_string(k + 1));
    const bool binary = k >= spec.features - spec.binary_features;
    d.kinds.push_back(binary ? FeatureKind::binary : FeatureKind::continuous);
  }
  for (Index r = 0; r < spec.rows; ++r) {
    double h = 0.0;
    for (int k = 0; k < spec.features; ++k) {
      const bool binary = d.kinds[k] == FeatureKind::binary;
      const double v = binary ? (unit(rng) < 0.5 ? 0.0 : 1.0) : normal(rng);
      d.features(r, k) = v;
      if (k < static_cast<int>(spec.beta.size())) h += spec.beta[k] * v;
    }
    const double t = -std::log(1.0 - unit(rng)) / std::exp(h);
    const double c = spec.censor_rate > 0.0 ? -std::log(1.0 - unit(rng)) / spec.censor_rate
                                            : std::numeric_limits<double>::infinity();
    double dur = std::min(t, c);
    if (spec.tie_grid > 0.0) dur = std::ceil(dur / spec.tie_grid) * spec.tie_grid;
    d.durations(r) = dur;
    d.events(r) = t <= c ? 1 : 0;
  }
  if (d.event_count() == 0) d.events(0) = 1;
  return d;
}

/// (1/#events) sum_i E_i [log sum_{j: T_j >= T_i} exp(h_j) - h_i].
inline double brute_coxph_loss(const Eigen::VectorXd& h, const Eigen::VectorXd& T,
                               const Eigen::VectorXi& E) {
  double total = 0.0;
  int events = 0;
  for (Index i = 0; i < h.size(); ++i) {
    if (E(i) != 1) continue;
    long double s = 0.0L;
    for (Index j = 0; j < h.size(); ++j) {
      if (T(j) >= T(i)) s += std::exp(static_cast<long double>(h(j)) - h(i));
    }
    total += static_cast<double>(std::log(s));
    ++events;
  }
  return total / events;
}

struct BrutePairs {
  std::int64_t comparable = 0;
  std::int64_t concordant = 0;
  std::int64_t tied = 0;
};

/// Every ordered pair with E_i = 1 and T_i < T_j; `compare(i, j)`
/// returns +1 when the pair is concordant, 0 on a tie, -1 otherwise.
template <typename Compare>
BrutePairs brute_pairs(const Eigen::VectorXd& T, const Eigen::VectorXi& E, Compare&& compare) {
  BrutePairs p;
  for (Index i = 0; i < T.size(); ++i) {
    for (Index j = 0; j < T.size(); ++j) {
      if (E(i) != 1 || !(T(i) < T(j))) continue;
      ++p.comparable;
      const int c = compare(i, j);
      if (c > 0) ++p.concordant;
      if (c == 0) ++p.tied;
    }
  }
  return p;
}

/// Nelson-Aalen: at each distinct event time, events / number at risk.
inline std::map<double, double> nelson_aalen(const Eigen::VectorXd& T, const Eigen::VectorXi& E) {
  std::map<double, int> deaths;
  for (Index i = 0; i < T.size(); ++i) {
    if (E(i) == 1) ++deaths[T(i)];
  }
  std::map<double, double> cumulative;
  double acc = 0.0;
  for (const auto& [t, d] : deaths) {
    int at_risk = 0;
    for (Index i = 0; i < T.size(); ++i) at_risk += T(i) >= t ? 1 : 0;
    acc += static_cast<double>(d) / at_risk;
    cumulative[t] = acc;
  }
  return cumulative;
}

/// Residual = x1 * x2 + unit noise over `features` standard-normal columns.
inline std::pair<SurvivalDataset, Eigen::VectorXd> planted_interaction(Index n, int features,
                                                                       std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  SurvivalDataset d;
  d.features.resize(n, features);
  d.durations = Eigen::VectorXd::Ones(n);
  d.events = Eigen::VectorXi::Ones(n);
  for (int k = 0; k < features; ++k) {
    d.names.push_back("x" + std::to_string(k + 1));
    d.kinds.push_back(FeatureKind::continuous);
  }
  Eigen::VectorXd residual(n);
  for (Index r = 0; r < n; ++r) {
    for (int k = 0; k < features; ++k) d.features(r, k) = normal(rng);
    residual(r) = d.features(r, 0) * d.features(r, 1) + normal(rng);
  }
  return {d, residual};
}

/// Sums isolated per-net evaluations in net order.
inline double isolated_sum(const AdditiveRiskModel& m, const Eigen::VectorXd& x, double t = 0.0) {
  double s = m.net_output(0, x, t);
  for (int k = 1; k < m.n_nets(); ++k) s += m.net_output(k, x, t);
  return s;
}

inline ModelConfig small_config(ModelKind kind, int n_features, std::vector<FeaturePair> pairs = {}) {
  ModelConfig c;
  c.kind = kind;
  c.n_features = n_features;
  c.pairs = std::move(pairs);
  c.hidden_sizes = kind == ModelKind::linear ? std::vector<int>{} : std::vector<int>{8, 4};
  return c;
}

struct NumericCsv {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Plain comma-separated numeric table with a header line.
inline NumericCsv read_numeric_csv(const std::string& text) {
  NumericCsv out;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (first) {
      out.header = cells;
      first = false;
      continue;
    }
    std::vector<double> row;
    for (const std::string& c : cells) row.push_back(std::strtod(c.c_str(), nullptr));
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace addhaz::testing
