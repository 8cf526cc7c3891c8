#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "addhaz/baseline.hpp"
#include "addhaz/errors.hpp"
#include "addhaz/model.hpp"

namespace addhaz {

/// Breslow estimator: at each distinct event time t_k the increment is
/// d_k / sum_{T_j >= t_k} exp(h_j). Throws EstimatorError without events.
template <typename DH, typename DT, typename DE>
BaselineHazard breslow_baseline(const Eigen::MatrixBase<DH>& h, const Eigen::MatrixBase<DT>& durations,
                                const Eigen::MatrixBase<DE>& events) {
  const Index n = h.size();
  if (durations.size() != n || events.size() != n) {
    throw ShapeError("breslow_baseline: risk, duration and event lengths differ");
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return durations(a) > durations(b); });
  BaselineHazard out;
  // Walk durations downward so the risk-set sum grows monotonically.
  double risk = 0.0;
  std::size_t p = 0;
  std::vector<double> times, incs;
  while (p < order.size()) {
    std::size_t q = p;
    double d = 0.0;
    const double t = durations(order[p]);
    while (q < order.size() && durations(order[q]) == t) {
      risk += std::exp(static_cast<double>(h(order[q])));
      d += static_cast<double>(events(order[q]));
      ++q;
    }
    if (d > 0.0) {
      times.push_back(t);
      incs.push_back(d / risk);
    }
    p = q;
  }
  if (times.empty()) throw EstimatorError("breslow_baseline: no events");
  std::reverse(times.begin(), times.end());
  std::reverse(incs.begin(), incs.end());
  out.times = std::move(times);
  out.increments = std::move(incs);
  out.cumulative.resize(out.increments.size());
  std::partial_sum(out.increments.begin(), out.increments.end(), out.cumulative.begin());
  return out;
}

/// Baseline hazard of a fitted model on raw-unit training rows. For
/// time-varying kinds the risk-set sum at t_k uses exp(h_r(x_j, t_k)).
BaselineHazard breslow_baseline(const AdditiveRiskModel& model, const SurvivalDataset& train);

struct SurvivalCurve {
  std::vector<double> times;
  std::vector<double> survival;
};

/// Cumulative hazard H(t | x_j) for each row (n x grid). Proportional
/// kinds use H0(t) exp(h_r(x)); time-varying kinds accumulate
/// dH0(t_k) exp(h_r(x, t_k)) over baseline times t_k <= t.
Eigen::MatrixXd cumulative_hazard(const AdditiveRiskModel& model, const BaselineHazard& baseline,
                                  const Eigen::MatrixXd& x, const std::vector<double>& grid);

/// S(t | x) = exp(-H(t | x)) on a nondecreasing grid, clamped to [0, 1].
/// Throws ContractError on an unsorted grid.
SurvivalCurve predict_survival(const AdditiveRiskModel& model, const BaselineHazard& baseline,
                               const Eigen::VectorXd& x, const std::vector<double>& grid);

/// Harrell's concordance: pairs with E_i = 1 and T_i < T_j, credit 1 when
/// risk_i > risk_j and 0.5 on ties. Throws EstimatorError when no pair is
/// comparable.
double harrell_cindex(const Eigen::VectorXd& risk, const Eigen::VectorXd& durations,
                      const Eigen::VectorXi& events);

/// Concordance counts kept as integers (ties count 1 in `tied`).
struct ConcordanceCounts {
  std::int64_t comparable = 0;
  std::int64_t concordant = 0;
  std::int64_t tied = 0;

  double value() const;
};

ConcordanceCounts harrell_counts(const Eigen::VectorXd& risk, const Eigen::VectorXd& durations,
                                 const Eigen::VectorXi& events);

/// Antolini-style concordance from per-subject survival at each subject's
/// own duration: `surv_at(i, j)` is S(T_i | x_j). A comparable pair
/// (E_i = 1, T_i < T_j) is concordant when S(T_i | x_i) < S(T_i | x_j).
template <typename SurvAt>
double antolini_cindex(const Eigen::VectorXd& durations, const Eigen::VectorXi& events,
                       SurvAt&& surv_at) {
  const Index n = durations.size();
  std::int64_t comparable = 0;
  std::int64_t twice_credit = 0;
  for (Index i = 0; i < n; ++i) {
    if (events(i) != 1) continue;
    const double own = surv_at(i, i);
    for (Index j = 0; j < n; ++j) {
      if (!(durations(i) < durations(j))) continue;
      ++comparable;
      const double other = surv_at(i, j);
      if (own < other) {
        twice_credit += 2;
      } else if (own == other) {
        twice_credit += 1;
      }
    }
  }
  if (comparable == 0) throw EstimatorError("concordance undefined: no comparable pairs");
  return static_cast<double>(twice_credit) / (2.0 * static_cast<double>(comparable));
}

/// Time-dependent concordance of a model on raw-unit rows using the
/// supplied baseline (normally fitted on the training rows).
double timedep_cindex(const AdditiveRiskModel& model, const BaselineHazard& baseline,
                      const SurvivalDataset& data);

/// Harrell for proportional kinds, time-dependent for time-varying kinds.
double model_cindex(const AdditiveRiskModel& model, const BaselineHazard& baseline,
                    const SurvivalDataset& data);

}  // namespace addhaz
