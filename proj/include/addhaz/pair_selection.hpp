#pragma once

#include <Eigen/Core>

#include <cmath>
#include <string>
#include <vector>

#include "addhaz/baseline.hpp"
#include "addhaz/data.hpp"
#include "addhaz/errors.hpp"
#include "addhaz/model.hpp"

namespace addhaz {

/// m_i = E_i - H0(T_i) exp(h_i). Durations past the last baseline time use
/// the final cumulative value.
template <typename DH, typename DT, typename DE>
Eigen::VectorXd martingale_residuals(const Eigen::MatrixBase<DH>& h,
                                     const Eigen::MatrixBase<DT>& durations,
                                     const Eigen::MatrixBase<DE>& events,
                                     const BaselineHazard& baseline) {
  const Index n = h.size();
  if (durations.size() != n || events.size() != n) {
    throw ShapeError("martingale_residuals: risk, duration and event lengths differ");
  }
  Eigen::VectorXd m(n);
  for (Index i = 0; i < n; ++i) {
    m(i) = static_cast<double>(events(i)) -
           baseline.cumulative_at(static_cast<double>(durations(i))) * std::exp(static_cast<double>(h(i)));
  }
  return m;
}

/// Residuals of a fitted proportional model on raw-unit rows.
Eigen::VectorXd martingale_residuals(const AdditiveRiskModel& model, const BaselineHazard& baseline,
                                     const SurvivalDataset& data);

struct PairScore {
  FeaturePair pair;
  /// Residual sum of squares removed by the best 2x2 cut interaction
  /// beyond the additive fit on the same cuts.
  double strength = 0.0;
  /// Rows with x_i < cut_i fall on the low side of the first cut.
  double cut_i = 0.0;
  double cut_j = 0.0;
};

struct PairRanking {
  std::vector<PairScore> scores;  // by descending strength
  std::vector<std::string> warnings;
};

std::vector<FeaturePair> all_pairs(int n_features);

/// Equal-frequency bin edges of a column: at most bins - 1 strictly
/// increasing values; a row with value v lies in bin #edges <= v.
std::vector<double> bin_edges(const Eigen::VectorXd& column, int bins);

/// Scores `candidates` (all pairs when empty) by the strongest single-cut
/// interaction of the residuals over `bins` equal-frequency bins per
/// feature. Pairs with a constant feature are skipped with a warning.
PairRanking fast_rank_pairs(const Eigen::VectorXd& residuals, const SurvivalDataset& data,
                            int bins = 32, std::vector<FeaturePair> candidates = {});

/// First `max_pairs` ranked pairs with positive strength.
std::vector<FeaturePair> top_pairs(const PairRanking& ranking, int max_pairs);

/// Resolves "a:b,c:d" (feature names or indices) to pairs with i < j.
std::vector<FeaturePair> parse_pairs(const std::string& text, const std::vector<std::string>& names);

}  // namespace addhaz
