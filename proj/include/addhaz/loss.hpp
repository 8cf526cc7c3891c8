#pragma once

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "addhaz/autodiff.hpp"
#include "addhaz/errors.hpp"
#include "addhaz/model.hpp"
#include "addhaz/nn.hpp"

namespace addhaz {

/// Within-batch risk sets with the Breslow tie convention: the risk set of
/// event row i is every row j with T_j >= T_i.
struct RiskSetBatch {
  Eigen::VectorXd durations;
  Eigen::VectorXi events;
  /// Rows by descending duration, ties in row order.
  std::vector<Index> order;
  /// `risk_end[p]`: number of leading entries of `order` with duration
  /// >= the duration at position p.
  std::vector<Index> risk_end;
  Index event_count = 0;

  static RiskSetBatch build(const Eigen::VectorXd& durations, const Eigen::VectorXi& events);

  Index rows() const { return durations.size(); }
  /// Rows in the risk set of `row`, in `order` order.
  std::vector<Index> risk_set(Index row) const;
};

namespace detail {

/// Running log-sum-exp with max shift.
template <typename Scalar>
struct StreamingLse {
  Scalar max = -std::numeric_limits<Scalar>::infinity();
  Scalar sum = 0;

  void add(Scalar v) {
    if (v > max) {
      sum = sum * std::exp(max - v) + Scalar(1);
      max = v;
    } else {
      sum += std::exp(v - max);
    }
  }
  Scalar value() const { return max + std::log(sum); }
};

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& h) {
  if (!h.allFinite()) throw TrainingError("non-finite risk value in loss input");
}

}  // namespace detail

/// Mean over events of log sum_{j in R_i} exp(h_j - h_i). Empty when the
/// batch has no events (the caller skips it). Throws TrainingError on
/// non-finite h.
template <typename Derived>
std::optional<typename Derived::Scalar> coxph_loss(const Eigen::MatrixBase<Derived>& h,
                                                   const RiskSetBatch& batch) {
  using Scalar = typename Derived::Scalar;
  if (h.size() != batch.rows()) {
    throw ShapeError("coxph_loss: " + std::to_string(h.size()) + " risk values for " +
                     std::to_string(batch.rows()) + " rows");
  }
  if (batch.event_count == 0) return std::nullopt;
  detail::require_finite(h);
  detail::StreamingLse<Scalar> lse;
  Scalar total = 0;
  const std::size_t n = batch.order.size();
  std::size_t p = 0;
  while (p < n) {
    const auto end = static_cast<std::size_t>(batch.risk_end[p]);
    for (std::size_t q = p; q < end; ++q) lse.add(h(batch.order[q]));
    const Scalar log_risk = lse.value();
    for (std::size_t q = p; q < end; ++q) {
      const Index row = batch.order[q];
      if (batch.events(row) == 1) total += log_risk - h(row);
    }
    p = end;
  }
  return total / static_cast<Scalar>(batch.event_count);
}

/// Recorded CoxPH loss of a (B x 1) risk column. Precondition: the batch
/// has at least one event.
ad::Var coxph(const ad::Var& h, const RiskSetBatch& batch);

/// Groups of entries of a flat score vector: segment s spans
/// [start[s], start[s+1]) and `self[s]` is the case's own entry.
struct Segments {
  std::vector<Index> start{0};
  std::vector<Index> self;

  std::size_t count() const { return self.size(); }
};

/// Mean over segments of logsumexp(v[segment]) - v[self].
double segment_cox_loss(const Eigen::VectorXd& v, const Segments& segments);
ad::Var segment_cox(const ad::Var& v, const Segments& segments);

/// Cox-Time loss on raw-unit rows: every risk-set member is evaluated at
/// the case's event time. Empty when there are no events.
std::optional<double> coxtime_loss(const AdditiveRiskModel& model, const SurvivalDataset& batch);

/// Mean over rows of (1/M) sum of squared per-net outputs (n x M).
template <typename Derived>
typename Derived::Scalar output_regularization(const Eigen::MatrixBase<Derived>& outputs) {
  using Scalar = typename Derived::Scalar;
  if (outputs.size() == 0) return Scalar(0);
  return outputs.squaredNorm() / static_cast<Scalar>(outputs.rows() * outputs.cols());
}

inline double total_loss(double l, double eta, double lambda1) { return l + lambda1 * eta; }

struct LossValue {
  double loss = 0.0;
  double eta = 0.0;
  double total = 0.0;
};

/// Eval-mode total loss of a model on raw-unit rows.
std::optional<LossValue> evaluate_total_loss(const AdditiveRiskModel& model,
                                             const SurvivalDataset& rows);

struct RecordedLoss {
  ad::Var total;
  LossValue value;
};

/// Records the total loss of one batch on `tape`. `z` holds standardized
/// covariates, `tz` standardized durations (time-varying kinds), and
/// `durations`/`events` the raw targets. In train mode hidden dropout and
/// feature dropout draw from `rng`. Empty when the batch has no events.
std::optional<RecordedLoss> record_total_loss(ad::Tape& tape, const AdditiveRiskModel& model,
                                              const Eigen::MatrixXd& z, const Eigen::VectorXd& tz,
                                              const Eigen::VectorXd& durations,
                                              const Eigen::VectorXi& events, Mode mode, Rng* rng);

}  // namespace addhaz
