#include "addhaz/metrics.hpp"

#include <cmath>

namespace addhaz {

BaselineHazard breslow_baseline(const AdditiveRiskModel& model, const SurvivalDataset& train) {
  if (!is_time_varying(model.kind())) {
    return breslow_baseline(model.predict_risk(train.features), train.durations, train.events);
  }
  std::vector<double> times;
  for (Index i = 0; i < train.rows(); ++i) {
    if (train.events(i) == 1) times.push_back(train.durations(i));
  }
  if (times.empty()) throw EstimatorError("breslow_baseline: no events");
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  const Eigen::MatrixXd table = model.risk_table(
      train.features, Eigen::Map<const Eigen::VectorXd>(times.data(), static_cast<Index>(times.size())));
  BaselineHazard out;
  out.times = times;
  for (std::size_t k = 0; k < times.size(); ++k) {
    double risk = 0.0;
    double d = 0.0;
    for (Index j = 0; j < train.rows(); ++j) {
      if (train.durations(j) >= times[k]) risk += std::exp(table(j, static_cast<Index>(k)));
      if (train.durations(j) == times[k]) d += train.events(j);
    }
    out.increments.push_back(d / risk);
  }
  out.cumulative.resize(out.increments.size());
  std::partial_sum(out.increments.begin(), out.increments.end(), out.cumulative.begin());
  return out;
}

namespace {

void require_sorted(const std::vector<double>& grid) {
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] >= grid[i - 1])) throw ContractError("survival grid must be sorted ascending");
  }
}

}  // namespace

Eigen::MatrixXd cumulative_hazard(const AdditiveRiskModel& model, const BaselineHazard& baseline,
                                  const Eigen::MatrixXd& x, const std::vector<double>& grid) {
  require_sorted(grid);
  const Index n = x.rows();
  const auto g = static_cast<Index>(grid.size());
  Eigen::MatrixXd out(n, g);
  if (!is_time_varying(model.kind())) {
    const Eigen::VectorXd rel = model.predict_risk(x).array().exp();
    for (Index c = 0; c < g; ++c) out.col(c) = baseline.cumulative_at(grid[c]) * rel;
    return out;
  }
  const auto m = static_cast<Index>(baseline.times.size());
  const Eigen::MatrixXd table = model.risk_table(
      x, Eigen::Map<const Eigen::VectorXd>(baseline.times.data(), m));
  for (Index j = 0; j < n; ++j) {
    double acc = 0.0;
    std::size_t k = 0;
    for (Index c = 0; c < g; ++c) {
      const std::size_t upto = baseline.steps_through(grid[c]);
      for (; k < upto; ++k) acc += baseline.increments[k] * std::exp(table(j, static_cast<Index>(k)));
      out(j, c) = acc;
    }
  }
  return out;
}

SurvivalCurve predict_survival(const AdditiveRiskModel& model, const BaselineHazard& baseline,
                               const Eigen::VectorXd& x, const std::vector<double>& grid) {
  const Eigen::MatrixXd hz = cumulative_hazard(model, baseline, Eigen::MatrixXd(x.transpose()), grid);
  SurvivalCurve curve;
  curve.times = grid;
  curve.survival.resize(grid.size());
  for (std::size_t c = 0; c < grid.size(); ++c) {
    curve.survival[c] = std::clamp(std::exp(-hz(0, static_cast<Index>(c))), 0.0, 1.0);
  }
  return curve;
}

double ConcordanceCounts::value() const {
  if (comparable == 0) throw EstimatorError("concordance undefined: no comparable pairs");
  return (static_cast<double>(concordant) + 0.5 * static_cast<double>(tied)) /
         static_cast<double>(comparable);
}

namespace {

class Fenwick {
 public:
  explicit Fenwick(std::size_t n) : tree_(n + 1, 0) {}
  void add(std::size_t i) {
    for (++i; i < tree_.size(); i += i & (~i + 1)) ++tree_[i];
  }
  /// Count of inserted ranks < i.
  std::int64_t below(std::size_t i) const {
    std::int64_t s = 0;
    for (; i > 0; i -= i & (~i + 1)) s += tree_[i];
    return s;
  }

 private:
  std::vector<std::int64_t> tree_;
};

}  // namespace

ConcordanceCounts harrell_counts(const Eigen::VectorXd& risk, const Eigen::VectorXd& durations,
                                 const Eigen::VectorXi& events) {
  const Index n = risk.size();
  if (durations.size() != n || events.size() != n) {
    throw ShapeError("harrell_cindex: risk, duration and event lengths differ");
  }
  if (!risk.allFinite()) throw EstimatorError("harrell_cindex: non-finite risk score");
  std::vector<double> levels(risk.data(), risk.data() + n);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  std::vector<std::size_t> rank(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    rank[i] = static_cast<std::size_t>(std::lower_bound(levels.begin(), levels.end(), risk(i)) -
                                       levels.begin());
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return durations(a) > durations(b); });

  ConcordanceCounts c;
  Fenwick later(levels.size());
  std::int64_t inserted = 0;
  std::size_t p = 0;
  while (p < order.size()) {
    std::size_t q = p;
    while (q < order.size() && durations(order[q]) == durations(order[p])) ++q;
    for (std::size_t r = p; r < q; ++r) {
      const Index i = order[r];
      if (events(i) != 1) continue;
      const std::int64_t lower = later.below(rank[i]);
      const std::int64_t equal = later.below(rank[i] + 1) - lower;
      c.comparable += inserted;
      c.concordant += lower;
      c.tied += equal;
    }
    for (std::size_t r = p; r < q; ++r) later.add(rank[order[r]]);
    inserted += static_cast<std::int64_t>(q - p);
    p = q;
  }
  return c;
}

double harrell_cindex(const Eigen::VectorXd& risk, const Eigen::VectorXd& durations,
                      const Eigen::VectorXi& events) {
  return harrell_counts(risk, durations, events).value();
}

double timedep_cindex(const AdditiveRiskModel& model, const BaselineHazard& baseline,
                      const SurvivalDataset& data) {
  const Index n = data.rows();
  std::vector<double> grid(data.durations.data(), data.durations.data() + n);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  const Eigen::MatrixXd hz = cumulative_hazard(model, baseline, data.features, grid);
  std::vector<Index> column(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    column[i] = std::lower_bound(grid.begin(), grid.end(), data.durations(i)) - grid.begin();
  }
  return antolini_cindex(data.durations, data.events, [&](Index i, Index j) {
    return std::clamp(std::exp(-hz(j, column[i])), 0.0, 1.0);
  });
}

double model_cindex(const AdditiveRiskModel& model, const BaselineHazard& baseline,
                    const SurvivalDataset& data) {
  if (is_time_varying(model.kind())) return timedep_cindex(model, baseline, data);
  return harrell_cindex(model.predict_risk(data.features), data.durations, data.events);
}

}  // namespace addhaz
