#include "addhaz/loss.hpp"

#include <algorithm>
#include <numeric>

namespace addhaz {

RiskSetBatch RiskSetBatch::build(const Eigen::VectorXd& durations, const Eigen::VectorXi& events) {
  if (durations.size() != events.size()) {
    throw ShapeError("RiskSetBatch: " + std::to_string(durations.size()) + " durations but " +
                     std::to_string(events.size()) + " events");
  }
  RiskSetBatch b;
  b.durations = durations;
  b.events = events;
  const Index n = durations.size();
  b.order.resize(static_cast<std::size_t>(n));
  std::iota(b.order.begin(), b.order.end(), Index{0});
  std::stable_sort(b.order.begin(), b.order.end(),
                   [&](Index x, Index y) { return durations(x) > durations(y); });
  b.risk_end.resize(b.order.size());
  std::size_t p = 0;
  while (p < b.order.size()) {
    std::size_t q = p;
    while (q < b.order.size() && durations(b.order[q]) == durations(b.order[p])) ++q;
    for (std::size_t r = p; r < q; ++r) b.risk_end[r] = static_cast<Index>(q);
    p = q;
  }
  b.event_count = events.sum();
  return b;
}

std::vector<Index> RiskSetBatch::risk_set(Index row) const {
  std::vector<Index> members;
  for (Index r : order) {
    if (durations(r) >= durations(row)) members.push_back(r);
  }
  return members;
}

namespace {

double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

ad::Var coxph(const ad::Var& h, const RiskSetBatch& batch) {
  if (h.cols() != 1 || h.rows() != batch.rows()) {
    throw ShapeError("coxph: risk column must be " + std::to_string(batch.rows()) + "x1");
  }
  if (batch.event_count == 0) throw ContractError("coxph: batch has no events");
  const int ih = h.id();
  auto fwd = [ih, batch](const ad::Tape& t) {
    return ad::Matrix(ad::Matrix::Constant(1, 1, *coxph_loss(t.value(ih).col(0), batch)));
  };
  ad::Matrix value = fwd(h.tape());
  auto bwd = [ih, batch](ad::Tape& t, int self) {
    const Eigen::VectorXd hv = t.value(ih).col(0);
    const double g = t.grad(self)(0, 0) / static_cast<double>(batch.event_count);
    const std::size_t n = batch.order.size();
    // Log-sum-exp of each tie group's risk set, walking durations downward.
    std::vector<std::size_t> group_start;
    std::vector<double> group_lse;
    std::vector<double> group_events;
    detail::StreamingLse<double> lse;
    for (std::size_t p = 0; p < n;) {
      const auto end = static_cast<std::size_t>(batch.risk_end[p]);
      double d = 0.0;
      for (std::size_t q = p; q < end; ++q) {
        lse.add(hv(batch.order[q]));
        d += batch.events(batch.order[q]);
      }
      group_start.push_back(p);
      group_lse.push_back(lse.value());
      group_events.push_back(d);
      p = end;
    }
    // Row j belongs to the risk sets of its own group and every later
    // (shorter-duration) group: accumulate log sum d_g exp(-lse_g) from the end.
    Eigen::MatrixXd& gh = t.grad(ih);
    double acc = -std::numeric_limits<double>::infinity();
    for (std::size_t gi = group_start.size(); gi-- > 0;) {
      if (group_events[gi] > 0) acc = log_add(acc, std::log(group_events[gi]) - group_lse[gi]);
      const std::size_t end = gi + 1 < group_start.size() ? group_start[gi + 1] : n;
      for (std::size_t q = group_start[gi]; q < end; ++q) {
        const Index row = batch.order[q];
        const double share = acc == -std::numeric_limits<double>::infinity()
                                 ? 0.0
                                 : std::exp(hv(row) + acc);
        gh(row, 0) += g * (share - batch.events(row));
      }
    }
  };
  return h.tape().record(std::move(value), {ih}, fwd, bwd);
}

double segment_cox_loss(const Eigen::VectorXd& v, const Segments& segments) {
  if (segments.start.size() != segments.self.size() + 1) {
    throw ShapeError("segment_cox_loss: malformed segments");
  }
  if (segments.count() == 0) throw ContractError("segment_cox_loss: no segments");
  detail::require_finite(v);
  double total = 0.0;
  for (std::size_t s = 0; s < segments.count(); ++s) {
    detail::StreamingLse<double> lse;
    for (Index e = segments.start[s]; e < segments.start[s + 1]; ++e) lse.add(v(e));
    total += lse.value() - v(segments.self[s]);
  }
  return total / static_cast<double>(segments.count());
}

ad::Var segment_cox(const ad::Var& v, const Segments& segments) {
  if (v.cols() != 1) throw ShapeError("segment_cox: expects a column");
  if (!segments.start.empty() && segments.start.back() > v.rows()) {
    throw ShapeError("segment_cox: segments exceed the score vector");
  }
  const int iv = v.id();
  auto fwd = [iv, segments](const ad::Tape& t) {
    return ad::Matrix(ad::Matrix::Constant(1, 1, segment_cox_loss(t.value(iv).col(0), segments)));
  };
  ad::Matrix value = fwd(v.tape());
  auto bwd = [iv, segments](ad::Tape& t, int self) {
    const Eigen::VectorXd vv = t.value(iv).col(0);
    const double g = t.grad(self)(0, 0) / static_cast<double>(segments.count());
    Eigen::MatrixXd& gv = t.grad(iv);
    for (std::size_t s = 0; s < segments.count(); ++s) {
      detail::StreamingLse<double> lse;
      for (Index e = segments.start[s]; e < segments.start[s + 1]; ++e) lse.add(vv(e));
      const double l = lse.value();
      for (Index e = segments.start[s]; e < segments.start[s + 1]; ++e) {
        gv(e, 0) += g * std::exp(vv(e) - l);
      }
      gv(segments.self[s], 0) -= g;
    }
  };
  return v.tape().record(std::move(value), {iv}, fwd, bwd);
}

namespace {

std::vector<double> distinct_event_times(const SurvivalDataset& d) {
  std::vector<double> t;
  for (Index i = 0; i < d.rows(); ++i) {
    if (d.events(i) == 1) t.push_back(d.durations(i));
  }
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

}  // namespace

std::optional<double> coxtime_loss(const AdditiveRiskModel& model, const SurvivalDataset& batch) {
  if (!is_time_varying(model.kind())) {
    throw ContractError("coxtime_loss needs a time-varying model");
  }
  const std::vector<double> times = distinct_event_times(batch);
  if (times.empty()) return std::nullopt;
  const Eigen::MatrixXd table = model.risk_table(
      batch.features, Eigen::Map<const Eigen::VectorXd>(times.data(), static_cast<Index>(times.size())));
  detail::require_finite(table);
  double total = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    detail::StreamingLse<double> lse;
    for (Index j = 0; j < batch.rows(); ++j) {
      if (batch.durations(j) >= times[k]) lse.add(table(j, static_cast<Index>(k)));
    }
    const double l = lse.value();
    for (Index i = 0; i < batch.rows(); ++i) {
      if (batch.events(i) == 1 && batch.durations(i) == times[k]) {
        total += l - table(i, static_cast<Index>(k));
      }
    }
  }
  return total / static_cast<double>(batch.event_count());
}

std::optional<LossValue> evaluate_total_loss(const AdditiveRiskModel& model,
                                             const SurvivalDataset& rows) {
  const Eigen::MatrixXd outputs = model.net_outputs(rows.features, &rows.durations);
  std::optional<double> l;
  if (is_time_varying(model.kind())) {
    l = coxtime_loss(model, rows);
  } else {
    l = coxph_loss(sum_nets(outputs), RiskSetBatch::build(rows.durations, rows.events));
  }
  if (!l) return std::nullopt;
  LossValue v;
  v.loss = *l;
  v.eta = output_regularization(outputs);
  v.total = total_loss(v.loss, v.eta, model.config.output_regularization);
  return v;
}

namespace {

Eigen::MatrixXd feature_dropout_mask(Index rows, double rate, Mode mode, Rng* rng) {
  if (mode == Mode::eval || rate == 0.0 || rng == nullptr) return Eigen::MatrixXd::Ones(rows, 1);
  return dropout_mask(rows, 1, rate, *rng);
}

// Unique values of a column and each row's index into them.
std::vector<int> value_ids(const Eigen::VectorXd& col, std::size_t& unique_count) {
  std::vector<double> values(col.data(), col.data() + col.size());
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  unique_count = values.size();
  std::vector<int> ids(static_cast<std::size_t>(col.size()));
  for (Index j = 0; j < col.size(); ++j) {
    ids[j] = static_cast<int>(std::lower_bound(values.begin(), values.end(), col(j)) - values.begin());
  }
  return ids;
}

struct TimedEntries {
  std::vector<Index> row;   // covariate row of each entry
  std::vector<int> time;    // time id of each entry
  Segments segments;        // over the leading risk-set entries
};

// One entry per (risk-set member, case time) plus a trailing block with
// every row at its own duration, used for the output penalty.
TimedEntries timed_entries(const RiskSetBatch& batch, const std::vector<int>& time_id) {
  TimedEntries e;
  const std::size_t n = batch.order.size();
  for (std::size_t p = 0; p < n; ++p) {
    const Index i = batch.order[p];
    if (batch.events(i) != 1) continue;
    for (Index q = 0; q < batch.risk_end[p]; ++q) {
      const Index j = batch.order[q];
      if (j == i) e.segments.self.push_back(static_cast<Index>(e.row.size()));
      e.row.push_back(j);
      e.time.push_back(time_id[i]);
    }
    e.segments.start.push_back(static_cast<Index>(e.row.size()));
  }
  for (Index j = 0; j < batch.rows(); ++j) {
    e.row.push_back(j);
    e.time.push_back(time_id[j]);
  }
  return e;
}

}  // namespace

std::optional<RecordedLoss> record_total_loss(ad::Tape& tape, const AdditiveRiskModel& model,
                                              const Eigen::MatrixXd& z, const Eigen::VectorXd& tz,
                                              const Eigen::VectorXd& durations,
                                              const Eigen::VectorXi& events, Mode mode, Rng* rng) {
  const Index b = z.rows();
  if (durations.size() != b || events.size() != b) {
    throw ShapeError("record_total_loss: targets do not match the batch rows");
  }
  const RiskSetBatch batch = RiskSetBatch::build(durations, events);
  if (batch.event_count == 0) return std::nullopt;
  const ModelConfig& c = model.config;
  const double dropout_rate = mode == Mode::train ? c.dropout : 0.0;
  Rng* drop_rng = mode == Mode::train ? rng : nullptr;
  const auto m = static_cast<double>(model.n_nets());

  RecordedLoss out;
  ad::Var loss;
  ad::Var eta;
  if (!is_time_varying(model.kind())) {
    ad::Var h;
    for (int k = 0; k < model.n_nets(); ++k) {
      ad::Var o = model.nets[k].forward(tape, model.parameters, model.net_input(k, z, nullptr),
                                        dropout_rate, drop_rng);
      if (mode == Mode::train && c.feature_dropout > 0.0) {
        o = ad::mul_constant(o, feature_dropout_mask(b, c.feature_dropout, mode, rng));
      }
      const ad::Var sq = ad::sum_squares(o);
      h = k == 0 ? o : ad::add(h, o);
      eta = k == 0 ? sq : ad::add(eta, sq);
    }
    loss = coxph(h, batch);
  } else {
    if (tz.size() != b) throw ShapeError("record_total_loss: time-varying model needs tz");
    // Time ids over the batch's distinct durations.
    std::vector<double> times(durations.data(), durations.data() + b);
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    const std::size_t nt = times.size();
    std::vector<int> time_id(static_cast<std::size_t>(b));
    Eigen::VectorXd time_tz(static_cast<Index>(nt));
    for (Index j = 0; j < b; ++j) {
      time_id[j] = static_cast<int>(std::lower_bound(times.begin(), times.end(), durations(j)) - times.begin());
      time_tz(time_id[j]) = tz(j);
    }
    const TimedEntries e = timed_entries(batch, time_id);
    const auto total_entries = static_cast<Index>(e.row.size());
    const Index risk_entries = total_entries - b;
    std::vector<Index> own(static_cast<std::size_t>(b));
    std::iota(own.begin(), own.end(), risk_entries);

    ad::Var h;
    for (int k = 0; k < model.n_nets(); ++k) {
      const NetInfo& info = model.net_info[k];
      const Eigen::MatrixXd fmask = feature_dropout_mask(b, c.feature_dropout, mode, rng);
      ad::Var per_entry;
      if (info.role == NetRole::pair) {
        ad::Var o = model.nets[k].forward(tape, model.parameters, model.net_input(k, z, nullptr),
                                          dropout_rate, drop_rng);
        if (mode == Mode::train && c.feature_dropout > 0.0) o = ad::mul_constant(o, fmask);
        per_entry = ad::gather_rows(o, e.row);
      } else {
        std::size_t nu = 0;
        const std::vector<int> uid = value_ids(z.col(info.a), nu);
        std::vector<int> lookup(nu * nt, -1);
        std::vector<Index> entry_input(e.row.size());
        std::vector<std::pair<int, int>> inputs;
        for (std::size_t q = 0; q < e.row.size(); ++q) {
          const int u = uid[e.row[q]];
          const std::size_t key = static_cast<std::size_t>(u) * nt + static_cast<std::size_t>(e.time[q]);
          if (lookup[key] < 0) {
            lookup[key] = static_cast<int>(inputs.size());
            inputs.emplace_back(static_cast<int>(e.row[q]), e.time[q]);
          }
          entry_input[q] = lookup[key];
        }
        Eigen::MatrixXd in(static_cast<Index>(inputs.size()), 2);
        for (std::size_t r = 0; r < inputs.size(); ++r) {
          in(static_cast<Index>(r), 0) = z(inputs[r].first, info.a);
          in(static_cast<Index>(r), 1) = time_tz(inputs[r].second);
        }
        const ad::Var o = model.nets[k].forward(tape, model.parameters, in, dropout_rate, drop_rng);
        per_entry = ad::gather_rows(o, std::move(entry_input));
        if (mode == Mode::train && c.feature_dropout > 0.0) {
          Eigen::MatrixXd emask(total_entries, 1);
          for (Index q = 0; q < total_entries; ++q) emask(q, 0) = fmask(e.row[q], 0);
          per_entry = ad::mul_constant(per_entry, std::move(emask));
        }
      }
      const ad::Var sq = ad::sum_squares(ad::gather_rows(per_entry, own));
      h = k == 0 ? per_entry : ad::add(h, per_entry);
      eta = k == 0 ? sq : ad::add(eta, sq);
    }
    loss = segment_cox(h, e.segments);
  }
  eta = ad::scale(eta, 1.0 / (static_cast<double>(b) * m));
  out.total = ad::add(loss, ad::scale(eta, c.output_regularization));
  out.value.loss = loss.value()(0, 0);
  out.value.eta = eta.value()(0, 0);
  out.value.total = out.total.value()(0, 0);
  return out;
}

}  // namespace addhaz
