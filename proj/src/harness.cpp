#include "addhaz/harness.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "addhaz/errors.hpp"
#include "addhaz/loss.hpp"
#include "addhaz/metrics.hpp"

namespace addhaz {

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::zero_epochs: return "zero_epochs";
    case StopReason::max_epochs: return "max_epochs";
    case StopReason::early_stopping: return "early_stopping";
    case StopReason::solver_converged: return "solver_converged";
    case StopReason::solver_iterations: return "solver_iterations";
  }
  return "max_epochs";
}

namespace {

// Rows in descending-duration order with tie groups [start, end).
struct TieGroups {
  std::vector<Index> order;
  std::vector<std::size_t> start;
};

TieGroups tie_groups(const Eigen::VectorXd& durations) {
  TieGroups g;
  g.order.resize(static_cast<std::size_t>(durations.size()));
  std::iota(g.order.begin(), g.order.end(), Index{0});
  std::stable_sort(g.order.begin(), g.order.end(),
                   [&](Index a, Index b) { return durations(a) > durations(b); });
  for (std::size_t p = 0; p < g.order.size(); ++p) {
    if (p == 0 || durations(g.order[p]) != durations(g.order[p - 1])) g.start.push_back(p);
  }
  g.start.push_back(g.order.size());
  return g;
}

struct CoxDerivatives {
  double log_likelihood = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

CoxDerivatives cox_derivatives(const Eigen::MatrixXd& z, const Eigen::VectorXd& h,
                               const Eigen::VectorXi& events, const TieGroups& g, bool second_order) {
  const Index k = z.cols();
  CoxDerivatives d;
  d.gradient = Eigen::VectorXd::Zero(k);
  d.hessian = Eigen::MatrixXd::Zero(k, k);
  const double shift = h.size() > 0 ? h.maxCoeff() : 0.0;
  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(k);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(k, k);
  for (std::size_t gi = 0; gi + 1 < g.start.size(); ++gi) {
    double dk = 0.0;
    Eigen::VectorXd zsum = Eigen::VectorXd::Zero(k);
    double hsum = 0.0;
    for (std::size_t p = g.start[gi]; p < g.start[gi + 1]; ++p) {
      const Index r = g.order[p];
      const double w = std::exp(h(r) - shift);
      s0 += w;
      if (second_order) {
        s1 += w * z.row(r).transpose();
        s2.noalias() += w * z.row(r).transpose() * z.row(r);
      }
      if (events(r) == 1) {
        dk += 1.0;
        hsum += h(r);
        if (second_order) zsum += z.row(r).transpose();
      }
    }
    if (dk == 0.0) continue;
    d.log_likelihood += hsum - dk * (shift + std::log(s0));
    if (second_order) {
      const Eigen::VectorXd mean = s1 / s0;
      d.gradient += zsum - dk * mean;
      d.hessian -= dk * (s2 / s0 - mean * mean.transpose());
    }
  }
  return d;
}

}  // namespace

double cox_log_likelihood(const Eigen::VectorXd& h, const Eigen::VectorXd& durations,
                          const Eigen::VectorXi& events) {
  const TieGroups g = tie_groups(durations);
  return cox_derivatives(Eigen::MatrixXd(h.size(), 0), h, events, g, false).log_likelihood;
}

NewtonResult fit_linear_cox(const Eigen::MatrixXd& z, const Eigen::VectorXd& durations,
                            const Eigen::VectorXi& events, int max_iterations) {
  if (z.rows() != durations.size() || z.rows() != events.size()) {
    throw ShapeError("fit_linear_cox: covariate and target lengths differ");
  }
  if (events.sum() == 0) throw TrainingError("fit_linear_cox: no events");
  const TieGroups g = tie_groups(durations);
  NewtonResult res;
  res.beta = Eigen::VectorXd::Zero(z.cols());
  CoxDerivatives cur = cox_derivatives(z, z * res.beta, events, g, true);
  for (int it = 1; it <= max_iterations; ++it) {
    res.iterations = it;
    const Eigen::MatrixXd info = -cur.hessian;
    Eigen::VectorXd step = info.ldlt().solve(cur.gradient);
    if (!step.allFinite()) step = info.completeOrthogonalDecomposition().solve(cur.gradient);
    double scale = 1.0;
    CoxDerivatives next;
    Eigen::VectorXd beta;
    // Halve the step until the likelihood does not decrease.
    for (int half = 0; half < 30; ++half) {
      beta = res.beta + scale * step;
      next = cox_derivatives(z, z * beta, events, g, true);
      if (std::isfinite(next.log_likelihood) && next.log_likelihood >= cur.log_likelihood - 1e-12) break;
      scale *= 0.5;
    }
    const double gain = next.log_likelihood - cur.log_likelihood;
    res.beta = beta;
    cur = std::move(next);
    if (std::abs(gain) < 1e-10 * (std::abs(cur.log_likelihood) + 1.0) ||
        (scale * step).lpNorm<Eigen::Infinity>() < 1e-10) {
      res.converged = true;
      break;
    }
  }
  res.log_likelihood = cur.log_likelihood;
  return res;
}

namespace {

void finish_model(AdditiveRiskModel& model, const SurvivalDataset& train) {
  model.fit_centering(train);
  model.baseline = breslow_baseline(model, train);
}

std::optional<double> validation_cindex(const AdditiveRiskModel& model, const SurvivalDataset& validation) {
  if (validation.rows() < 2 || validation.event_count() == 0) return std::nullopt;
  try {
    return model_cindex(model, *model.baseline, validation);
  } catch (const EstimatorError&) {
    return std::nullopt;
  }
}

}  // namespace

namespace {

// Tape buffers of tens of MB are allocated and freed every batch; with the
// default glibc thresholds each one is a fresh mmap and a round of page faults.
void keep_heap_mapped() {
#ifdef __GLIBC__
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
  });
#endif
}

}  // namespace

TrainResult train(const ModelConfig& config, const SurvivalDataset& train_set,
                  const SurvivalDataset& validation, Rng& rng) {
  keep_heap_mapped();
  const auto started = std::chrono::steady_clock::now();
  config.validate();
  train_set.validate();
  TrainResult result{build_model(config, train_set, rng), {}};
  AdditiveRiskModel& model = result.model;
  TrainReport& report = result.report;
  const Eigen::MatrixXd z = model.standardizer.transform(train_set.features);
  const Eigen::VectorXd tz = model.standardizer.transform_time(train_set.durations);

  if (config.kind == ModelKind::linear) {
    const NewtonResult fit = fit_linear_cox(z, train_set.durations, train_set.events);
    if (!fit.beta.allFinite()) throw TrainingError("linear Cox solver diverged");
    for (int k = 0; k < model.n_nets(); ++k) {
      const DenseLayer& layer = model.nets[k].layers().front();
      model.parameters.value(layer.weight)(0, 0) = fit.beta(k);
      model.parameters.value(layer.bias)(0, 0) = 0.0;
    }
    report.epochs_run = fit.iterations;
    report.best_epoch = fit.iterations;
    report.stop = fit.converged ? StopReason::solver_converged : StopReason::solver_iterations;
    report.train_loss.push_back(-fit.log_likelihood / static_cast<double>(train_set.event_count()));
    finish_model(model, train_set);
    report.validation_cindex = validation_cindex(model, validation);
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
  }

  const bool use_validation = validation.rows() > 0 && validation.event_count() > 0;
  AdamState adam(model.parameters, AdamSettings{config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});
  std::vector<Eigen::MatrixXd> best = model.parameters.values();
  double best_loss = std::numeric_limits<double>::infinity();
  if (use_validation) {
    if (const auto v = evaluate_total_loss(model, validation)) best_loss = v->total;
  }
  int since_best = 0;
  const Index n = train_set.rows();
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  report.stop = config.max_epochs == 0 ? StopReason::zero_epochs : StopReason::max_epochs;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(perm.begin(), perm.end(), rng);
    double loss_sum = 0.0;
    int batches = 0;
    for (Index start = 0; start < n; start += config.batch_size) {
      const Index len = std::min<Index>(config.batch_size, n - start);
      Eigen::MatrixXd zb(len, z.cols());
      Eigen::VectorXd tb(len), db(len);
      Eigen::VectorXi eb(len);
      for (Index r = 0; r < len; ++r) {
        const Index src = perm[static_cast<std::size_t>(start + r)];
        zb.row(r) = z.row(src);
        tb(r) = tz(src);
        db(r) = train_set.durations(src);
        eb(r) = train_set.events(src);
      }
      ad::Tape tape;
      std::optional<RecordedLoss> rec;
      try {
        rec = record_total_loss(tape, model, zb, tb, db, eb, Mode::train, &rng);
      } catch (const TrainingError& e) {
        throw TrainingError("diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      if (!rec) continue;
      if (!std::isfinite(rec->value.total)) {
        throw TrainingError("diverged at epoch " + std::to_string(epoch) + ": non-finite loss");
      }
      const ad::Gradients grads = tape.backward(rec->total, model.parameters);
      try {
        adam_step(adam, model.parameters, grads);
      } catch (const TrainingError& e) {
        throw TrainingError("diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      loss_sum += rec->value.total;
      ++batches;
    }
    report.epochs_run = epoch;
    const double train_loss = batches > 0 ? loss_sum / batches : std::numeric_limits<double>::quiet_NaN();
    report.train_loss.push_back(train_loss);
    double monitor = train_loss;
    if (use_validation) {
      const auto v = evaluate_total_loss(model, validation);
      monitor = v ? v->total : std::numeric_limits<double>::quiet_NaN();
      report.validation_loss.push_back(monitor);
    }
    if (!std::isfinite(monitor)) {
      throw TrainingError("diverged at epoch " + std::to_string(epoch) + ": non-finite loss");
    }
    if (monitor < best_loss) {
      best_loss = monitor;
      best = model.parameters.values();
      report.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      report.stop = StopReason::early_stopping;
      break;
    }
  }
  model.parameters.restore(best);
  finish_model(model, train_set);
  report.validation_cindex = validation_cindex(model, validation);
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

PairRanking select_pairs(const ModelConfig& base, const SurvivalDataset& train_set,
                         const SurvivalDataset& validation, Rng& rng, int bins,
                         std::vector<FeaturePair> candidates) {
  ModelConfig first = base;
  first.kind = ModelKind::nam;
  first.pairs.clear();
  if (first.hidden_sizes.empty()) first.hidden_sizes = {64};
  const TrainResult fit = train(first, train_set, validation, rng);
  const Eigen::VectorXd residuals = martingale_residuals(fit.model, *fit.model.baseline, train_set);
  return fast_rank_pairs(residuals, train_set, bins, std::move(candidates));
}

std::pair<double, double> mean_and_std(const std::vector<double>& v) {
  if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  return {mean, std::sqrt(var)};
}

std::vector<double> CVSummary::values() const {
  std::vector<double> v;
  for (const FoldResult& f : folds) v.push_back(f.cindex);
  return v;
}

namespace {

// Stream ids keep the per-fold random sources independent of each other.
constexpr std::uint64_t kFoldTrainStream = 0x100;
constexpr std::uint64_t kFoldHoldoutStream = 0x200;
constexpr std::uint64_t kFoldPairStream = 0x300;

FoldResult run_fold(const ModelConfig& config, const SurvivalDataset& data, const FoldPlan& plan,
                    const CVOptions& options, int fold) {
  const std::vector<Index> train_rows = plan.train_rows(fold);
  const std::vector<Index> test_rows = plan.test_rows(fold);
  const auto [fit_rows, val_rows] = stratified_holdout(
      data, train_rows, config.validation_fraction, derive_seed(config.seed, kFoldHoldoutStream + fold));
  const SurvivalDataset fit = data.subset(fit_rows);
  const SurvivalDataset val = data.subset(val_rows);
  const SurvivalDataset test = data.subset(test_rows);

  FoldResult r;
  r.fold = fold;
  r.train_rows = train_rows.size();
  r.test_rows = test_rows.size();
  ModelConfig c = config;
  if (options.auto_pairs && has_pairs(c.kind)) {
    Rng pair_rng = seeded_rng(config.seed, kFoldPairStream + fold);
    const PairRanking ranking = select_pairs(c, fit, val, pair_rng, 32, options.candidates);
    c.pairs = top_pairs(ranking, options.max_pairs);
  }
  r.pairs = c.pairs;
  Rng rng = seeded_rng(config.seed, kFoldTrainStream + fold);
  TrainResult trained = train(c, fit, val, rng);
  const AdditiveRiskModel& model = trained.model;
  r.timedep = timedep_cindex(model, *model.baseline, test);
  if (!is_time_varying(model.kind())) {
    r.harrell = harrell_cindex(model.predict_risk(test.features), test.durations, test.events);
    r.cindex = *r.harrell;
  } else {
    r.cindex = r.timedep;
  }
  r.report = std::move(trained.report);
  return r;
}

int thread_budget(int requested) {
  int n = std::max(1, requested);
  if (const char* env = std::getenv("ADDHAZ_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return n;
}

}  // namespace

CVSummary cross_validate(const ModelConfig& config, const SurvivalDataset& data,
                         const CVOptions& options) {
  return cross_validate(config, data, stratified_kfold(data, options.k, config.seed), options);
}

CVSummary cross_validate(const ModelConfig& config, const SurvivalDataset& data, const FoldPlan& plan,
                         const CVOptions& options) {
  data.validate();
  if (!options.auto_pairs || !has_pairs(config.kind)) config.validate();
  CVSummary s;
  s.config = config;
  s.k = plan.k;
  s.folds.resize(static_cast<std::size_t>(plan.k));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(plan.k));

  auto work = [&](int fold) {
    try {
      s.folds[fold] = run_fold(config, data, plan, options, fold);
    } catch (...) {
      errors[fold] = std::current_exception();
    }
  };
  const int threads = std::min(thread_budget(options.threads), plan.k);
  if (threads <= 1) {
    for (int f = 0; f < plan.k; ++f) work(f);
  } else {
    std::mutex next_mutex;
    int next = 0;
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (;;) {
          int f;
          {
            std::lock_guard<std::mutex> lock(next_mutex);
            if (next >= plan.k) return;
            f = next++;
          }
          work(f);
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }
  for (int f = 0; f < plan.k; ++f) {
    if (!errors[f]) continue;
    try {
      std::rethrow_exception(errors[f]);
    } catch (const TrainingError& e) {
      throw TrainingError("fold " + std::to_string(f) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("fold " + std::to_string(f) + ": " + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError("fold " + std::to_string(f) + ": " + e.what());
    } catch (const EstimatorError& e) {
      throw EstimatorError("fold " + std::to_string(f) + ": " + e.what());
    }
  }
  std::tie(s.mean, s.std) = mean_and_std(s.values());
  return s;
}

namespace {

double log_uniform(double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  std::uniform_int_distribution<std::size_t> u(0, v.size() - 1);
  return v[u(rng)];
}

bool within(double v, double lo, double hi) {
  constexpr double slack = 1e-12;
  return v >= lo * (1.0 - slack) && v <= hi * (1.0 + slack);
}

}  // namespace

ModelConfig SearchSpace::sample(const ModelConfig& base, Rng& rng) const {
  ModelConfig c = base;
  if (c.kind != ModelKind::linear) c.hidden_sizes = pick(hidden_sizes, rng);
  c.activation = pick(activations, rng);
  c.dropout = pick(dropout, rng);
  c.feature_dropout = pick(feature_dropout, rng);
  c.weight_decay = log_uniform(weight_decay_lo, weight_decay_hi, rng);
  c.output_regularization = log_uniform(output_reg_lo, output_reg_hi, rng);
  c.learning_rate = log_uniform(learning_rate_lo, learning_rate_hi, rng);
  return c;
}

bool SearchSpace::contains(const ModelConfig& c) const {
  auto in = [](const auto& v, const auto& x) { return std::find(v.begin(), v.end(), x) != v.end(); };
  return in(hidden_sizes, c.hidden_sizes) && in(activations, c.activation) && in(dropout, c.dropout) &&
         in(feature_dropout, c.feature_dropout) &&
         within(c.weight_decay, weight_decay_lo, weight_decay_hi) &&
         within(c.output_regularization, output_reg_lo, output_reg_hi) &&
         within(c.learning_rate, learning_rate_lo, learning_rate_hi);
}

SearchResult random_search(const SearchSpace& space, const SurvivalDataset& data,
                           const ModelConfig& base, int budget, std::uint64_t seed,
                           const CVOptions& options) {
  if (budget < 1) throw ConfigError("search budget must be at least 1");
  SearchResult result;
  Rng rng = seeded_rng(seed, 0x5ea7c4);
  for (int t = 0; t < budget; ++t) {
    SearchTrial trial;
    trial.index = t;
    trial.seed = derive_seed(seed, static_cast<std::uint64_t>(t));
    trial.config = space.sample(base, rng);
    trial.config.seed = trial.seed;
    const CVSummary s = cross_validate(trial.config, data, options);
    trial.mean = s.mean;
    trial.std = s.std;
    if (t == 0 || trial.mean > result.best_mean) {
      result.best = trial.config;
      result.best_mean = trial.mean;
    }
    result.trials.push_back(std::move(trial));
  }
  return result;
}

namespace {

struct Preset {
  const char* name;
  double dropout;
  double feature_dropout;
  double weight_decay;
  double output_regularization;
  Activation activation;
  std::vector<int> hidden;
  double learning_rate;
};

const std::vector<Preset>& presets() {
  static const std::vector<Preset> table{
      {"whas", 0.0, 0.0, 1e-6, 0.001, Activation::relu, {512}, 0.001},
      {"support", 0.0, 0.3, 3.82e-6, 0.0466, Activation::relu, {16}, 0.001},
      {"metabric", 0.05, 0.0, 1e-6, 0.001, Activation::relu, {64, 32}, 0.001},
      {"gbsg", 0.0, 0.0, 1e-4, 0.001, Activation::relu, {128}, 0.001},
  };
  return table;
}

}  // namespace

ModelConfig apply_preset(ModelConfig base, std::string_view name) {
  for (const Preset& p : presets()) {
    if (name != p.name) continue;
    base.dropout = p.dropout;
    base.feature_dropout = p.feature_dropout;
    base.weight_decay = p.weight_decay;
    base.output_regularization = p.output_regularization;
    base.activation = p.activation;
    base.hidden_sizes = base.kind == ModelKind::linear ? std::vector<int>{} : p.hidden;
    base.learning_rate = p.learning_rate;
    base.batch_size = 256;
    return base;
  }
  std::string known;
  for (const std::string& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("unknown preset '" + std::string(name) + "' (known: " + known + ")");
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const Preset& p : presets()) names.emplace_back(p.name);
  return names;
}

}  // namespace addhaz
