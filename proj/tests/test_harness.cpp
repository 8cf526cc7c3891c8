#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "addhaz/errors.hpp"
#include "addhaz/harness.hpp"
#include "addhaz/loss.hpp"
#include "addhaz/metrics.hpp"
#include "support.hpp"

using namespace addhaz;

namespace {

SurvivalDataset strong_linear(Index rows, std::uint64_t seed) {
  Rng rng(seed);
  testing::SyntheticSpec spec;
  spec.rows = rows;
  spec.features = 3;
  spec.beta = {2.0};
  spec.censor_rate = 0.2;
  return testing::synthetic_survival(spec, rng);
}

ModelConfig fast_config(ModelKind kind, int features) {
  ModelConfig c = testing::small_config(kind, features);
  c.hidden_sizes = kind == ModelKind::linear ? std::vector<int>{} : std::vector<int>{16};
  c.learning_rate = 0.01;
  c.batch_size = 64;
  c.max_epochs = 60;
  c.patience = 5;
  return c;
}

}  // namespace

TEST_CASE("zero epochs returns the initial model") {
  const SurvivalDataset d = strong_linear(100, 1);
  ModelConfig c = fast_config(ModelKind::nam, 3);
  c.max_epochs = 0;
  Rng a(5), b(5);
  const TrainResult r = train(c, d, d.subset(std::vector<Index>{}), a);
  CHECK(r.report.epochs_run == 0);
  CHECK(r.report.stop == StopReason::zero_epochs);
  CHECK(r.model.parameters == build_model(c, d, b).parameters);
  CHECK(r.model.baseline.has_value());
}

TEST_CASE("NAM learns a strong monotone risk") {
  const SurvivalDataset train_set = strong_linear(200, 2);
  const SurvivalDataset val = strong_linear(200, 3);
  Rng rng(4);
  const TrainResult r = train(fast_config(ModelKind::nam, 3), train_set, val, rng);
  REQUIRE(r.report.validation_cindex.has_value());
  CHECK(*r.report.validation_cindex >= 0.75);
}

TEST_CASE("training is deterministic") {
  const SurvivalDataset train_set = strong_linear(150, 5);
  const SurvivalDataset val = strong_linear(60, 6);
  for (ModelKind kind : {ModelKind::nam, ModelKind::timenam}) {
    Rng a(7), b(7);
    const TrainResult x = train(fast_config(kind, 3), train_set, val, a);
    const TrainResult y = train(fast_config(kind, 3), train_set, val, b);
    CHECK(x.report.train_loss == y.report.train_loss);
    CHECK(x.report.validation_loss == y.report.validation_loss);
    CHECK(x.model.parameters == y.model.parameters);
  }
}

TEST_CASE("early stopping restores the best epoch") {
  const SurvivalDataset train_set = strong_linear(150, 8);
  const SurvivalDataset val = strong_linear(60, 9);
  ModelConfig c = fast_config(ModelKind::nam, 3);
  c.learning_rate = 0.05;
  c.hidden_sizes = {64};
  c.max_epochs = 200;
  Rng rng(10);
  const TrainResult r = train(c, train_set, val, rng);
  const std::vector<double>& v = r.report.validation_loss;
  REQUIRE(r.report.best_epoch >= 1);
  CHECK(r.report.best_epoch <= r.report.epochs_run);
  const double at_best = v[static_cast<std::size_t>(r.report.best_epoch - 1)];
  CHECK(at_best == *std::min_element(v.begin(), v.end()));
  CHECK(evaluate_total_loss(r.model, val)->total == at_best);
  if (r.report.stop == StopReason::early_stopping) {
    CHECK(r.report.epochs_run - r.report.best_epoch == c.patience);
  }
}

TEST_CASE("linear Cox solver") {
  const SurvivalDataset d = strong_linear(300, 11);
  Rng rng(12);
  const TrainResult r = train(fast_config(ModelKind::linear, 3), d, d.subset(std::vector<Index>{}), rng);
  CHECK(r.report.stop == StopReason::solver_converged);
  const Eigen::MatrixXd z = r.model.standardizer.transform(d.features);
  const NewtonResult fit = fit_linear_cox(z, d.durations, d.events);
  // The score vanishes at the optimum: small moves lower the likelihood.
  for (Index k = 0; k < fit.beta.size(); ++k) {
    for (double step : {-1e-4, 1e-4}) {
      Eigen::VectorXd b = fit.beta;
      b(k) += step;
      CHECK(cox_log_likelihood(z * b, d.durations, d.events) < fit.log_likelihood);
    }
  }
  const Eigen::VectorXd one = Eigen::Vector3d(1, 0, 0), origin = Eigen::Vector3d::Zero();
  const double slope = r.model.predict_risk(one) - r.model.predict_risk(origin);
  CHECK(slope == doctest::Approx(2.0).epsilon(0.25));
}

TEST_CASE("divergence names the epoch") {
  const SurvivalDataset d = strong_linear(100, 13);
  ModelConfig c = fast_config(ModelKind::nam, 3);
  c.learning_rate = 1e300;
  Rng rng(14);
  try {
    train(c, d, d, rng);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("feature dropout near one degrades concordance") {
  const SurvivalDataset train_set = strong_linear(200, 15);
  const SurvivalDataset val = strong_linear(200, 16);
  ModelConfig c = fast_config(ModelKind::nam, 3);
  Rng a(17), b(17);
  const double clean = *train(c, train_set, val, a).report.validation_cindex;
  c.feature_dropout = 0.999;
  const double dropped = *train(c, train_set, val, b).report.validation_cindex;
  CHECK(dropped < clean);
  CHECK(std::abs(dropped - 0.5) < std::abs(clean - 0.5));
}

TEST_CASE("cross-validation mechanics") {
  SurvivalDataset tiny = strong_linear(10, 18);
  tiny.events.setOnes();
  CVOptions opts;
  opts.k = 2;
  const CVSummary s = cross_validate(fast_config(ModelKind::linear, 3), tiny, opts);
  CHECK(s.folds.size() == 2);
  CHECK(s.values().size() == 2);
  const auto [mean, std] = mean_and_std(s.values());
  CHECK(s.mean == mean);
  const double a = s.folds[0].cindex, b = s.folds[1].cindex;
  CHECK(std::abs(s.std - std::abs(a - b) / 2.0) <= 1e-12);
}

TEST_CASE("population standard deviation") {
  const auto [m, s] = mean_and_std({1.0, 2.0, 3.0, 4.0});
  CHECK(m == 2.5);
  CHECK(std::abs(s - std::sqrt(1.25)) <= 1e-12);
}

TEST_CASE("row order does not change the cross-validation summary") {
  const SurvivalDataset d = strong_linear(240, 19);
  std::vector<Index> perm(static_cast<std::size_t>(d.rows()));
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng shuffle(20);
  std::shuffle(perm.begin(), perm.end(), shuffle);
  const SurvivalDataset p = d.subset(perm);
  ModelConfig c = fast_config(ModelKind::nam, 3);
  c.max_epochs = 8;
  CVOptions opts;
  opts.k = 3;
  const CVSummary a = cross_validate(c, d, opts);
  const CVSummary b = cross_validate(c, p, opts);
  CHECK(a.values() == b.values());
}

TEST_CASE("threads do not change results") {
  const SurvivalDataset d = strong_linear(200, 21);
  ModelConfig c = fast_config(ModelKind::nam, 3);
  c.max_epochs = 5;
  CVOptions one, many;
  one.k = many.k = 4;
  many.threads = 4;
  CHECK(cross_validate(c, d, one).values() == cross_validate(c, d, many).values());
}

TEST_CASE("per-fold automatic pairs") {
  const SurvivalDataset d = strong_linear(200, 22);
  ModelConfig c = fast_config(ModelKind::na2m, 3);
  c.max_epochs = 3;
  CVOptions opts;
  opts.k = 2;
  opts.auto_pairs = true;
  opts.max_pairs = 2;
  const CVSummary s = cross_validate(c, d, opts);
  for (const FoldResult& f : s.folds) {
    CHECK(!f.pairs.empty());
    CHECK(f.pairs.size() <= 2);
  }
  ModelConfig missing = c;
  CHECK_THROWS_AS(cross_validate(missing, d, CVOptions{2}), ConfigError);
}

TEST_CASE("random search") {
  const SearchSpace space;
  ModelConfig metabric;
  metabric.n_features = 9;
  metabric = apply_preset(metabric, "metabric");
  CHECK(metabric.hidden_sizes == std::vector<int>{64, 32});
  CHECK(metabric.dropout == 0.05);
  CHECK(space.contains(metabric));
  ModelConfig outside = metabric;
  outside.learning_rate = 0.5;
  CHECK_FALSE(space.contains(outside));

  Rng rng(23);
  for (int i = 0; i < 20; ++i) CHECK(space.contains(space.sample(metabric, rng)));

  const SurvivalDataset d = strong_linear(80, 24);
  ModelConfig base = fast_config(ModelKind::nam, 3);
  base.max_epochs = 2;
  CVOptions opts;
  opts.k = 2;
  const SearchResult one = random_search(space, d, base, 1, 25, opts);
  REQUIRE(one.trials.size() == 1);
  CHECK(one.best == one.trials[0].config);
  CHECK(one.best_mean == one.trials[0].mean);
  const SearchResult again = random_search(space, d, base, 1, 25, opts);
  CHECK(again.best_mean == one.best_mean);

  CHECK_THROWS_AS(apply_preset(base, "lung"), ConfigError);
}
