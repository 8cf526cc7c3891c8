#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "addhaz/data.hpp"
#include "addhaz/model.hpp"
#include "addhaz/pair_selection.hpp"
#include "addhaz/random.hpp"

namespace addhaz {

enum class StopReason { zero_epochs, max_epochs, early_stopping, solver_converged, solver_iterations };

std::string to_string(StopReason r);

struct TrainReport {
  std::vector<double> train_loss;       // mean batch total loss per epoch
  std::vector<double> validation_loss;  // eval-mode total loss per epoch
  int epochs_run = 0;
  int best_epoch = 0;  // 0 = initial parameters
  StopReason stop = StopReason::zero_epochs;
  double seconds = 0.0;
  std::optional<double> validation_cindex;
};

struct TrainResult {
  AdditiveRiskModel model;
  TrainReport report;
};

/// Trains on raw-unit rows. The model's standardizer, baseline hazard and
/// centering constants are fitted on `train`; `validation` drives early
/// stopping (when it has events; otherwise the training loss does).
/// LinearCox is fitted by Newton-Raphson on the partial likelihood.
/// Throws TrainingError naming the epoch when the loss diverges.
TrainResult train(const ModelConfig& config, const SurvivalDataset& train,
                  const SurvivalDataset& validation, Rng& rng);

struct NewtonResult {
  Eigen::VectorXd beta;
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Breslow partial-likelihood maximiser for h = z * beta.
NewtonResult fit_linear_cox(const Eigen::MatrixXd& z, const Eigen::VectorXd& durations,
                            const Eigen::VectorXi& events, int max_iterations = 50);

/// Log partial likelihood (Breslow ties) of linear scores.
double cox_log_likelihood(const Eigen::VectorXd& h, const Eigen::VectorXd& durations,
                          const Eigen::VectorXi& events);

/// Fits a first-stage NAM (`base` with kind nam and no pairs), takes its
/// martingale residuals on `train` and ranks candidate pairs.
PairRanking select_pairs(const ModelConfig& base, const SurvivalDataset& train,
                         const SurvivalDataset& validation, Rng& rng, int bins = 32,
                         std::vector<FeaturePair> candidates = {});

struct FoldResult {
  int fold = 0;
  double cindex = 0.0;  // Harrell (proportional) or time-dependent
  std::optional<double> harrell;
  double timedep = 0.0;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  std::vector<FeaturePair> pairs;
  TrainReport report;
};

struct CVSummary {
  ModelConfig config;
  int k = 0;
  std::vector<FoldResult> folds;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation

  std::vector<double> values() const;
};

struct CVOptions {
  int k = 5;
  /// Select pairs per fold from a first-stage NAM (pair kinds only).
  bool auto_pairs = false;
  int max_pairs = 5;
  std::vector<FeaturePair> candidates;
  /// Worker threads for folds, further capped by ADDHAZ_THREADS.
  int threads = 1;
};

/// Stratified k-fold CV with folds from stratified_kfold(data, k,
/// config.seed). Per fold: split off the early-stopping slice, train, and
/// score the held-out fold. Errors are rethrown naming the fold.
CVSummary cross_validate(const ModelConfig& config, const SurvivalDataset& data,
                         const CVOptions& options = {});
CVSummary cross_validate(const ModelConfig& config, const SurvivalDataset& data, const FoldPlan& plan,
                         const CVOptions& options);

/// Mean and population standard deviation.
std::pair<double, double> mean_and_std(const std::vector<double>& v);

struct SearchSpace {
  std::vector<std::vector<int>> hidden_sizes{{16}, {64}, {128}, {256}, {512}, {64, 32}, {32, 16, 8}};
  std::vector<Activation> activations{Activation::relu, Activation::exu, Activation::sigmoid};
  std::vector<double> dropout{0.0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<double> feature_dropout{0.0, 0.05, 0.1, 0.2, 0.3};
  double weight_decay_lo = 1e-6, weight_decay_hi = 1e-4;
  double output_reg_lo = 1e-3, output_reg_hi = 1e-1;
  double learning_rate_lo = 1e-3, learning_rate_hi = 1e-1;

  /// Draws the tunable fields; everything else comes from `base`.
  ModelConfig sample(const ModelConfig& base, Rng& rng) const;
  bool contains(const ModelConfig& c) const;
};

struct SearchTrial {
  int index = 0;
  std::uint64_t seed = 0;
  ModelConfig config;
  double mean = 0.0;
  double std = 0.0;
};

struct SearchResult {
  ModelConfig best;
  double best_mean = 0.0;
  std::vector<SearchTrial> trials;
};

/// Seeded random search; each trial is scored by cross_validate mean.
SearchResult random_search(const SearchSpace& space, const SurvivalDataset& data,
                           const ModelConfig& base, int budget, std::uint64_t seed,
                           const CVOptions& options = {});

/// Tuned hyperparameters named after the benchmark datasets (metabric,
/// support, gbsg, whas). Throws ConfigError for unknown names.
ModelConfig apply_preset(ModelConfig base, std::string_view name);
std::vector<std::string> preset_names();

}  // namespace addhaz
