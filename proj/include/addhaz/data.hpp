#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace addhaz {

using Index = Eigen::Index;

enum class FeatureKind { continuous, binary };

std::string to_string(FeatureKind k);

/// Right-censored survival data: covariates, durations and event flags.
struct SurvivalDataset {
  Eigen::MatrixXd features;  // n x K
  Eigen::VectorXd durations;
  Eigen::VectorXi events;    // 0 = censored, 1 = event
  std::vector<std::string> names;
  std::vector<FeatureKind> kinds;

  Index rows() const { return features.rows(); }
  Index n_features() const { return features.cols(); }
  Index event_count() const { return events.sum(); }

  SurvivalDataset subset(std::span<const Index> rows) const;

  /// Throws DataError when shapes disagree, a value is missing or negative
  /// where forbidden, an event flag is outside {0,1}, or there are no events.
  void validate() const;
};

struct CsvSchema {
  std::string duration_column = "duration";
  std::string event_column = "event";
  /// Forces the kind of a named feature instead of inferring it.
  std::map<std::string, FeatureKind> kind_overrides;
};

SurvivalDataset read_csv(std::istream& in, const CsvSchema& schema = {},
                         const std::string& source = "<stream>");
SurvivalDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});

/// Writes features, then the schema's duration and event columns, with
/// shortest round-trip formatting so read_csv restores identical values.
void write_csv(const SurvivalDataset& data, std::ostream& out, const CsvSchema& schema = {});

/// z-scoring parameters fitted on a training set. Binary features keep
/// mean 0 and scale 1. Population standard deviation throughout.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
  double duration_mean = 0.0;
  double duration_scale = 1.0;
  std::vector<std::string> warnings;

  Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const;
  double transform_column(Index k, double v) const { return (v - mean(k)) / scale(k); }
  double transform_time(double t) const { return (t - duration_mean) / duration_scale; }
  Eigen::VectorXd transform_time(const Eigen::VectorXd& t) const;

  bool operator==(const Standardizer& o) const {
    return mean == o.mean && scale == o.scale && duration_mean == o.duration_mean &&
           duration_scale == o.duration_scale;
  }
};

Standardizer fit_standardizer(const SurvivalDataset& train);

/// A dataset whose features are z-scored; durations stay in raw units for
/// losses and metrics, `time_input` carries the z-scored durations fed to
/// feature-time nets.
struct StandardizedDataset {
  SurvivalDataset data;
  Eigen::VectorXd time_input;
};

std::pair<std::vector<StandardizedDataset>, Standardizer> standardize(
    const SurvivalDataset& train, std::span<const SurvivalDataset> apply_to);

/// Row order used wherever folds or splits are formed: lexicographic on
/// (event, duration, features). Makes every plan independent of file order.
std::vector<Index> canonical_order(const SurvivalDataset& data);

struct FoldPlan {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<int> fold_of_row;
  /// Rows in canonical order; used to list fold members deterministically.
  std::vector<Index> order;

  std::vector<Index> test_rows(int fold) const;
  std::vector<Index> train_rows(int fold) const;
};

/// Event-stratified k-fold plan. Throws DataError with fewer events than
/// folds, ConfigError for k < 2.
FoldPlan stratified_kfold(const SurvivalDataset& data, int k, std::uint64_t seed);

/// Event-stratified holdout of `fraction` of `rows` (given as dataset row
/// ids). Returns (kept, held_out), both in the order of `rows`.
std::pair<std::vector<Index>, std::vector<Index>> stratified_holdout(
    const SurvivalDataset& data, std::span<const Index> rows, double fraction, std::uint64_t seed);

}  // namespace addhaz
