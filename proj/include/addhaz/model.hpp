#pragma once

#include <Eigen/Core>

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "addhaz/autodiff.hpp"
#include "addhaz/baseline.hpp"
#include "addhaz/data.hpp"
#include "addhaz/nn.hpp"
#include "addhaz/random.hpp"

namespace addhaz {

enum class ModelKind { linear, nam, na2m, timenam, timena2m };

std::string to_string(ModelKind k);
ModelKind parse_model_kind(std::string_view s);
bool is_time_varying(ModelKind k);
bool has_pairs(ModelKind k);

struct FeaturePair {
  int i = 0;
  int j = 0;
  auto operator<=>(const FeaturePair&) const = default;
};

struct ModelConfig {
  ModelKind kind = ModelKind::nam;
  int n_features = 0;
  std::vector<FeaturePair> pairs;
  std::vector<int> hidden_sizes{64};
  Activation activation = Activation::relu;
  double dropout = 0.0;
  double feature_dropout = 0.0;
  double output_regularization = 1e-3;  // lambda_1
  double weight_decay = 1e-6;           // lambda_2
  double learning_rate = 1e-3;
  int batch_size = 256;
  int max_epochs = 500;
  int patience = 10;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;

  /// Throws ConfigError on any violated invariant.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

/// JSON text with ModelConfig field names.
std::string dump_config(const ModelConfig& c);
/// Fields present in `text` override `base`; unknown keys are a ConfigError.
ModelConfig parse_config(std::string_view text, ModelConfig base = {});

struct FeatureInfo {
  std::string name;
  FeatureKind kind = FeatureKind::continuous;
  double min = 0.0;
  double max = 0.0;

  bool operator==(const FeatureInfo&) const = default;
};

enum class NetRole { feature, feature_time, pair };

std::string to_string(NetRole r);

struct NetInfo {
  std::string name;
  NetRole role = NetRole::feature;
  int a = 0;   // feature index
  int b = -1;  // second feature of a pair net

  bool operator==(const NetInfo&) const = default;
};

/// Sum of per-feature nets and feature-pair nets giving the log-relative
/// risk. Public functions take covariates and durations in raw units; the
/// stored standardizer maps them to net inputs.
struct AdditiveRiskModel {
  ModelConfig config;
  std::vector<FeatureInfo> features;
  Standardizer standardizer;
  double time_min = 0.0;
  double time_max = 0.0;
  ad::ParameterStore parameters;
  std::vector<FeatureNet> nets;
  std::vector<NetInfo> net_info;
  /// Mean raw output of each net over the training rows.
  std::vector<double> centering;
  std::optional<BaselineHazard> baseline;

  ModelKind kind() const { return config.kind; }
  Index n_features() const { return static_cast<Index>(features.size()); }
  Index n_nets() const { return static_cast<Index>(nets.size()); }

  std::optional<int> find_net(std::string_view name) const;
  std::vector<std::string> net_names() const;

  /// Input columns of net `k` from standardized covariates and, for
  /// feature-time nets, standardized times.
  Eigen::MatrixXd net_input(int k, const Eigen::MatrixXd& z, const Eigen::VectorXd* tz) const;

  /// Per-net outputs (n x M). `t` is ignored for proportional kinds and
  /// required for time-varying ones.
  Eigen::MatrixXd net_outputs(const Eigen::MatrixXd& x, const Eigen::VectorXd* t = nullptr) const;

  /// One net evaluated on one raw row in isolation.
  double net_output(int k, const Eigen::VectorXd& x, double t = 0.0) const;

  /// h_r(x). Throws ContractError for time-varying kinds.
  double predict_risk(const Eigen::VectorXd& x) const;
  Eigen::VectorXd predict_risk(const Eigen::MatrixXd& x) const;

  /// h_r(x, t). Throws ContractError for proportional kinds.
  double predict_risk_at_time(const Eigen::VectorXd& x, double t) const;
  Eigen::VectorXd predict_risk_at_time(const Eigen::MatrixXd& x, const Eigen::VectorXd& t) const;

  /// h_r(x_j, t_k) for every row j and time k (n x m). Proportional kinds
  /// broadcast h_r(x_j) across times. Evaluates each distinct
  /// (feature value, time) once per net.
  Eigen::MatrixXd risk_table(const Eigen::MatrixXd& x, const Eigen::VectorXd& times) const;

  /// Recompute `centering` from training covariates and durations.
  void fit_centering(const SurvivalDataset& train);
};

/// Sums the columns of a per-net output matrix in net order; the
/// reduction every prediction path uses.
Eigen::VectorXd sum_nets(const Eigen::MatrixXd& outputs);

/// Builds fresh nets for `config`. Feature metadata, the standardizer and
/// the time range come from `reference` (normally the training rows).
/// Throws ConfigError for out-of-range or duplicate pairs.
AdditiveRiskModel build_model(const ModelConfig& config, const SurvivalDataset& reference, Rng& rng);

struct GridSpec {
  int points_1d = 256;
  int points_2d = 64;
  double expand = 0.05;
};

/// One net sampled on a grid. `values` is row-major over (axis1, axis2);
/// 1-input nets have an empty axis2.
struct ShapeTable {
  std::string net;
  NetRole role = NetRole::feature;
  std::string axis1_name;
  std::string axis2_name;
  std::vector<double> axis1;
  std::vector<double> axis2;
  std::vector<double> values;
  double centering = 0.0;

  double at(std::size_t i, std::size_t j = 0) const {
    return values[axis2.empty() ? i : i * axis2.size() + j];
  }
};

/// Grid over a feature in raw units: two observed levels for binary
/// features, otherwise `points` evenly spaced over the expanded range.
std::vector<double> feature_grid(const FeatureInfo& f, int points, double expand);
std::vector<double> time_grid(double lo, double hi, int points, double expand);

/// Throws ConfigError naming the available nets when `net` is unknown.
ShapeTable extract_shape(const AdditiveRiskModel& model, std::string_view net, const GridSpec& grid = {});

void save_model(const AdditiveRiskModel& model, std::ostream& out);
void save_model(const AdditiveRiskModel& model, const std::filesystem::path& path);
AdditiveRiskModel load_model(std::istream& in);
AdditiveRiskModel load_model(const std::filesystem::path& path);

}  // namespace addhaz
