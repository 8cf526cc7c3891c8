#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "addhaz/autodiff.hpp"
#include "addhaz/random.hpp"

namespace addhaz {

enum class Activation { relu, exu, sigmoid, identity };

std::string to_string(Activation a);
Activation parse_activation(std::string_view s);

/// One layer of a feature net. For `relu`, `sigmoid` and `identity` the
/// weight is (out x in) and the bias (out x 1). An `exu` layer keeps its
/// weight in log form (unit slope is exp(weight)) and one bias per input
/// (in x 1), since the unit computes clip(exp(w) (x - b), 0, 1).
struct DenseLayer {
  Activation activation = Activation::identity;
  ad::ParamId weight = -1;
  ad::ParamId bias = -1;
  Eigen::Index in = 0;
  Eigen::Index out = 0;
};

/// Range of one net input, used to spread ExU biases.
struct InputRange {
  double lo = -1.0;
  double hi = 1.0;
};

DenseLayer make_dense(ad::ParameterStore& store, const std::string& name, Eigen::Index in,
                      Eigen::Index out, Activation activation, std::span<const InputRange> ranges,
                      Rng& rng);

Eigen::MatrixXd forward_dense(const ad::ParameterStore& store, const DenseLayer& layer,
                              const Eigen::MatrixXd& input);
ad::Var forward_dense(ad::Tape& tape, const ad::ParameterStore& store, const DenseLayer& layer,
                      const ad::Var& input);

enum class Mode { train, eval };

/// Inverted-dropout keep mask: entries are 0 with probability `rate`,
/// 1 / (1 - rate) otherwise.
Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng);

Eigen::VectorXd dropout(const Eigen::VectorXd& x, double rate, Mode mode, Rng& rng);

/// A small MLP mapping `inputs` columns to one output column.
class FeatureNet {
 public:
  FeatureNet() = default;

  /// Hidden layers use `activation`; with `exu` only the first hidden layer
  /// is an ExU layer and the rest are relu. The output layer is identity.
  /// Empty `hidden` yields a single linear unit.
  static FeatureNet build(ad::ParameterStore& store, const std::string& name, Eigen::Index inputs,
                          const std::vector<int>& hidden, Activation activation,
                          std::span<const InputRange> ranges, Rng& rng);

  Eigen::Index inputs() const { return layers_.empty() ? 0 : layers_.front().in; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  Eigen::VectorXd forward(const ad::ParameterStore& store, const Eigen::MatrixXd& x) const;

  /// Records the forward pass. With `dropout_rate > 0` an inverted-dropout
  /// mask is drawn from `rng` after every hidden activation.
  ad::Var forward(ad::Tape& tape, const ad::ParameterStore& store, const Eigen::MatrixXd& x,
                  double dropout_rate, Rng* rng) const;

  std::vector<ad::ParamId> parameter_ids() const;

 private:
  std::vector<DenseLayer> layers_;
};

struct AdamSettings {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

/// Adam moments for every parameter of a store, plus the step counter.
struct AdamState {
  AdamSettings settings;
  std::vector<Eigen::MatrixXd> first_moment;
  std::vector<Eigen::MatrixXd> second_moment;
  std::int64_t step = 0;

  AdamState() = default;
  AdamState(const ad::ParameterStore& store, AdamSettings s);
};

/// Bias-corrected Adam update followed by decoupled decay
/// `p *= 1 - lr * weight_decay`. Throws TrainingError naming the parameter
/// on a non-finite gradient.
void adam_step(AdamState& state, ad::ParameterStore& store, const ad::Gradients& grads);

}  // namespace addhaz
