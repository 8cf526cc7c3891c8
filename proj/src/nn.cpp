#include "addhaz/nn.hpp"

#include <cmath>

#include "addhaz/errors.hpp"
#include "addhaz/kernels.hpp"

namespace addhaz {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::exu: return "exu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::identity: return "identity";
  }
  return "identity";
}

Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "exu") return Activation::exu;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + std::string(s) + "' (expected relu, exu or sigmoid)");
}

namespace {

// ExU weights start around exp(4) so each unit is a steep ramp.
constexpr double kExuWeightMean = 4.0;
constexpr double kExuWeightStd = 0.5;

}  // namespace

DenseLayer make_dense(ad::ParameterStore& store, const std::string& name, Eigen::Index in,
                      Eigen::Index out, Activation activation, std::span<const InputRange> ranges,
                      Rng& rng) {
  DenseLayer layer;
  layer.activation = activation;
  layer.in = in;
  layer.out = out;
  Eigen::MatrixXd w(out, in);
  if (activation == Activation::exu) {
    if (static_cast<Eigen::Index>(ranges.size()) != in) {
      throw ShapeError("make_dense: exu layer needs one input range per input (" +
                       std::to_string(in) + "), got " + std::to_string(ranges.size()));
    }
    std::normal_distribution<double> normal(kExuWeightMean, kExuWeightStd);
    for (Eigen::Index j = 0; j < in; ++j)
      for (Eigen::Index i = 0; i < out; ++i) w(i, j) = normal(rng);
    Eigen::MatrixXd b(in, 1);
    for (Eigen::Index j = 0; j < in; ++j) {
      std::uniform_real_distribution<double> uniform(ranges[j].lo, ranges[j].hi);
      b(j, 0) = ranges[j].hi > ranges[j].lo ? uniform(rng) : ranges[j].lo;
    }
    layer.weight = store.add(name + ".w", std::move(w));
    layer.bias = store.add(name + ".b", std::move(b));
    return layer;
  }
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(in)));
  for (Eigen::Index j = 0; j < in; ++j)
    for (Eigen::Index i = 0; i < out; ++i) w(i, j) = normal(rng);
  layer.weight = store.add(name + ".w", std::move(w));
  layer.bias = store.add(name + ".b", Eigen::MatrixXd::Zero(out, 1));
  return layer;
}

Eigen::MatrixXd forward_dense(const ad::ParameterStore& store, const DenseLayer& layer,
                              const Eigen::MatrixXd& input) {
  if (input.cols() != layer.in) {
    throw ShapeError("forward_dense: input has " + std::to_string(input.cols()) +
                     " columns, layer in-size is " + std::to_string(layer.in));
  }
  const Eigen::MatrixXd& w = store.value(layer.weight);
  const Eigen::MatrixXd& b = store.value(layer.bias);
  switch (layer.activation) {
    case Activation::exu:
      return kernels::clip_unit(kernels::exu_preactivation(input, w, b.col(0)));
    case Activation::relu:
      return kernels::relu(kernels::affine(input, w, b.col(0)));
    case Activation::sigmoid:
      return kernels::sigmoid(kernels::affine(input, w, b.col(0)));
    case Activation::identity:
      break;
  }
  return kernels::affine(input, w, b.col(0));
}

ad::Var forward_dense(ad::Tape& tape, const ad::ParameterStore& store, const DenseLayer& layer,
                      const ad::Var& input) {
  if (input.cols() != layer.in) {
    throw ShapeError("forward_dense: input has " + std::to_string(input.cols()) +
                     " columns, layer in-size is " + std::to_string(layer.in));
  }
  const ad::Var w = tape.parameter(store, layer.weight);
  const ad::Var b = tape.parameter(store, layer.bias);
  switch (layer.activation) {
    case Activation::exu: return ad::exu(input, w, b);
    case Activation::relu: return ad::relu(ad::affine(input, w, b));
    case Activation::sigmoid: return ad::sigmoid(ad::affine(input, w, b));
    case Activation::identity: break;
  }
  return ad::affine(input, w, b);
}

Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  Eigen::MatrixXd mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    mask.data()[i] = u < rate ? 0.0 : keep_scale;
  }
  return mask;
}

Eigen::VectorXd dropout(const Eigen::VectorXd& x, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (mode == Mode::eval || rate == 0.0) return x;
  return x.cwiseProduct(dropout_mask(x.size(), 1, rate, rng).col(0));
}

FeatureNet FeatureNet::build(ad::ParameterStore& store, const std::string& name,
                             Eigen::Index inputs, const std::vector<int>& hidden,
                             Activation activation, std::span<const InputRange> ranges, Rng& rng) {
  FeatureNet net;
  Eigen::Index in = inputs;
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    if (hidden[l] <= 0) throw ConfigError("hidden layer widths must be positive");
    Activation act = activation;
    if (activation == Activation::exu && l > 0) act = Activation::relu;
    net.layers_.push_back(
        make_dense(store, name + ".l" + std::to_string(l), in, hidden[l], act, ranges, rng));
    in = hidden[l];
  }
  net.layers_.push_back(make_dense(store, name + ".out", in, 1, Activation::identity, {}, rng));
  return net;
}

Eigen::VectorXd FeatureNet::forward(const ad::ParameterStore& store,
                                    const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd h = x;
  for (const DenseLayer& layer : layers_) h = forward_dense(store, layer, h);
  return h.col(0);
}

ad::Var FeatureNet::forward(ad::Tape& tape, const ad::ParameterStore& store,
                            const Eigen::MatrixXd& x, double dropout_rate, Rng* rng) const {
  ad::Var h = tape.constant(x);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    h = forward_dense(tape, store, layers_[l], h);
    const bool hidden = l + 1 < layers_.size();
    if (hidden && dropout_rate > 0.0 && rng != nullptr) {
      h = ad::mul_constant(h, dropout_mask(h.rows(), h.cols(), dropout_rate, *rng));
    }
  }
  return h;
}

std::vector<ad::ParamId> FeatureNet::parameter_ids() const {
  std::vector<ad::ParamId> ids;
  for (const DenseLayer& l : layers_) {
    ids.push_back(l.weight);
    ids.push_back(l.bias);
  }
  return ids;
}

AdamState::AdamState(const ad::ParameterStore& store, AdamSettings s) : settings(s) {
  for (const Eigen::MatrixXd& p : store.values()) {
    first_moment.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
    second_moment.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
  }
}

void adam_step(AdamState& state, ad::ParameterStore& store, const ad::Gradients& grads) {
  if (grads.size() != store.size() || state.first_moment.size() != store.size()) {
    throw ShapeError("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(store.size()) + " parameters");
  }
  for (std::size_t p = 0; p < grads.size(); ++p) {
    const Eigen::MatrixXd& value = store.value(static_cast<ad::ParamId>(p));
    if (grads[p].rows() != value.rows() || grads[p].cols() != value.cols()) {
      throw ShapeError("adam_step: gradient shape mismatch for " + store.name(p));
    }
    if (!grads[p].allFinite()) {
      throw TrainingError("non-finite gradient for parameter " + store.name(p));
    }
  }
  const AdamSettings& s = state.settings;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  const double decay = 1.0 - s.learning_rate * s.weight_decay;
  for (std::size_t p = 0; p < grads.size(); ++p) {
    Eigen::MatrixXd& m = state.first_moment[p];
    Eigen::MatrixXd& v = state.second_moment[p];
    m = s.beta1 * m + (1.0 - s.beta1) * grads[p];
    v = s.beta2 * v + (1.0 - s.beta2) * grads[p].cwiseAbs2();
    Eigen::MatrixXd& value = store.value(static_cast<ad::ParamId>(p));
    value.array() -= s.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + s.epsilon);
    value *= decay;
  }
}

}  // namespace addhaz
