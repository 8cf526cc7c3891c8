#include "addhaz/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "addhaz/errors.hpp"

namespace addhaz {

using json = nlohmann::json;

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::linear: return "linear";
    case ModelKind::nam: return "nam";
    case ModelKind::na2m: return "na2m";
    case ModelKind::timenam: return "timenam";
    case ModelKind::timena2m: return "timena2m";
  }
  return "nam";
}

ModelKind parse_model_kind(std::string_view s) {
  if (s == "linear") return ModelKind::linear;
  if (s == "nam") return ModelKind::nam;
  if (s == "na2m") return ModelKind::na2m;
  if (s == "timenam") return ModelKind::timenam;
  if (s == "timena2m") return ModelKind::timena2m;
  throw ConfigError("unknown model kind '" + std::string(s) +
                    "' (expected linear, nam, na2m, timenam or timena2m)");
}

bool is_time_varying(ModelKind k) { return k == ModelKind::timenam || k == ModelKind::timena2m; }
bool has_pairs(ModelKind k) { return k == ModelKind::na2m || k == ModelKind::timena2m; }

std::string to_string(NetRole r) {
  switch (r) {
    case NetRole::feature: return "feature";
    case NetRole::feature_time: return "feature_time";
    case NetRole::pair: return "pair";
  }
  return "feature";
}

void ModelConfig::validate() const {
  if (n_features < 1) throw ConfigError("n_features must be at least 1");
  if (!has_pairs(kind) && !pairs.empty()) {
    throw ConfigError("model kind " + to_string(kind) + " takes no feature pairs");
  }
  if (has_pairs(kind) && pairs.empty()) {
    throw ConfigError("model kind " + to_string(kind) +
                      " needs at least one feature pair (run select-pairs or pass --pairs)");
  }
  std::set<FeaturePair> seen;
  for (const FeaturePair& p : pairs) {
    if (p.i < 0 || p.j < 0 || p.i >= n_features || p.j >= n_features) {
      throw ConfigError("pair (" + std::to_string(p.i) + "," + std::to_string(p.j) +
                        ") out of range for " + std::to_string(n_features) + " features");
    }
    if (p.i >= p.j) {
      throw ConfigError("pair (" + std::to_string(p.i) + "," + std::to_string(p.j) +
                        ") must satisfy i < j");
    }
    if (!seen.insert(p).second) {
      throw ConfigError("duplicate pair (" + std::to_string(p.i) + "," + std::to_string(p.j) + ")");
    }
  }
  if (kind == ModelKind::linear && !hidden_sizes.empty()) {
    throw ConfigError("linear model takes no hidden layers");
  }
  for (int h : hidden_sizes) {
    if (h <= 0) throw ConfigError("hidden layer widths must be positive");
  }
  auto probability = [](double p, const char* name) {
    if (!(p >= 0.0 && p < 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1)");
  };
  probability(dropout, "dropout");
  probability(feature_dropout, "feature_dropout");
  probability(validation_fraction, "validation_fraction");
  if (!(output_regularization >= 0.0) || !std::isfinite(output_regularization)) {
    throw ConfigError("output_regularization must be finite and nonnegative");
  }
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw ConfigError("weight_decay must be finite and nonnegative");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (max_epochs < 0) throw ConfigError("max_epochs must be nonnegative");
  if (patience < 1) throw ConfigError("patience must be at least 1");
}

namespace {

json config_to_json(const ModelConfig& c) {
  json pairs = json::array();
  for (const FeaturePair& p : c.pairs) pairs.push_back({p.i, p.j});
  return json{{"kind", to_string(c.kind)},
              {"n_features", c.n_features},
              {"pairs", pairs},
              {"hidden_sizes", c.hidden_sizes},
              {"activation", to_string(c.activation)},
              {"dropout", c.dropout},
              {"feature_dropout", c.feature_dropout},
              {"output_regularization", c.output_regularization},
              {"weight_decay", c.weight_decay},
              {"learning_rate", c.learning_rate},
              {"batch_size", c.batch_size},
              {"max_epochs", c.max_epochs},
              {"patience", c.patience},
              {"validation_fraction", c.validation_fraction},
              {"seed", c.seed}};
}

ModelConfig config_from_json(const json& j, ModelConfig c) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "kind") {
        c.kind = parse_model_kind(v.get<std::string>());
      } else if (key == "n_features") {
        c.n_features = v.get<int>();
      } else if (key == "pairs") {
        c.pairs.clear();
        for (const json& p : v) {
          if (!p.is_array() || p.size() != 2) throw ConfigError("pairs entries must be [i, j]");
          c.pairs.push_back({p[0].get<int>(), p[1].get<int>()});
        }
      } else if (key == "hidden_sizes") {
        c.hidden_sizes = v.get<std::vector<int>>();
      } else if (key == "activation") {
        c.activation = parse_activation(v.get<std::string>());
      } else if (key == "dropout") {
        c.dropout = v.get<double>();
      } else if (key == "feature_dropout") {
        c.feature_dropout = v.get<double>();
      } else if (key == "output_regularization") {
        c.output_regularization = v.get<double>();
      } else if (key == "weight_decay") {
        c.weight_decay = v.get<double>();
      } else if (key == "learning_rate") {
        c.learning_rate = v.get<double>();
      } else if (key == "batch_size") {
        c.batch_size = v.get<int>();
      } else if (key == "max_epochs") {
        c.max_epochs = v.get<int>();
      } else if (key == "patience") {
        c.patience = v.get<int>();
      } else if (key == "validation_fraction") {
        c.validation_fraction = v.get<double>();
      } else if (key == "seed") {
        c.seed = v.get<std::uint64_t>();
      } else {
        throw ConfigError("unknown config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return c;
}

}  // namespace

std::string dump_config(const ModelConfig& c) { return config_to_json(c).dump(2); }

ModelConfig parse_config(std::string_view text, ModelConfig base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j, std::move(base));
}

std::optional<int> AdditiveRiskModel::find_net(std::string_view name) const {
  for (std::size_t k = 0; k < net_info.size(); ++k) {
    if (net_info[k].name == name) return static_cast<int>(k);
  }
  return std::nullopt;
}

std::vector<std::string> AdditiveRiskModel::net_names() const {
  std::vector<std::string> names;
  for (const NetInfo& n : net_info) names.push_back(n.name);
  return names;
}

Eigen::MatrixXd AdditiveRiskModel::net_input(int k, const Eigen::MatrixXd& z,
                                             const Eigen::VectorXd* tz) const {
  const NetInfo& info = net_info.at(static_cast<std::size_t>(k));
  switch (info.role) {
    case NetRole::feature:
      return z.col(info.a);
    case NetRole::feature_time: {
      if (tz == nullptr || tz->size() != z.rows()) {
        throw ShapeError("feature-time net '" + info.name + "' needs one time per row");
      }
      Eigen::MatrixXd in(z.rows(), 2);
      in.col(0) = z.col(info.a);
      in.col(1) = *tz;
      return in;
    }
    case NetRole::pair: {
      Eigen::MatrixXd in(z.rows(), 2);
      in.col(0) = z.col(info.a);
      in.col(1) = z.col(info.b);
      return in;
    }
  }
  return {};
}

Eigen::VectorXd sum_nets(const Eigen::MatrixXd& outputs) {
  if (outputs.cols() == 0) return Eigen::VectorXd::Zero(outputs.rows());
  Eigen::VectorXd h = outputs.col(0);
  for (Index k = 1; k < outputs.cols(); ++k) h += outputs.col(k);
  return h;
}

namespace {

void check_covariates(const AdditiveRiskModel& m, const Eigen::MatrixXd& x) {
  if (x.cols() != m.n_features()) {
    throw ShapeError("expected " + std::to_string(m.n_features()) + " covariates, got " +
                     std::to_string(x.cols()));
  }
}

void check_times(const Eigen::VectorXd& t, Index rows) {
  if (t.size() != rows) {
    throw ShapeError("expected " + std::to_string(rows) + " times, got " + std::to_string(t.size()));
  }
  for (Index i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t(i)) || t(i) < 0.0) {
      throw ContractError("evaluation times must be finite and nonnegative");
    }
  }
}

}  // namespace

Eigen::MatrixXd AdditiveRiskModel::net_outputs(const Eigen::MatrixXd& x,
                                               const Eigen::VectorXd* t) const {
  check_covariates(*this, x);
  const Eigen::MatrixXd z = standardizer.transform(x);
  Eigen::VectorXd tz;
  if (is_time_varying(kind())) {
    if (t == nullptr) throw ContractError("time-varying model needs evaluation times");
    check_times(*t, x.rows());
    tz = standardizer.transform_time(*t);
  }
  Eigen::MatrixXd out(x.rows(), n_nets());
  for (int k = 0; k < n_nets(); ++k) {
    out.col(k) = nets[k].forward(parameters, net_input(k, z, &tz));
  }
  return out;
}

double AdditiveRiskModel::net_output(int k, const Eigen::VectorXd& x, double t) const {
  if (k < 0 || k >= n_nets()) throw ContractError("net index out of range");
  const Eigen::MatrixXd row = x.transpose();
  check_covariates(*this, row);
  const Eigen::MatrixXd z = standardizer.transform(row);
  Eigen::VectorXd tz(1);
  tz(0) = standardizer.transform_time(t);
  return nets[k].forward(parameters, net_input(k, z, &tz))(0);
}

double AdditiveRiskModel::predict_risk(const Eigen::VectorXd& x) const {
  return predict_risk(Eigen::MatrixXd(x.transpose()))(0);
}

Eigen::VectorXd AdditiveRiskModel::predict_risk(const Eigen::MatrixXd& x) const {
  if (is_time_varying(kind())) {
    throw ContractError("model kind " + to_string(kind()) +
                        " has a time-varying risk; use predict_risk_at_time");
  }
  return sum_nets(net_outputs(x));
}

double AdditiveRiskModel::predict_risk_at_time(const Eigen::VectorXd& x, double t) const {
  Eigen::VectorXd tv(1);
  tv(0) = t;
  return predict_risk_at_time(Eigen::MatrixXd(x.transpose()), tv)(0);
}

Eigen::VectorXd AdditiveRiskModel::predict_risk_at_time(const Eigen::MatrixXd& x,
                                                        const Eigen::VectorXd& t) const {
  if (!is_time_varying(kind())) {
    throw ContractError("model kind " + to_string(kind()) +
                        " is proportional; use predict_risk");
  }
  return sum_nets(net_outputs(x, &t));
}

namespace {

// Rows per forward call when evaluating large (value x time) grids.
constexpr Index kTableChunk = 32768;

}  // namespace

Eigen::MatrixXd AdditiveRiskModel::risk_table(const Eigen::MatrixXd& x,
                                              const Eigen::VectorXd& times) const {
  check_covariates(*this, x);
  const Index n = x.rows();
  const Index m = times.size();
  if (!is_time_varying(kind())) {
    const Eigen::VectorXd h = predict_risk(x);
    return h.replicate(1, m);
  }
  check_times(times, m);
  const Eigen::MatrixXd z = standardizer.transform(x);
  const Eigen::VectorXd tz = standardizer.transform_time(times);
  Eigen::MatrixXd table(n, m);
  for (int k = 0; k < n_nets(); ++k) {
    const NetInfo& info = net_info[k];
    Eigen::MatrixXd contrib(n, m);
    if (info.role == NetRole::pair) {
      const Eigen::VectorXd v = nets[k].forward(parameters, net_input(k, z, nullptr));
      contrib = v.replicate(1, m);
    } else {
      std::vector<double> values(z.col(info.a).data(), z.col(info.a).data() + n);
      std::sort(values.begin(), values.end());
      values.erase(std::unique(values.begin(), values.end()), values.end());
      const Index u = static_cast<Index>(values.size());
      Eigen::VectorXd grid_out(u * m);
      Eigen::MatrixXd in(std::min(kTableChunk, u * m), 2);
      for (Index start = 0; start < u * m; start += kTableChunk) {
        const Index len = std::min(kTableChunk, u * m - start);
        in.resize(len, 2);
        for (Index r = 0; r < len; ++r) {
          in(r, 0) = values[static_cast<std::size_t>((start + r) / m)];
          in(r, 1) = tz((start + r) % m);
        }
        grid_out.segment(start, len) = nets[k].forward(parameters, in);
      }
      for (Index j = 0; j < n; ++j) {
        const auto id = std::lower_bound(values.begin(), values.end(), z(j, info.a)) - values.begin();
        contrib.row(j) = grid_out.segment(id * m, m).transpose();
      }
    }
    if (k == 0) {
      table = contrib;
    } else {
      table += contrib;
    }
  }
  if (n_nets() == 0) table.setZero();
  return table;
}

void AdditiveRiskModel::fit_centering(const SurvivalDataset& train) {
  const Eigen::MatrixXd out = net_outputs(train.features, &train.durations);
  centering.assign(static_cast<std::size_t>(n_nets()), 0.0);
  for (int k = 0; k < n_nets(); ++k) centering[k] = out.col(k).mean();
}

namespace {

// Creates nets from the model's config, feature metadata and standardizer.
void assemble(AdditiveRiskModel& m, Rng& rng) {
  const ModelConfig& c = m.config;
  const bool timed = is_time_varying(c.kind);
  auto range_of = [&](int k) {
    return InputRange{m.standardizer.transform_column(k, m.features[k].min),
                      m.standardizer.transform_column(k, m.features[k].max)};
  };
  const InputRange time_range{m.standardizer.transform_time(m.time_min),
                              m.standardizer.transform_time(m.time_max)};
  m.parameters = ad::ParameterStore{};
  m.nets.clear();
  m.net_info.clear();
  for (int k = 0; k < c.n_features; ++k) {
    NetInfo info{m.features[k].name, timed ? NetRole::feature_time : NetRole::feature, k, -1};
    std::vector<InputRange> ranges{range_of(k)};
    if (timed) ranges.push_back(time_range);
    m.nets.push_back(FeatureNet::build(m.parameters, "net" + std::to_string(k),
                                       static_cast<Index>(ranges.size()), c.hidden_sizes,
                                       c.activation, ranges, rng));
    m.net_info.push_back(std::move(info));
  }
  for (const FeaturePair& p : c.pairs) {
    NetInfo info{m.features[p.i].name + ":" + m.features[p.j].name, NetRole::pair, p.i, p.j};
    const std::vector<InputRange> ranges{range_of(p.i), range_of(p.j)};
    m.nets.push_back(FeatureNet::build(m.parameters, "pair" + std::to_string(p.i) + "_" +
                                           std::to_string(p.j),
                                       2, c.hidden_sizes, c.activation, ranges, rng));
    m.net_info.push_back(std::move(info));
  }
  m.centering.assign(m.nets.size(), 0.0);
}

}  // namespace

AdditiveRiskModel build_model(const ModelConfig& config, const SurvivalDataset& reference,
                              Rng& rng) {
  config.validate();
  if (config.n_features != reference.n_features()) {
    throw ConfigError("config has " + std::to_string(config.n_features) +
                      " features, data has " + std::to_string(reference.n_features()));
  }
  if (reference.rows() == 0) throw DataError("cannot build a model from an empty dataset");
  std::set<std::string> names(reference.names.begin(), reference.names.end());
  if (names.size() != reference.names.size()) throw DataError("feature names must be unique");

  AdditiveRiskModel m;
  m.config = config;
  m.standardizer = fit_standardizer(reference);
  for (Index k = 0; k < reference.n_features(); ++k) {
    m.features.push_back({reference.names[k], reference.kinds[k], reference.features.col(k).minCoeff(),
                          reference.features.col(k).maxCoeff()});
  }
  m.time_min = reference.durations.minCoeff();
  m.time_max = reference.durations.maxCoeff();
  assemble(m, rng);
  return m;
}

std::vector<double> feature_grid(const FeatureInfo& f, int points, double expand) {
  if (f.kind == FeatureKind::binary) {
    if (f.max > f.min) return {f.min, f.max};
    return {f.min};
  }
  const double range = f.max - f.min;
  const double lo = f.min - expand * range;
  const double hi = f.max + expand * range;
  if (points < 2 || !(hi > lo)) return {lo};
  std::vector<double> g(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    g[i] = lo + (hi - lo) * (static_cast<double>(i) / static_cast<double>(points - 1));
  }
  g.back() = hi;
  return g;
}

std::vector<double> time_grid(double lo, double hi, int points, double expand) {
  const double range = hi - lo;
  FeatureInfo f{"time", FeatureKind::continuous, std::max(0.0, lo - expand * range),
                hi + expand * range};
  return feature_grid(f, points, 0.0);
}

ShapeTable extract_shape(const AdditiveRiskModel& model, std::string_view net,
                         const GridSpec& grid) {
  const std::optional<int> found = model.find_net(net);
  if (!found) {
    std::string list;
    for (const std::string& n : model.net_names()) list += (list.empty() ? "" : ", ") + n;
    throw ConfigError("unknown net '" + std::string(net) + "'; available nets: " + list);
  }
  const int k = *found;
  const NetInfo& info = model.net_info[k];
  ShapeTable table;
  table.net = info.name;
  table.role = info.role;
  table.centering = model.centering.at(k);
  table.axis1_name = model.features[info.a].name;
  Eigen::MatrixXd in;
  if (info.role == NetRole::feature) {
    table.axis1 = feature_grid(model.features[info.a], grid.points_1d, grid.expand);
    in.resize(static_cast<Index>(table.axis1.size()), 1);
    for (std::size_t i = 0; i < table.axis1.size(); ++i) {
      in(i, 0) = model.standardizer.transform_column(info.a, table.axis1[i]);
    }
  } else {
    table.axis1 = feature_grid(model.features[info.a], grid.points_2d, grid.expand);
    if (info.role == NetRole::feature_time) {
      table.axis2_name = "time";
      table.axis2 = time_grid(model.time_min, model.time_max, grid.points_2d, grid.expand);
    } else {
      table.axis2_name = model.features[info.b].name;
      table.axis2 = feature_grid(model.features[info.b], grid.points_2d, grid.expand);
    }
    const std::size_t n1 = table.axis1.size();
    const std::size_t n2 = table.axis2.size();
    in.resize(static_cast<Index>(n1 * n2), 2);
    for (std::size_t i = 0; i < n1; ++i) {
      for (std::size_t j = 0; j < n2; ++j) {
        const Index r = static_cast<Index>(i * n2 + j);
        in(r, 0) = model.standardizer.transform_column(info.a, table.axis1[i]);
        in(r, 1) = info.role == NetRole::feature_time
                       ? model.standardizer.transform_time(table.axis2[j])
                       : model.standardizer.transform_column(info.b, table.axis2[j]);
      }
    }
  }
  const Eigen::VectorXd out = model.nets[k].forward(model.parameters, in);
  table.values.assign(out.data(), out.data() + out.size());
  return table;
}

namespace {

constexpr int kModelFormatVersion = 1;

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd json_vector(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace

void save_model(const AdditiveRiskModel& m, std::ostream& out) {
  json features = json::array();
  for (const FeatureInfo& f : m.features) {
    features.push_back({{"name", f.name}, {"kind", to_string(f.kind)}, {"min", f.min}, {"max", f.max}});
  }
  json params = json::array();
  for (std::size_t p = 0; p < m.parameters.size(); ++p) {
    const Eigen::MatrixXd& v = m.parameters.value(static_cast<ad::ParamId>(p));
    params.push_back({{"name", m.parameters.name(static_cast<ad::ParamId>(p))},
                      {"rows", v.rows()},
                      {"cols", v.cols()},
                      {"data", std::vector<double>(v.data(), v.data() + v.size())}});
  }
  json j{{"format", "addhaz-model"},
         {"version", kModelFormatVersion},
         {"config", config_to_json(m.config)},
         {"features", features},
         {"standardizer",
          {{"mean", vector_json(m.standardizer.mean)},
           {"scale", vector_json(m.standardizer.scale)},
           {"duration_mean", m.standardizer.duration_mean},
           {"duration_scale", m.standardizer.duration_scale},
           {"std_convention", "population"}}},
         {"time_range", {m.time_min, m.time_max}},
         {"centering", m.centering},
         {"parameters", params}};
  if (m.baseline) {
    j["baseline"] = {{"times", m.baseline->times},
                     {"increments", m.baseline->increments},
                     {"cumulative", m.baseline->cumulative}};
  } else {
    j["baseline"] = nullptr;
  }
  out << j.dump(1) << '\n';
}

void save_model(const AdditiveRiskModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  save_model(model, out);
}

AdditiveRiskModel load_model(std::istream& in) {
  AdditiveRiskModel m;
  try {
    const json j = json::parse(in);
    if (j.value("format", "") != "addhaz-model") throw DataError("not an addhaz model file");
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw DataError("unsupported model format version " + std::to_string(version));
    }
    m.config = config_from_json(j.at("config"), ModelConfig{});
    m.config.validate();
    for (const json& f : j.at("features")) {
      m.features.push_back({f.at("name").get<std::string>(),
                            f.at("kind").get<std::string>() == "binary" ? FeatureKind::binary
                                                                        : FeatureKind::continuous,
                            f.at("min").get<double>(), f.at("max").get<double>()});
    }
    if (m.n_features() != m.config.n_features) {
      throw DataError("model file feature count disagrees with its config");
    }
    const json& s = j.at("standardizer");
    m.standardizer.mean = json_vector(s.at("mean"));
    m.standardizer.scale = json_vector(s.at("scale"));
    m.standardizer.duration_mean = s.at("duration_mean").get<double>();
    m.standardizer.duration_scale = s.at("duration_scale").get<double>();
    m.time_min = j.at("time_range").at(0).get<double>();
    m.time_max = j.at("time_range").at(1).get<double>();
    Rng rng(0);
    assemble(m, rng);
    const json& params = j.at("parameters");
    if (params.size() != m.parameters.size()) {
      throw DataError("model file has " + std::to_string(params.size()) + " parameters, expected " +
                      std::to_string(m.parameters.size()));
    }
    for (std::size_t p = 0; p < params.size(); ++p) {
      const auto id = static_cast<ad::ParamId>(p);
      Eigen::MatrixXd& v = m.parameters.value(id);
      const json& e = params[p];
      if (e.at("name").get<std::string>() != m.parameters.name(id) ||
          e.at("rows").get<Index>() != v.rows() || e.at("cols").get<Index>() != v.cols()) {
        throw DataError("model file parameter " + std::to_string(p) + " does not match the architecture");
      }
      const auto data = e.at("data").get<std::vector<double>>();
      if (static_cast<Index>(data.size()) != v.size()) throw DataError("truncated parameter data");
      std::copy(data.begin(), data.end(), v.data());
    }
    m.centering = j.at("centering").get<std::vector<double>>();
    if (static_cast<Index>(m.centering.size()) != m.n_nets()) {
      throw DataError("model file centering has the wrong length");
    }
    if (!j.at("baseline").is_null()) {
      const json& b = j.at("baseline");
      m.baseline = BaselineHazard{b.at("times").get<std::vector<double>>(),
                                  b.at("increments").get<std::vector<double>>(),
                                  b.at("cumulative").get<std::vector<double>>()};
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("model file has an invalid config: ") + e.what());
  }
  return m;
}

AdditiveRiskModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file " + path.string());
  return load_model(in);
}

}  // namespace addhaz
