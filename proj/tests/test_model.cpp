#include <doctest.h>

#include <sstream>

#include "addhaz/errors.hpp"
#include "addhaz/model.hpp"
#include "support.hpp"

using namespace addhaz;
using addhaz::testing::small_config;

namespace {

SurvivalDataset reference_data(int features = 3, std::uint64_t seed = 1) {
  Rng rng(seed);
  testing::SyntheticSpec spec;
  spec.rows = 60;
  spec.features = features;
  spec.binary_features = 1;
  spec.beta = {0.8, -0.5};
  return testing::synthetic_survival(spec, rng);
}

void zero_parameters(AdditiveRiskModel& m) {
  for (std::size_t p = 0; p < m.parameters.size(); ++p) m.parameters.value(static_cast<int>(p)).setZero();
}

}  // namespace

TEST_CASE("net census") {
  Rng rng(2);
  const SurvivalDataset d = reference_data(9);
  CHECK(build_model(small_config(ModelKind::nam, 9), d, rng).n_nets() == 9);
  const std::vector<FeaturePair> five{{0, 1}, {0, 2}, {1, 2}, {3, 4}, {5, 8}};
  const AdditiveRiskModel na2m = build_model(small_config(ModelKind::na2m, 9, five), d, rng);
  CHECK(na2m.n_nets() == 14);
  CHECK(na2m.net_info.back().role == NetRole::pair);
  const AdditiveRiskModel tn = build_model(small_config(ModelKind::timena2m, 9, five), d, rng);
  CHECK(tn.net_info.front().role == NetRole::feature_time);
  CHECK(tn.nets.front().inputs() == 2);
  CHECK(tn.nets.back().inputs() == 2);
}

TEST_CASE("config validation") {
  Rng rng(2);
  const SurvivalDataset d = reference_data();
  CHECK_THROWS_AS(build_model(small_config(ModelKind::na2m, 3, {{0, 3}}), d, rng), ConfigError);
  CHECK_THROWS_AS(build_model(small_config(ModelKind::na2m, 3, {{0, 1}, {0, 1}}), d, rng), ConfigError);
  CHECK_THROWS_AS(build_model(small_config(ModelKind::na2m, 3, {}), d, rng), ConfigError);
  CHECK_THROWS_AS(build_model(small_config(ModelKind::nam, 3, {{0, 1}}), d, rng), ConfigError);
  ModelConfig c = small_config(ModelKind::nam, 3);
  c.dropout = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(parse_model_kind("gam"), ConfigError);
}

TEST_CASE("config JSON round trip and unknown keys") {
  ModelConfig c = small_config(ModelKind::timena2m, 5, {{0, 4}, {1, 2}});
  c.activation = Activation::exu;
  c.dropout = 0.05;
  c.seed = 123456789012345ULL;
  CHECK(parse_config(dump_config(c)) == c);
  CHECK_THROWS_AS(parse_config(R"({"hidden": [4]})"), ConfigError);
  const ModelConfig partial = parse_config(R"({"learning_rate": 0.01})", c);
  CHECK(partial.learning_rate == 0.01);
  CHECK(partial.pairs == c.pairs);
}

TEST_CASE("zeroed nets predict zero") {
  Rng rng(3);
  const SurvivalDataset d = reference_data();
  AdditiveRiskModel nam = build_model(small_config(ModelKind::nam, 3), d, rng);
  zero_parameters(nam);
  CHECK(nam.predict_risk(Eigen::VectorXd(Eigen::Vector3d(1.5, -2, 1))) == 0.0);
  AdditiveRiskModel tn = build_model(small_config(ModelKind::timenam, 3), d, rng);
  zero_parameters(tn);
  CHECK(tn.predict_risk_at_time(Eigen::VectorXd(Eigen::Vector3d(1.5, -2, 1)), 4.0) == 0.0);
}

TEST_CASE("kind contracts") {
  Rng rng(3);
  const SurvivalDataset d = reference_data();
  const AdditiveRiskModel nam = build_model(small_config(ModelKind::nam, 3), d, rng);
  const AdditiveRiskModel tn = build_model(small_config(ModelKind::timenam, 3), d, rng);
  const Eigen::VectorXd x = Eigen::Vector3d(0.1, 0.2, 1);
  CHECK_THROWS_AS(tn.predict_risk(x), ContractError);
  CHECK_THROWS_AS(nam.predict_risk_at_time(x, 1.0), ContractError);
  try {
    tn.predict_risk(x);
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()).find("predict_risk_at_time") != std::string::npos);
  }
}

TEST_CASE("additive decomposition is exact") {
  Rng rng(4);
  const SurvivalDataset d = reference_data(4);
  const std::vector<FeaturePair> pairs{{0, 1}, {2, 3}};
  for (ModelKind kind : {ModelKind::linear, ModelKind::nam, ModelKind::na2m, ModelKind::timenam,
                         ModelKind::timena2m}) {
    CAPTURE(to_string(kind));
    const AdditiveRiskModel m =
        build_model(small_config(kind, 4, has_pairs(kind) ? pairs : std::vector<FeaturePair>{}), d, rng);
    const Eigen::VectorXd t = d.durations;
    const Eigen::VectorXd batch =
        is_time_varying(kind) ? m.predict_risk_at_time(d.features, t) : m.predict_risk(d.features);
    for (Index r = 0; r < d.rows(); ++r) {
      const Eigen::VectorXd x = d.features.row(r).transpose();
      const double single = is_time_varying(kind) ? m.predict_risk_at_time(x, t(r)) : m.predict_risk(x);
      CHECK(single == testing::isolated_sum(m, x, t(r)));
      CHECK(batch(r) == single);
    }
  }
}

TEST_CASE("perturbing one feature moves only its nets") {
  Rng rng(5);
  const SurvivalDataset d = reference_data(4);
  const AdditiveRiskModel m = build_model(small_config(ModelKind::na2m, 4, {{0, 1}, {2, 3}}), d, rng);
  Eigen::VectorXd x = d.features.row(0).transpose();
  Eigen::VectorXd y = x;
  y(2) += 0.7;
  const double expected =
      (m.net_output(2, y) - m.net_output(2, x)) + (m.net_output(5, y) - m.net_output(5, x));
  for (int k : {0, 1, 3, 4}) CHECK(m.net_output(k, y) == m.net_output(k, x));
  CHECK(m.predict_risk(y) - m.predict_risk(x) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("pair nets ignore time") {
  Rng rng(6);
  const SurvivalDataset d = reference_data(3);
  const AdditiveRiskModel m = build_model(small_config(ModelKind::timena2m, 3, {{0, 2}}), d, rng);
  const Eigen::VectorXd x = d.features.row(3).transpose();
  CHECK(m.net_output(3, x, 0.5) == m.net_output(3, x, 9.0));
  CHECK(m.net_output(0, x, 0.5) != m.net_output(0, x, 9.0));
}

TEST_CASE("varying t traces the feature-time nets") {
  Rng rng(7);
  const SurvivalDataset d = reference_data(3);
  const AdditiveRiskModel m = build_model(small_config(ModelKind::timenam, 3), d, rng);
  const Eigen::VectorXd x = d.features.row(1).transpose();
  for (double t : {0.0, 0.3, 1.1, 2.5}) {
    const Eigen::VectorXd times = Eigen::VectorXd::Constant(1, t);
    const Eigen::MatrixXd table = m.risk_table(x.transpose(), times);
    CHECK(table(0, 0) == m.predict_risk_at_time(x, t));
  }
}

TEST_CASE("linear kind is linear in each coordinate") {
  Rng rng(8);
  const SurvivalDataset d = reference_data(3);
  const AdditiveRiskModel m = build_model(small_config(ModelKind::linear, 3), d, rng);
  Eigen::VectorXd x = Eigen::Vector3d(0.2, -0.4, 1);
  const double base = m.predict_risk(x);
  x(0) += 1.0;
  const double one = m.predict_risk(x);
  x(0) += 1.0;
  const double two = m.predict_risk(x);
  CHECK(two - one == doctest::Approx(one - base).epsilon(1e-12));
}

TEST_CASE("shape extraction matches direct evaluation") {
  Rng rng(9);
  const SurvivalDataset d = reference_data(3);
  const AdditiveRiskModel m = build_model(small_config(ModelKind::timena2m, 3, {{0, 1}}), d, rng);

  SUBCASE("1-input grid of 3 points") {
    const AdditiveRiskModel nam = build_model(small_config(ModelKind::nam, 3), d, rng);
    const ShapeTable t = extract_shape(nam, "x1", GridSpec{3, 4, 0.05});
    REQUIRE(t.values.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
      x(0) = t.axis1[i];
      CHECK(t.at(i) == nam.net_output(0, x));
    }
  }
  SUBCASE("pair net on a 4 x 5 grid") {
    GridSpec g{4, 4, 0.05};
    ShapeTable t = extract_shape(m, "x1:x2", g);
    CHECK(t.values.size() == 16);
    g.points_2d = 5;
    t = extract_shape(m, "x1:x2", g);
    REQUIRE(t.axis1.size() == 5);
    REQUIRE(t.axis2.size() == 5);
    for (std::size_t i = 0; i < t.axis1.size(); ++i) {
      for (std::size_t j = 0; j < t.axis2.size(); ++j) {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
        x(0) = t.axis1[i];
        x(1) = t.axis2[j];
        CHECK(t.at(i, j) == m.net_output(3, x));
      }
    }
  }
  SUBCASE("feature-time surface") {
    const ShapeTable t = extract_shape(m, "x2", GridSpec{8, 6, 0.05});
    CHECK(t.role == NetRole::feature_time);
    for (std::size_t i = 0; i < t.axis1.size(); ++i) {
      for (std::size_t j = 0; j < t.axis2.size(); ++j) {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
        x(1) = t.axis1[i];
        CHECK(t.at(i, j) == m.net_output(1, x, t.axis2[j]));
      }
    }
  }
  SUBCASE("binary features use their two levels") {
    const ShapeTable t = extract_shape(m, "x3", GridSpec{8, 6, 0.05});
    CHECK(t.axis1 == std::vector<double>{0.0, 1.0});
  }
  SUBCASE("unknown net lists the available ones") {
    try {
      extract_shape(m, "x9");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("x1:x2") != std::string::npos);
    }
  }
}

TEST_CASE("summing shape lookups reproduces the prediction on grid nodes") {
  Rng rng(10);
  const SurvivalDataset d = reference_data(3);
  const AdditiveRiskModel m = build_model(small_config(ModelKind::na2m, 3, {{0, 1}}), d, rng);
  const GridSpec g{16, 16, 0.05};
  const ShapeTable s0 = extract_shape(m, "x1", g), s1 = extract_shape(m, "x2", g),
                   s2 = extract_shape(m, "x3", g), p = extract_shape(m, "x1:x2", g);
  for (std::size_t i : {0, 5, 15}) {
    for (std::size_t j : {1, 7, 14}) {
      const Eigen::VectorXd x = Eigen::Vector3d(p.axis1[i], p.axis2[j], s2.axis1[1]);
      const std::size_t i0 = std::find(s0.axis1.begin(), s0.axis1.end(), x(0)) - s0.axis1.begin();
      const std::size_t i1 = std::find(s1.axis1.begin(), s1.axis1.end(), x(1)) - s1.axis1.begin();
      REQUIRE(i0 < s0.axis1.size());
      REQUIRE(i1 < s1.axis1.size());
      double sum = s0.at(i0);
      sum += s1.at(i1);
      sum += s2.at(1);
      sum += p.at(i, j);
      CHECK(sum == m.predict_risk(x));
    }
  }
}

TEST_CASE("model save/load round trip") {
  Rng rng(11);
  const SurvivalDataset d = reference_data(3);
  for (ModelKind kind : {ModelKind::linear, ModelKind::nam, ModelKind::timena2m}) {
    AdditiveRiskModel m =
        build_model(small_config(kind, 3, has_pairs(kind) ? std::vector<FeaturePair>{{1, 2}} : std::vector<FeaturePair>{}),
                    d, rng);
    m.fit_centering(d);
    std::stringstream buf;
    save_model(m, buf);
    const AdditiveRiskModel back = load_model(buf);
    CHECK(back.config == m.config);
    CHECK(back.parameters == m.parameters);
    CHECK(back.standardizer == m.standardizer);
    CHECK(back.centering == m.centering);
    CHECK(back.features == m.features);
    const Eigen::VectorXd x = d.features.row(2).transpose();
    if (is_time_varying(kind)) {
      CHECK(back.predict_risk_at_time(x, 1.5) == m.predict_risk_at_time(x, 1.5));
    } else {
      CHECK(back.predict_risk(x) == m.predict_risk(x));
    }
  }
  std::istringstream junk("{\"format\": \"something-else\"}");
  CHECK_THROWS_AS(load_model(junk), DataError);
}
