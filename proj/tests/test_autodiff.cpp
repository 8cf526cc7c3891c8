#include <doctest.h>

#include <cmath>

#include "addhaz/autodiff.hpp"
#include "addhaz/errors.hpp"
#include "addhaz/kernels.hpp"
#include "addhaz/nn.hpp"
#include "gradcheck.hpp"

using namespace addhaz;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

DenseLayer fixed_layer(ad::ParameterStore& store, const MatrixXd& w, const MatrixXd& b, Activation a) {
  DenseLayer l;
  l.activation = a;
  l.weight = store.add("w", w);
  l.bias = store.add("b", b);
  l.in = w.cols();
  l.out = w.rows();
  return l;
}

}  // namespace

TEST_CASE("forward_dense on identity weights") {
  ad::ParameterStore store;
  MatrixXd x(1, 2);
  x << 3, -2;
  const DenseLayer id = fixed_layer(store, MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 1), Activation::identity);
  CHECK(forward_dense(store, id, x) == x);

  const DenseLayer relu = fixed_layer(store, MatrixXd::Identity(1, 1), MatrixXd::Zero(1, 1), Activation::relu);
  CHECK(forward_dense(store, relu, MatrixXd::Constant(1, 1, -1.0))(0, 0) == 0.0);

  const DenseLayer sig = fixed_layer(store, MatrixXd::Identity(1, 1), MatrixXd::Zero(1, 1), Activation::sigmoid);
  CHECK(forward_dense(store, sig, MatrixXd::Zero(1, 1))(0, 0) == 0.5);
}

TEST_CASE("forward_dense rejects a width mismatch") {
  ad::ParameterStore store;
  const DenseLayer l = fixed_layer(store, MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 1), Activation::identity);
  CHECK_THROWS_AS(forward_dense(store, l, MatrixXd::Zero(1, 3)), ShapeError);
}

TEST_CASE("apply_exu clips to the unit interval") {
  const VectorXd zero = VectorXd::Zero(1);
  CHECK(apply_exu(zero, zero, VectorXd::Constant(1, 0.5))(0) == 0.5);
  CHECK(apply_exu(zero, zero, VectorXd::Constant(1, -1.0))(0) == 0.0);
  CHECK(apply_exu(zero, zero, VectorXd::Constant(1, 2.0))(0) == 1.0);
  CHECK_THROWS_AS(apply_exu(VectorXd::Zero(2), zero, zero), ShapeError);
}

TEST_CASE("backward on scalar functions") {
  SUBCASE("x squared") {
    ad::ParameterStore store;
    const ad::ParamId x = store.add("x", MatrixXd::Constant(1, 1, 3.0));
    ad::Tape tape;
    const ad::Var v = tape.parameter(store, x);
    const ad::Gradients g = tape.backward(ad::mul(v, v), store);
    CHECK(g[0](0, 0) == doctest::Approx(6.0).epsilon(1e-15));
  }
  SUBCASE("sigmoid at zero") {
    ad::ParameterStore store;
    const ad::ParamId w = store.add("w", MatrixXd::Zero(1, 1));
    ad::Tape tape;
    const ad::Var one = tape.constant(MatrixXd::Ones(1, 1));
    const ad::Var y = ad::sigmoid(ad::mul(tape.parameter(store, w), one));
    CHECK(tape.backward(y, store)[0](0, 0) == doctest::Approx(0.25).epsilon(1e-15));
  }
}

TEST_CASE("backward gives zero to unreachable parameters and rejects non-scalar roots") {
  ad::ParameterStore store;
  const ad::ParamId a = store.add("a", MatrixXd::Constant(2, 1, 1.5));
  store.add("unused", MatrixXd::Constant(3, 2, 7.0));
  ad::Tape tape;
  const ad::Var v = tape.parameter(store, a);
  const ad::Gradients g = tape.backward(ad::sum(v), store);
  CHECK(g[1] == MatrixXd::Zero(3, 2));
  CHECK(g[0] == MatrixXd::Ones(2, 1));
  CHECK_THROWS_AS(tape.backward(v, store), ContractError);
}

TEST_CASE("backward visits nodes in reverse recording order") {
  ad::ParameterStore store;
  const ad::ParamId a = store.add("a", MatrixXd::Constant(1, 1, 2.0));
  ad::Tape tape;
  const ad::Var x = tape.parameter(store, a);
  const ad::Var y = ad::relu(ad::scale(x, 3.0));
  const ad::Var z = ad::sum_squares(y);
  tape.backward(z, store);
  const std::vector<int>& order = tape.last_backward_order();
  REQUIRE(order.size() == 4);
  CHECK(std::is_sorted(order.rbegin(), order.rend()));
  CHECK(order.front() == z.id());
}

TEST_CASE("replay reproduces recorded values") {
  Rng rng(3);
  ad::ParameterStore store;
  const std::vector<InputRange> ranges{{-2, 2}};
  const FeatureNet net = FeatureNet::build(store, "f", 1, {8, 4}, Activation::exu, ranges, rng);
  MatrixXd x(5, 1);
  x << -1, -0.5, 0, 0.5, 1;
  ad::Tape tape;
  const ad::Var out = net.forward(tape, store, x, 0.3, &rng);
  ad::sum_squares(out);
  CHECK(tape.replay());
}

TEST_CASE("eval-mode forward passes are pure") {
  Rng rng(4);
  ad::ParameterStore store;
  const std::vector<InputRange> ranges{{-1, 1}, {-1, 1}};
  const FeatureNet net = FeatureNet::build(store, "f", 2, {16, 8}, Activation::relu, ranges, rng);
  const MatrixXd x = MatrixXd::Random(20, 2);
  ad::Tape t1, t2;
  CHECK(net.forward(t1, store, x, 0.0, nullptr).value() == net.forward(t2, store, x, 0.0, nullptr).value());
  CHECK(net.forward(store, x) == net.forward(store, x));
}

TEST_CASE("gradients match central differences on random nets") {
  Rng rng(20240611);
  double worst = 0.0;
  for (int trial = 0; trial < 40; ++trial) worst = std::max(worst, testing::random_net_gradient_error(rng));
  CHECK(worst < 1e-4);
}

TEST_CASE("adam_step decay and direction") {
  ad::ParameterStore store;
  store.add("p", MatrixXd::Constant(2, 2, 1.0));
  const ad::Gradients zero{MatrixXd::Zero(2, 2)};

  SUBCASE("zero gradient without decay leaves parameters unchanged") {
    AdamState s(store, AdamSettings{0.01, 0.9, 0.999, 1e-8, 0.0});
    adam_step(s, store, zero);
    CHECK(store.value(0) == MatrixXd::Constant(2, 2, 1.0));
  }
  SUBCASE("zero gradient with decay shrinks by 1 - lr * lambda") {
    AdamState s(store, AdamSettings{0.01, 0.9, 0.999, 1e-8, 0.5});
    adam_step(s, store, zero);
    CHECK(store.value(0)(0, 0) == doctest::Approx(1.0 - 0.01 * 0.5).epsilon(1e-15));
  }
  SUBCASE("constant gradient moves against its sign") {
    AdamState s(store, AdamSettings{0.01, 0.9, 0.999, 1e-8, 0.0});
    MatrixXd g(2, 2);
    g << 1, -1, 2, -3;
    double prev_a = store.value(0)(0, 0), prev_b = store.value(0)(0, 1);
    for (int i = 0; i < 20; ++i) {
      adam_step(s, store, {g});
      CHECK(store.value(0)(0, 0) < prev_a);
      CHECK(store.value(0)(0, 1) > prev_b);
      prev_a = store.value(0)(0, 0);
      prev_b = store.value(0)(0, 1);
    }
  }
  SUBCASE("non-finite gradient names the parameter") {
    AdamState s(store, AdamSettings{});
    const ad::Gradients bad{MatrixXd::Constant(2, 2, std::nan(""))};
    try {
      adam_step(s, store, bad);
      FAIL("expected TrainingError");
    } catch (const TrainingError& e) {
      CHECK(std::string(e.what()).find("p") != std::string::npos);
    }
  }
}

TEST_CASE("dropout") {
  Rng rng(11);
  const VectorXd x = VectorXd::LinSpaced(10, -1, 1);
  CHECK(dropout(x, 0.0, Mode::train, rng) == x);
  CHECK(dropout(x, 0.5, Mode::eval, rng) == x);
  CHECK_THROWS_AS(dropout(x, 1.0, Mode::train, rng), ConfigError);
  const VectorXd ones = VectorXd::Ones(100000);
  CHECK(dropout(ones, 0.5, Mode::train, rng).mean() == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("row-invariant affine kernel") {
  Rng rng(5);
  std::normal_distribution<double> normal;
  MatrixXd x(700, 6), w(5, 6);
  VectorXd b(5);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = normal(rng);
  const MatrixXd all = kernels::affine(x, w, b);
  for (Eigen::Index r : {0, 255, 256, 511, 699}) {
    CHECK(kernels::affine(x.row(r), w, b) == all.row(r));
  }
}
