#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "addhaz/errors.hpp"
#include "addhaz/metrics.hpp"
#include "addhaz/pair_selection.hpp"
#include "support.hpp"

using namespace addhaz;
using Eigen::VectorXd;

namespace {

int rank_of(const PairRanking& r, FeaturePair p) {
  for (std::size_t i = 0; i < r.scores.size(); ++i) {
    if (r.scores[i].pair == p) return static_cast<int>(i);
  }
  return -1;
}

double strength_of(const PairRanking& r, FeaturePair p) { return r.scores.at(rank_of(r, p)).strength; }

/// RSS of least squares of y on the columns of X.
double rss(const Eigen::MatrixXd& X, const VectorXd& y) {
  const VectorXd beta = X.completeOrthogonalDecomposition().solve(y);
  return (y - X * beta).squaredNorm();
}

/// Best RSS reduction of the 2x2 interaction indicator over the additive
/// cut model, searched over the same candidate cuts by ordinary least squares.
double ols_strength(const VectorXd& y, const VectorXd& a, const VectorXd& b, int bins) {
  double best = 0.0;
  for (double ca : bin_edges(a, bins)) {
    for (double cb : bin_edges(b, bins)) {
      const Index n = y.size();
      Eigen::MatrixXd additive(n, 3), full(n, 4);
      int counts[2][2] = {{0, 0}, {0, 0}};
      for (Index r = 0; r < n; ++r) {
        const int ha = a(r) < ca ? 0 : 1;
        const int hb = b(r) < cb ? 0 : 1;
        ++counts[ha][hb];
        additive.row(r) << 1.0, ha, hb;
        full.row(r) << 1.0, ha, hb, ha * hb;
      }
      if (!counts[0][0] || !counts[0][1] || !counts[1][0] || !counts[1][1]) continue;
      best = std::max(best, rss(additive, y) - rss(full, y));
    }
  }
  return best;
}

}  // namespace

TEST_CASE("martingale residuals") {
  const VectorXd T = Eigen::Vector3d(1, 2, 3);
  const Eigen::VectorXi E = Eigen::Vector3i(1, 1, 1);
  const BaselineHazard b = breslow_baseline(VectorXd::Zero(3), T, E);
  const VectorXd m = martingale_residuals(VectorXd::Zero(3), T, E, b);
  CHECK(m(0) == doctest::Approx(1 - 1.0 / 3));
  CHECK(m(1) == doctest::Approx(1 - 5.0 / 6));
  CHECK(m(2) == doctest::Approx(1 - 11.0 / 6));

  const VectorXd early = martingale_residuals(VectorXd::Constant(1, 2.0), VectorXd::Constant(1, 0.5),
                                              Eigen::VectorXi::Zero(1), b);
  CHECK(early(0) == 0.0);
}

TEST_CASE("martingale residuals sum to zero against their own baseline") {
  Rng rng(51);
  testing::SyntheticSpec spec;
  spec.rows = 80;
  spec.censor_rate = 0.0;
  spec.beta = {1.0, 0.5};
  const SurvivalDataset d = testing::synthetic_survival(spec, rng);
  const VectorXd h = d.features.col(0) + 0.5 * d.features.col(1);
  const BaselineHazard b = breslow_baseline(h, d.durations, d.events);
  CHECK(std::abs(martingale_residuals(h, d.durations, d.events, b).sum()) < 1e-8);
}

TEST_CASE("bin edges") {
  const VectorXd v = VectorXd::LinSpaced(100, 0, 99);
  const std::vector<double> e = bin_edges(v, 4);
  CHECK(e.size() == 3);
  CHECK(std::is_sorted(e.begin(), e.end()));
  const VectorXd binary = (VectorXd(6) << 0, 0, 0, 0, 0, 1).finished();
  CHECK(bin_edges(binary, 32) == std::vector<double>{1.0});
  CHECK(bin_edges(VectorXd::Constant(5, 2.0), 8).empty());
}

TEST_CASE("zero residuals give zero strength") {
  const auto [d, residual] = testing::planted_interaction(300, 4, 1);
  const PairRanking r = fast_rank_pairs(VectorXd::Zero(300), d);
  CHECK(r.scores.size() == 6);
  for (const PairScore& s : r.scores) CHECK(s.strength == 0.0);
}

TEST_CASE("strength equals the least-squares interaction gain") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto [d, residual] = testing::planted_interaction(150, 3, seed);
    const PairRanking r = fast_rank_pairs(residual, d, 6);
    for (const PairScore& s : r.scores) {
      const double oracle =
          ols_strength(residual, d.features.col(s.pair.i), d.features.col(s.pair.j), 6);
      CHECK(s.strength == doctest::Approx(oracle).epsilon(1e-8));
    }
  }
}

TEST_CASE("planted interaction ranks first") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto [d, residual] = testing::planted_interaction(2000, 6, seed);
    const PairRanking r = fast_rank_pairs(residual, d);
    CHECK(r.scores.front().pair == FeaturePair{0, 1});
  }
}

TEST_CASE("additive residuals look like noise") {
  auto [d, residual] = testing::planted_interaction(1000, 4, 3);
  Rng rng(4);
  std::normal_distribution<double> normal;
  for (Index r = 0; r < d.rows(); ++r) {
    residual(r) = d.features(r, 0) * d.features(r, 0) + std::sin(2.0 * d.features(r, 1)) + normal(rng);
  }
  const double observed = strength_of(fast_rank_pairs(residual, d, 32, {{0, 1}}), {0, 1});
  std::vector<double> null;
  VectorXd shuffled = residual;
  for (int p = 0; p < 100; ++p) {
    std::shuffle(shuffled.data(), shuffled.data() + shuffled.size(), rng);
    null.push_back(strength_of(fast_rank_pairs(shuffled, d, 32, {{0, 1}}), {0, 1}));
  }
  std::sort(null.begin(), null.end());
  CHECK(observed <= null[98]);
}

TEST_CASE("ranking invariances") {
  const auto [d, residual] = testing::planted_interaction(500, 4, 9);
  const PairRanking base = fast_rank_pairs(residual, d);

  SUBCASE("row permutation") {
    std::vector<Index> perm(static_cast<std::size_t>(d.rows()));
    std::iota(perm.begin(), perm.end(), Index{0});
    Rng rng(1);
    std::shuffle(perm.begin(), perm.end(), rng);
    const SurvivalDataset pd = d.subset(perm);
    VectorXd pr(d.rows());
    for (std::size_t i = 0; i < perm.size(); ++i) pr(static_cast<Index>(i)) = residual(perm[i]);
    const PairRanking p = fast_rank_pairs(pr, pd);
    REQUIRE(p.scores.size() == base.scores.size());
    for (std::size_t i = 0; i < p.scores.size(); ++i) {
      CHECK(p.scores[i].pair == base.scores[i].pair);
      CHECK(p.scores[i].strength == base.scores[i].strength);
    }
  }
  SUBCASE("positive affine rescaling") {
    const PairRanking s = fast_rank_pairs(VectorXd(3.0 * residual.array() + 5.0), d);
    for (std::size_t i = 0; i < s.scores.size(); ++i) {
      CHECK(s.scores[i].pair == base.scores[i].pair);
      CHECK(s.scores[i].strength == doctest::Approx(9.0 * base.scores[i].strength).epsilon(1e-9));
    }
  }
}

TEST_CASE("larger planted amplitude never lowers the rank") {
  auto [d, residual] = testing::planted_interaction(1000, 5, 21);
  Rng rng(22);
  std::normal_distribution<double> normal;
  VectorXd noise(d.rows());
  for (Index r = 0; r < d.rows(); ++r) noise(r) = 2.0 * normal(rng) + 0.3 * d.features(r, 2) * d.features(r, 3);
  int previous = 1000;
  for (double amp : {0.0, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6}) {
    const VectorXd y = noise + amp * d.features.col(0).cwiseProduct(d.features.col(1));
    const int rank = rank_of(fast_rank_pairs(y, d), {0, 1});
    CHECK(rank <= previous);
    previous = rank;
  }
  CHECK(previous == 0);
}

TEST_CASE("constant features are skipped with a warning") {
  auto [d, residual] = testing::planted_interaction(100, 3, 2);
  d.features.col(2).setConstant(1.0);
  const PairRanking r = fast_rank_pairs(residual, d);
  CHECK(r.scores.size() == 1);
  CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("candidates, top pairs and parsing") {
  const auto [d, residual] = testing::planted_interaction(400, 4, 5);
  const PairRanking r = fast_rank_pairs(residual, d, 32, {{2, 3}, {1, 3}});
  CHECK(r.scores.size() == 2);
  CHECK(top_pairs(fast_rank_pairs(residual, d), 0).empty());
  CHECK(top_pairs(fast_rank_pairs(residual, d), 2).size() == 2);
  CHECK(top_pairs(fast_rank_pairs(VectorXd::Zero(400), d), 5).empty());

  const std::vector<std::string> names{"age", "sex", "hp", "bmi"};
  CHECK(parse_pairs("age:sex,hp:age", names) == std::vector<FeaturePair>{{0, 1}, {0, 2}});
  CHECK(parse_pairs("3:1", names) == std::vector<FeaturePair>{{1, 3}});
  CHECK_THROWS_AS(parse_pairs("age:weight", names), ConfigError);
  CHECK_THROWS_AS(parse_pairs("age:sex,sex:age", names), ConfigError);
  CHECK_THROWS_AS(parse_pairs("age:age", names), ConfigError);
}
