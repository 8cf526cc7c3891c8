#include "addhaz/pair_selection.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <set>

#include "addhaz/errors.hpp"

namespace addhaz {

Eigen::VectorXd martingale_residuals(const AdditiveRiskModel& model, const BaselineHazard& baseline,
                                     const SurvivalDataset& data) {
  return martingale_residuals(model.predict_risk(data.features), data.durations, data.events, baseline);
}

std::vector<FeaturePair> all_pairs(int n_features) {
  std::vector<FeaturePair> pairs;
  for (int i = 0; i < n_features; ++i) {
    for (int j = i + 1; j < n_features; ++j) pairs.push_back({i, j});
  }
  return pairs;
}

std::vector<double> bin_edges(const Eigen::VectorXd& column, int bins) {
  if (bins < 2) throw ConfigError("bins must be at least 2");
  std::vector<double> sorted(column.data(), column.data() + column.size());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> edges;
  const std::size_t n = sorted.size();
  for (int b = 1; b < bins; ++b) {
    const double v = sorted[n * static_cast<std::size_t>(b) / static_cast<std::size_t>(bins)];
    if (v > sorted.front() && (edges.empty() || v > edges.back())) edges.push_back(v);
  }
  // A rare second level can fall between quantiles; keep the column split.
  if (edges.empty() && n > 0 && sorted.back() > sorted.front()) {
    edges.push_back(*std::upper_bound(sorted.begin(), sorted.end(), sorted.front()));
  }
  return edges;
}

namespace {

struct Binned {
  std::vector<int> bin;
  std::vector<double> edges;
  int count = 0;
};

Binned bin_column(const Eigen::VectorXd& column, int bins) {
  Binned b;
  b.edges = bin_edges(column, bins);
  b.count = static_cast<int>(b.edges.size()) + 1;
  b.bin.resize(static_cast<std::size_t>(column.size()));
  for (Index r = 0; r < column.size(); ++r) {
    b.bin[r] = static_cast<int>(std::upper_bound(b.edges.begin(), b.edges.end(), column(r)) -
                                b.edges.begin());
  }
  return b;
}

}  // namespace

PairRanking fast_rank_pairs(const Eigen::VectorXd& residuals, const SurvivalDataset& data, int bins,
                            std::vector<FeaturePair> candidates) {
  if (residuals.size() != data.rows()) {
    throw ShapeError("fast_rank_pairs: " + std::to_string(residuals.size()) + " residuals for " +
                     std::to_string(data.rows()) + " rows");
  }
  if (bins < 2) throw ConfigError("bins must be at least 2");
  const auto k = static_cast<int>(data.n_features());
  if (candidates.empty()) candidates = all_pairs(k);

  // Sums are accumulated in residual order so row order cannot change them.
  std::vector<Index> order(static_cast<std::size_t>(data.rows()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return residuals(a) < residuals(b); });

  std::vector<Binned> binned(static_cast<std::size_t>(k));
  std::vector<char> ready(static_cast<std::size_t>(k), 0);
  PairRanking out;
  std::set<int> warned;
  for (FeaturePair p : candidates) {
    if (p.i > p.j) std::swap(p.i, p.j);
    if (p.i < 0 || p.j >= k || p.i == p.j) {
      throw ConfigError("candidate pair (" + std::to_string(p.i) + "," + std::to_string(p.j) +
                        ") is invalid for " + std::to_string(k) + " features");
    }
    for (int f : {p.i, p.j}) {
      if (!ready[f]) {
        binned[f] = bin_column(data.features.col(f), bins);
        ready[f] = 1;
      }
    }
    const Binned& a = binned[p.i];
    const Binned& b = binned[p.j];
    bool skip = false;
    for (int f : {p.i, p.j}) {
      if (binned[f].count < 2) {
        if (warned.insert(f).second) {
          out.warnings.push_back("feature '" + data.names[f] + "' is constant; its pairs are skipped");
        }
        skip = true;
      }
    }
    if (skip) continue;

    const int na = a.count;
    const int nb = b.count;
    // Cumulative (count, sum) over bins [0, i) x [0, j).
    std::vector<double> cnt(static_cast<std::size_t>((na + 1) * (nb + 1)), 0.0);
    std::vector<double> sum(cnt.size(), 0.0);
    auto at = [nb](int i, int j) { return static_cast<std::size_t>(i * (nb + 1) + j); };
    for (Index r : order) {
      cnt[at(a.bin[r] + 1, b.bin[r] + 1)] += 1.0;
      sum[at(a.bin[r] + 1, b.bin[r] + 1)] += residuals(r);
    }
    for (int i = 1; i <= na; ++i) {
      for (int j = 1; j <= nb; ++j) {
        cnt[at(i, j)] += cnt[at(i - 1, j)] + cnt[at(i, j - 1)] - cnt[at(i - 1, j - 1)];
        sum[at(i, j)] += sum[at(i - 1, j)] + sum[at(i, j - 1)] - sum[at(i - 1, j - 1)];
      }
    }
    PairScore best{p, 0.0, a.edges.front(), b.edges.front()};
    for (int ca = 1; ca < na; ++ca) {
      for (int cb = 1; cb < nb; ++cb) {
        const double n00 = cnt[at(ca, cb)];
        const double n0x = cnt[at(ca, nb)];
        const double nx0 = cnt[at(na, cb)];
        const double nall = cnt[at(na, nb)];
        const double n01 = n0x - n00;
        const double n10 = nx0 - n00;
        const double n11 = nall - n0x - nx0 + n00;
        if (n00 == 0 || n01 == 0 || n10 == 0 || n11 == 0) continue;
        const double s00 = sum[at(ca, cb)];
        const double s0x = sum[at(ca, nb)];
        const double sx0 = sum[at(na, cb)];
        const double s01 = s0x - s00;
        const double s10 = sx0 - s00;
        const double s11 = sum[at(na, nb)] - s0x - sx0 + s00;
        const double contrast = s11 / n11 - s10 / n10 - s01 / n01 + s00 / n00;
        const double strength =
            contrast * contrast / (1.0 / n00 + 1.0 / n01 + 1.0 / n10 + 1.0 / n11);
        if (strength > best.strength) {
          best.strength = strength;
          best.cut_i = a.edges[static_cast<std::size_t>(ca - 1)];
          best.cut_j = b.edges[static_cast<std::size_t>(cb - 1)];
        }
      }
    }
    out.scores.push_back(best);
  }
  std::stable_sort(out.scores.begin(), out.scores.end(), [](const PairScore& x, const PairScore& y) {
    if (x.strength != y.strength) return x.strength > y.strength;
    return x.pair < y.pair;
  });
  return out;
}

std::vector<FeaturePair> top_pairs(const PairRanking& ranking, int max_pairs) {
  std::vector<FeaturePair> pairs;
  for (const PairScore& s : ranking.scores) {
    if (static_cast<int>(pairs.size()) >= max_pairs) break;
    if (s.strength > 0.0) pairs.push_back(s.pair);
  }
  return pairs;
}

namespace {

int resolve_feature(std::string token, const std::vector<std::string>& names) {
  const auto first = token.find_first_not_of(" \t");
  const auto last = token.find_last_not_of(" \t");
  token = first == std::string::npos ? "" : token.substr(first, last - first + 1);
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (names[k] == token) return static_cast<int>(k);
  }
  int idx = -1;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), idx);
  if (ec == std::errc() && ptr == token.data() + token.size() && idx >= 0 &&
      idx < static_cast<int>(names.size())) {
    return idx;
  }
  throw ConfigError("unknown feature '" + token + "' in pair list");
}

}  // namespace

std::vector<FeaturePair> parse_pairs(const std::string& text, const std::vector<std::string>& names) {
  std::vector<FeaturePair> pairs;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    pos = comma + 1;
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    const std::size_t colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("pair '" + item + "' must be written a:b");
    int i = resolve_feature(item.substr(0, colon), names);
    int j = resolve_feature(item.substr(colon + 1), names);
    if (i == j) throw ConfigError("pair '" + item + "' repeats a feature");
    if (i > j) std::swap(i, j);
    const FeaturePair p{i, j};
    if (std::find(pairs.begin(), pairs.end(), p) != pairs.end()) {
      throw ConfigError("duplicate pair '" + item + "'");
    }
    pairs.push_back(p);
  }
  return pairs;
}

}  // namespace addhaz
