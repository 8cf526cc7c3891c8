#include "addhaz/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "addhaz/errors.hpp"
#include "addhaz/random.hpp"

namespace addhaz {

std::string to_string(FeatureKind k) { return k == FeatureKind::binary ? "binary" : "continuous"; }

SurvivalDataset SurvivalDataset::subset(std::span<const Index> rows) const {
  SurvivalDataset out;
  out.names = names;
  out.kinds = kinds;
  const Index n = static_cast<Index>(rows.size());
  out.features.resize(n, features.cols());
  out.durations.resize(n);
  out.events.resize(n);
  for (Index r = 0; r < n; ++r) {
    const Index src = rows[r];
    if (src < 0 || src >= this->rows()) throw ShapeError("subset: row index out of range");
    out.features.row(r) = features.row(src);
    out.durations(r) = durations(src);
    out.events(r) = events(src);
  }
  return out;
}

void SurvivalDataset::validate() const {
  const Index n = rows();
  if (durations.size() != n || events.size() != n) {
    throw DataError("dataset columns have inconsistent lengths");
  }
  if (static_cast<Index>(names.size()) != n_features() ||
      static_cast<Index>(kinds.size()) != n_features()) {
    throw DataError("dataset feature metadata does not match the feature matrix");
  }
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < n_features(); ++c) {
      if (!std::isfinite(features(r, c))) {
        throw DataError("missing or non-finite value at row " + std::to_string(r + 1) +
                        ", column '" + names[c] + "'");
      }
    }
    if (!std::isfinite(durations(r)) || durations(r) < 0.0) {
      throw DataError("invalid duration at row " + std::to_string(r + 1));
    }
    if (events(r) != 0 && events(r) != 1) {
      throw DataError("event flag outside {0,1} at row " + std::to_string(r + 1));
    }
  }
  if (event_count() == 0) throw DataError("dataset contains no event rows");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  if (quoted) throw DataError("unterminated quoted field on line " + std::to_string(line_no));
  fields.push_back(std::move(field));
  return fields;
}

double parse_cell(const std::string& cell, std::size_t line_no, const std::string& column) {
  auto first = cell.data();
  auto last = cell.data() + cell.size();
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\t')) --last;
  const std::string where = " at row " + std::to_string(line_no - 1) + ", column '" + column + "'";
  if (first == last) throw DataError("missing value" + where);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw DataError("non-numeric value '" + std::string(first, last) + "'" + where);
  }
  if (!std::isfinite(v)) throw DataError("missing value" + where);
  return v;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string quote_csv(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

SurvivalDataset read_csv(std::istream& in, const CsvSchema& schema, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    header = split_csv_line(line, line_no);
    break;
  }
  if (header.empty()) throw DataError(source + ": no header row");

  auto find_column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(source + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t dur_col = find_column(schema.duration_column);
  const std::size_t evt_col = find_column(schema.event_column);

  std::vector<std::size_t> feature_cols;
  SurvivalDataset data;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == dur_col || c == evt_col) continue;
    feature_cols.push_back(c);
    data.names.push_back(header[c]);
  }

  std::vector<std::vector<double>> rows;
  std::vector<double> durations;
  std::vector<int> events;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_csv_line(line, line_no);
    if (fields.size() != header.size()) {
      throw DataError(source + ": row " + std::to_string(line_no - 1) + " has " +
                      std::to_string(fields.size()) + " fields, header has " +
                      std::to_string(header.size()));
    }
    std::vector<double> row;
    row.reserve(feature_cols.size());
    for (std::size_t c : feature_cols) row.push_back(parse_cell(fields[c], line_no, header[c]));
    const double d = parse_cell(fields[dur_col], line_no, header[dur_col]);
    if (d < 0.0) {
      throw DataError(source + ": negative duration at row " + std::to_string(line_no - 1));
    }
    const double e = parse_cell(fields[evt_col], line_no, header[evt_col]);
    if (e != 0.0 && e != 1.0) {
      throw DataError(source + ": event value " + format_double(e) + " at row " +
                      std::to_string(line_no - 1) + " is not 0 or 1");
    }
    rows.push_back(std::move(row));
    durations.push_back(d);
    events.push_back(static_cast<int>(e));
  }

  const Index n = static_cast<Index>(rows.size());
  const Index k = static_cast<Index>(feature_cols.size());
  data.features.resize(n, k);
  data.durations.resize(n);
  data.events.resize(n);
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < k; ++c) data.features(r, c) = rows[r][c];
    data.durations(r) = durations[r];
    data.events(r) = events[r];
  }
  for (Index c = 0; c < k; ++c) {
    const auto it = schema.kind_overrides.find(data.names[c]);
    if (it != schema.kind_overrides.end()) {
      data.kinds.push_back(it->second);
      continue;
    }
    std::set<double> distinct;
    for (Index r = 0; r < n && distinct.size() <= 2; ++r) distinct.insert(data.features(r, c));
    data.kinds.push_back(distinct.size() <= 2 ? FeatureKind::binary : FeatureKind::continuous);
  }
  if (n == 0) throw DataError(source + ": no data rows");
  if (data.event_count() == 0) throw DataError(source + ": dataset contains no event rows");
  return data;
}

SurvivalDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_csv(in, schema, path.string());
}

void write_csv(const SurvivalDataset& data, std::ostream& out, const CsvSchema& schema) {
  for (const std::string& name : data.names) out << quote_csv(name) << ',';
  out << quote_csv(schema.duration_column) << ',' << quote_csv(schema.event_column) << '\n';
  for (Index r = 0; r < data.rows(); ++r) {
    for (Index c = 0; c < data.n_features(); ++c) out << format_double(data.features(r, c)) << ',';
    out << format_double(data.durations(r)) << ',' << data.events(r) << '\n';
  }
}

Eigen::MatrixXd Standardizer::transform(const Eigen::MatrixXd& x) const {
  if (x.cols() != mean.size()) {
    throw ShapeError("Standardizer: expected " + std::to_string(mean.size()) + " columns, got " +
                     std::to_string(x.cols()));
  }
  Eigen::MatrixXd z(x.rows(), x.cols());
  for (Index c = 0; c < x.cols(); ++c) {
    for (Index r = 0; r < x.rows(); ++r) z(r, c) = (x(r, c) - mean(c)) / scale(c);
  }
  return z;
}

Eigen::VectorXd Standardizer::transform_time(const Eigen::VectorXd& t) const {
  Eigen::VectorXd z(t.size());
  for (Index i = 0; i < t.size(); ++i) z(i) = transform_time(t(i));
  return z;
}

namespace {

std::pair<double, double> mean_and_population_std(const Eigen::VectorXd& v) {
  const double m = v.mean();
  const double var = (v.array() - m).square().mean();
  return {m, std::sqrt(var)};
}

}  // namespace

Standardizer fit_standardizer(const SurvivalDataset& train) {
  if (train.rows() == 0) throw DataError("cannot standardize an empty training set");
  Standardizer s;
  const Index k = train.n_features();
  s.mean = Eigen::VectorXd::Zero(k);
  s.scale = Eigen::VectorXd::Ones(k);
  for (Index c = 0; c < k; ++c) {
    if (train.kinds[c] == FeatureKind::binary) continue;
    const auto [m, sd] = mean_and_population_std(train.features.col(c));
    s.mean(c) = m;
    if (sd > 0.0) {
      s.scale(c) = sd;
    } else {
      s.warnings.push_back("feature '" + train.names[c] + "' has zero variance; centered only");
    }
  }
  const auto [tm, tsd] = mean_and_population_std(train.durations);
  s.duration_mean = tm;
  s.duration_scale = tsd > 0.0 ? tsd : 1.0;
  return s;
}

std::pair<std::vector<StandardizedDataset>, Standardizer> standardize(
    const SurvivalDataset& train, std::span<const SurvivalDataset> apply_to) {
  Standardizer s = fit_standardizer(train);
  std::vector<StandardizedDataset> out;
  for (const SurvivalDataset& d : apply_to) {
    StandardizedDataset sd{d, s.transform_time(d.durations)};
    sd.data.features = s.transform(d.features);
    out.push_back(std::move(sd));
  }
  return {std::move(out), std::move(s)};
}

std::vector<Index> canonical_order(const SurvivalDataset& data) {
  std::vector<Index> order(static_cast<std::size_t>(data.rows()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (data.events(a) != data.events(b)) return data.events(a) < data.events(b);
    if (data.durations(a) != data.durations(b)) return data.durations(a) < data.durations(b);
    for (Index c = 0; c < data.n_features(); ++c) {
      if (data.features(a, c) != data.features(b, c)) return data.features(a, c) < data.features(b, c);
    }
    return false;
  });
  return order;
}

std::vector<Index> FoldPlan::test_rows(int fold) const {
  std::vector<Index> rows;
  for (Index r : order) {
    if (fold_of_row[r] == fold) rows.push_back(r);
  }
  return rows;
}

std::vector<Index> FoldPlan::train_rows(int fold) const {
  std::vector<Index> rows;
  for (Index r : order) {
    if (fold_of_row[r] != fold) rows.push_back(r);
  }
  return rows;
}

FoldPlan stratified_kfold(const SurvivalDataset& data, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("k-fold needs k >= 2, got " + std::to_string(k));
  if (data.event_count() < k) {
    throw DataError("fewer events (" + std::to_string(data.event_count()) + ") than folds (" +
                    std::to_string(k) + ")");
  }
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.order = canonical_order(data);
  plan.fold_of_row.assign(static_cast<std::size_t>(data.rows()), -1);

  std::vector<Index> events, censored;
  for (Index r : plan.order) (data.events(r) == 1 ? events : censored).push_back(r);
  Rng rng = seeded_rng(seed, 0x6b666f6c64ULL);
  std::shuffle(events.begin(), events.end(), rng);
  std::shuffle(censored.begin(), censored.end(), rng);
  std::size_t slot = 0;
  for (Index r : events) plan.fold_of_row[r] = static_cast<int>(slot++ % k);
  for (Index r : censored) plan.fold_of_row[r] = static_cast<int>(slot++ % k);
  return plan;
}

std::pair<std::vector<Index>, std::vector<Index>> stratified_holdout(
    const SurvivalDataset& data, std::span<const Index> rows, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw ConfigError("holdout fraction must lie in [0, 1)");
  }
  std::vector<std::size_t> events, censored;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    (data.events(rows[i]) == 1 ? events : censored).push_back(i);
  }
  Rng rng = seeded_rng(seed, 0x686f6c64ULL);
  std::vector<char> held(rows.size(), 0);
  for (auto* group : {&events, &censored}) {
    std::shuffle(group->begin(), group->end(), rng);
    const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(group->size())));
    for (std::size_t i = 0; i < take; ++i) held[(*group)[i]] = 1;
  }
  std::pair<std::vector<Index>, std::vector<Index>> out;
  for (std::size_t i = 0; i < rows.size(); ++i) (held[i] ? out.second : out.first).push_back(rows[i]);
  return out;
}

}  // namespace addhaz
