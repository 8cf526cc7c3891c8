// addhaz command-line interface: train, evaluate, cross-validate, select
// feature pairs, export shape functions and replay a run manifest.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "addhaz/data.hpp"
#include "addhaz/errors.hpp"
#include "addhaz/export.hpp"
#include "addhaz/harness.hpp"
#include "addhaz/metrics.hpp"
#include "addhaz/model.hpp"
#include "addhaz/pair_selection.hpp"

namespace fs = std::filesystem;
using namespace addhaz;

namespace {

constexpr const char* kToolVersion = "addhaz 0.1.0";

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kDivergence = 4 };

struct Options {
  std::string data;
  std::string model = "nam";
  std::string model_file;
  std::string preset;
  std::string config;
  std::string pairs;
  bool auto_pairs = false;
  int max_pairs = 5;
  std::string candidates;
  int k = 5;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir = ".";
  int grid_points = 0;
  std::vector<std::string> nets;
  std::string manifest;
  int threads = 1;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

SurvivalDataset load_data(const Options& o) {
  if (o.data.empty()) throw ConfigError("--data is required");
  return load_csv(o.data);
}

ModelConfig resolve_config(const Options& o, const SurvivalDataset& data) {
  ModelConfig c;
  c.kind = parse_model_kind(o.model);
  if (c.kind == ModelKind::linear) c.hidden_sizes.clear();
  if (!o.preset.empty()) c = apply_preset(c, o.preset);
  if (!o.config.empty()) c = parse_config(read_text(o.config), c);
  c.kind = parse_model_kind(o.model);
  if (c.kind == ModelKind::linear) c.hidden_sizes.clear();
  c.n_features = static_cast<int>(data.n_features());
  if (!o.pairs.empty()) c.pairs = parse_pairs(o.pairs, data.names);
  if (!has_pairs(c.kind)) c.pairs.clear();
  if (o.seed_set) c.seed = o.seed;
  if (has_pairs(c.kind) && c.pairs.empty() && !o.auto_pairs) {
    throw ConfigError("model " + to_string(c.kind) +
                      " needs feature pairs: pass --pairs, --auto-pairs, or the fragment written by "
                      "select-pairs via --config");
  }
  return c;
}

RunManifest start_manifest(const std::vector<std::string>& argv, const Options& o) {
  RunManifest m;
  m.command = argv;
  m.seed = o.seed;
  m.tool_version = kToolVersion;
  if (!o.data.empty()) {
    m.dataset_path = o.data;
    m.dataset_sha256 = file_sha256(o.data);
  }
  return m;
}

void finish_manifest(RunManifest& m, const fs::path& dir) {
  std::ofstream out(dir / "manifest.json");
  if (!out) throw DataError("cannot write manifest in " + dir.string());
  out << manifest_json(m);
}

fs::path prepare_out_dir(const Options& o) {
  fs::path dir(o.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string());
  return dir;
}

std::string report_json(const TrainReport& r) {
  nlohmann::json j{{"epochs_run", r.epochs_run},
                   {"best_epoch", r.best_epoch},
                   {"stop", to_string(r.stop)},
                   {"seconds", r.seconds},
                   {"train_loss", r.train_loss},
                   {"validation_loss", r.validation_loss}};
  j["validation_cindex"] = r.validation_cindex ? nlohmann::json(*r.validation_cindex) : nlohmann::json();
  return j.dump(2) + "\n";
}

int cmd_train(const Options& o, const std::vector<std::string>& argv) {
  const SurvivalDataset data = load_data(o);
  ModelConfig c = resolve_config(o, data);
  const std::vector<Index> rows = canonical_order(data);
  const auto [fit_rows, val_rows] =
      stratified_holdout(data, rows, c.validation_fraction, derive_seed(c.seed, 0x200));
  const SurvivalDataset fit = data.subset(fit_rows);
  const SurvivalDataset val = data.subset(val_rows);
  if (o.auto_pairs && has_pairs(c.kind)) {
    Rng pair_rng = seeded_rng(c.seed, 0x300);
    std::vector<FeaturePair> candidates;
    if (!o.candidates.empty()) candidates = parse_pairs(o.candidates, data.names);
    c.pairs = top_pairs(select_pairs(c, fit, val, pair_rng, 32, candidates), o.max_pairs);
  }
  Rng rng = seeded_rng(c.seed, 0x100);
  const TrainResult result = train(c, fit, val, rng);
  const fs::path dir = prepare_out_dir(o);
  std::ostringstream model_text;
  save_model(result.model, model_text);
  RunManifest m = start_manifest(argv, o);
  m.config = dump_config(c);
  m.seed = c.seed;
  m.artifacts.push_back(write_artifact(dir, "model.json", model_text.str()));
  m.artifacts.push_back(write_artifact(dir, "train_report.json", report_json(result.report)));
  finish_manifest(m, dir);
  std::cout << to_string(c.kind) << ": trained " << result.report.epochs_run << " epochs (best "
            << result.report.best_epoch << ", " << to_string(result.report.stop) << ")";
  if (result.report.validation_cindex) {
    std::cout << ", validation c-index " << format_double(*result.report.validation_cindex);
  }
  std::cout << "\nwrote " << (dir / "model.json").string() << "\n";
  return kOk;
}

AdditiveRiskModel load_model_flag(const Options& o) {
  if (o.model_file.empty()) throw ConfigError("--model-file is required");
  return load_model(fs::path(o.model_file));
}

int cmd_evaluate(const Options& o, const std::vector<std::string>& argv) {
  const AdditiveRiskModel model = load_model_flag(o);
  const SurvivalDataset data = load_data(o);
  if (data.names.size() != model.features.size()) {
    throw DataError("data has " + std::to_string(data.names.size()) + " features, model expects " +
                    std::to_string(model.features.size()));
  }
  if (!model.baseline) throw DataError("model file has no baseline hazard");
  nlohmann::json j{{"model", to_string(model.kind())}, {"rows", data.rows()}};
  const double td = timedep_cindex(model, *model.baseline, data);
  j["timedep_cindex"] = td;
  if (!is_time_varying(model.kind())) {
    j["harrell_cindex"] = harrell_cindex(model.predict_risk(data.features), data.durations, data.events);
  }
  const double primary = is_time_varying(model.kind()) ? td : j["harrell_cindex"].get<double>();
  j["cindex"] = primary;
  const fs::path dir = prepare_out_dir(o);
  RunManifest m = start_manifest(argv, o);
  m.config = dump_config(model.config);
  m.artifacts.push_back(write_artifact(dir, "evaluation.json", j.dump(2) + "\n"));
  finish_manifest(m, dir);
  std::cout << "c-index " << format_double(primary) << "\n";
  return kOk;
}

int cmd_cv(const Options& o, const std::vector<std::string>& argv) {
  const SurvivalDataset data = load_data(o);
  const ModelConfig c = resolve_config(o, data);
  CVOptions opts;
  opts.k = o.k;
  opts.auto_pairs = o.auto_pairs;
  opts.max_pairs = o.max_pairs;
  opts.threads = o.threads;
  if (!o.candidates.empty()) opts.candidates = parse_pairs(o.candidates, data.names);
  const CVSummary s = cross_validate(c, data, opts);
  const fs::path dir = prepare_out_dir(o);
  std::ostringstream folds, summary;
  write_cv_folds_csv(s, folds);
  write_cv_summary_csv(s, summary);
  RunManifest m = start_manifest(argv, o);
  m.config = dump_config(c);
  m.seed = c.seed;
  m.artifacts.push_back(write_artifact(dir, "cv_folds.csv", folds.str()));
  m.artifacts.push_back(write_artifact(dir, "cv_summary.csv", summary.str()));
  finish_manifest(m, dir);
  std::cout << to_string(c.kind) << " " << s.k << "-fold c-index: " << format_cindex_entry(s.mean, s.std)
            << "\n";
  return kOk;
}

int cmd_select_pairs(const Options& o, const std::vector<std::string>& argv) {
  const SurvivalDataset data = load_data(o);
  if (o.max_pairs < 0) throw ConfigError("--max-pairs must be nonnegative");
  std::vector<FeaturePair> candidates;
  if (!o.candidates.empty()) candidates = parse_pairs(o.candidates, data.names);
  PairRanking ranking;
  ModelConfig c;
  if (!o.model_file.empty()) {
    const AdditiveRiskModel model = load_model_flag(o);
    if (is_time_varying(model.kind())) throw ConfigError("first-stage model must be proportional");
    if (!model.baseline) throw DataError("model file has no baseline hazard");
    c = model.config;
    ranking = fast_rank_pairs(martingale_residuals(model, *model.baseline, data), data, 32, candidates);
  } else {
    Options first = o;
    first.model = "nam";
    first.pairs.clear();
    c = resolve_config(first, data);
    const auto [fit_rows, val_rows] =
        stratified_holdout(data, canonical_order(data), c.validation_fraction, derive_seed(c.seed, 0x200));
    const SurvivalDataset fit = data.subset(fit_rows);
    const SurvivalDataset val = data.subset(val_rows);
    Rng rng = seeded_rng(c.seed, 0x300);
    ranking = select_pairs(c, fit, val, rng, 32, candidates);
  }
  for (const std::string& w : ranking.warnings) std::cerr << "warning: " << w << "\n";
  const std::vector<FeaturePair> chosen = top_pairs(ranking, o.max_pairs);
  const fs::path dir = prepare_out_dir(o);
  std::ostringstream table;
  write_pairs_csv(ranking, data.names, table);
  RunManifest m = start_manifest(argv, o);
  m.config = dump_config(c);
  m.seed = c.seed;
  m.artifacts.push_back(write_artifact(dir, "pairs.csv", table.str()));
  m.artifacts.push_back(write_artifact(dir, "pairs.json", pairs_fragment(chosen)));
  finish_manifest(m, dir);
  for (const FeaturePair& p : chosen) std::cout << data.names[p.i] << ":" << data.names[p.j] << "\n";
  std::cout << "wrote " << (dir / "pairs.json").string() << " (" << chosen.size() << " pairs)\n";
  return kOk;
}

std::string file_stem(const std::string& net) {
  std::string s;
  for (char ch : net) {
    const bool keep = std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.';
    s += keep ? ch : '_';
  }
  return s;
}

int cmd_export_shapes(const Options& o, const std::vector<std::string>& argv) {
  const AdditiveRiskModel model = load_model_flag(o);
  GridSpec grid;
  if (o.grid_points > 0) {
    grid.points_1d = o.grid_points;
    grid.points_2d = o.grid_points;
  }
  std::vector<std::string> nets = o.nets.empty() ? model.net_names() : o.nets;
  std::vector<ShapeTable> tables;
  for (const std::string& n : nets) tables.push_back(extract_shape(model, n, grid));
  const fs::path dir = prepare_out_dir(o);
  RunManifest m = start_manifest(argv, o);
  m.config = dump_config(model.config);
  m.seed = model.config.seed;
  for (const ShapeTable& t : tables) {
    std::ostringstream csv;
    write_shape_csv(t, csv);
    const std::string stem = "shape_" + file_stem(t.net);
    m.artifacts.push_back(write_artifact(dir, stem + ".csv", csv.str()));
    m.artifacts.push_back(write_artifact(dir, stem + ".svg", shape_svg(t)));
  }
  m.artifacts.push_back(write_artifact(dir, "shapes_grid.svg", shape_grid_svg(tables)));
  finish_manifest(m, dir);
  std::cout << "exported " << tables.size() << " nets to " << dir.string() << "\n";
  return kOk;
}

int run(std::vector<std::string> argv);

int cmd_replay(const Options& o) {
  if (o.manifest.empty()) throw ConfigError("--manifest is required");
  const RunManifest m = parse_manifest(read_text(o.manifest));
  const fs::path original_dir = fs::path(o.manifest).parent_path();
  const fs::path scratch = fs::temp_directory_path() /
                           ("addhaz-replay-" + std::to_string(std::chrono::steady_clock::now()
                                                                  .time_since_epoch()
                                                                  .count()));
  std::vector<std::string> argv;
  for (std::size_t i = 0; i < m.command.size(); ++i) {
    if (m.command[i] == "--out-dir" && i + 1 < m.command.size()) {
      ++i;
      continue;
    }
    if (m.command[i].rfind("--out-dir=", 0) == 0) continue;
    argv.push_back(m.command[i]);
  }
  argv.push_back("--out-dir");
  argv.push_back(scratch.string());
  const int code = run(argv);
  if (code != kOk) return code;
  int mismatches = 0;
  for (const ManifestArtifact& a : m.artifacts) {
    if (fs::path(a.path).extension() != ".csv") continue;
    const std::string again = file_sha256(scratch / a.path);
    const bool same = again == a.sha256;
    std::cout << (same ? "match    " : "MISMATCH ") << a.path << "\n";
    if (!same) ++mismatches;
  }
  (void)original_dir;
  std::error_code ec;
  fs::remove_all(scratch, ec);
  if (mismatches > 0) {
    std::cerr << mismatches << " CSV artifact(s) differ from the manifest\n";
    return kFailure;
  }
  return kOk;
}

int run(std::vector<std::string> argv) {
  CLI::App app{"Additive neural survival models: train, evaluate, cross-validate and export", "addhaz"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub, bool data, bool model_kind) {
    if (data) sub->add_option("--data", o.data, "CSV with feature columns, duration and event");
    if (model_kind) {
      sub->add_option("--model", o.model, "linear | nam | na2m | timenam | timena2m");
      sub->add_option("--preset", o.preset, "Tuned hyperparameters: metabric, support, gbsg, whas");
      sub->add_option("--config", o.config, "JSON config (ModelConfig field names)");
      sub->add_option("--pairs", o.pairs, "Feature pairs, e.g. \"age:sex,age:hp\"");
      sub->add_flag("--auto-pairs", o.auto_pairs, "Select pairs from a first-stage NAM");
      sub->add_option("--max-pairs", o.max_pairs, "Pairs kept by automatic selection");
      sub->add_option("--candidates", o.candidates, "Candidate pairs for selection");
    }
    sub->add_option("--seed", o.seed, "Random seed")->each([&](const std::string&) { o.seed_set = true; });
    sub->add_option("--out-dir", o.out_dir, "Directory for artifacts");
  };

  CLI::App* train_cmd = app.add_subcommand("train", "Train a model and write model.json");
  common(train_cmd, true, true);
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "Concordance of a saved model on a dataset");
  common(eval_cmd, true, false);
  eval_cmd->add_option("--model-file", o.model_file, "Saved model")->required();
  CLI::App* cv_cmd = app.add_subcommand("cv", "Stratified k-fold cross-validation");
  common(cv_cmd, true, true);
  cv_cmd->add_option("--k", o.k, "Number of folds");
  cv_cmd->add_option("--threads", o.threads, "Folds trained in parallel");
  CLI::App* pairs_cmd = app.add_subcommand("select-pairs", "Rank feature pairs by interaction strength");
  common(pairs_cmd, true, true);
  pairs_cmd->add_option("--model-file", o.model_file, "First-stage proportional model (optional)");
  CLI::App* shapes_cmd = app.add_subcommand("export-shapes", "Write shape-function CSV and SVG files");
  common(shapes_cmd, false, false);
  shapes_cmd->add_option("--model-file", o.model_file, "Saved model")->required();
  shapes_cmd->add_option("--net", o.nets, "Net to export (repeatable; default all)");
  shapes_cmd->add_option("--grid-points", o.grid_points, "Grid points per axis");
  CLI::App* replay_cmd = app.add_subcommand("replay", "Re-run a manifest and verify CSV hashes");
  replay_cmd->add_option("--manifest", o.manifest, "manifest.json to replay")->required();

  std::vector<std::string> reversed(argv.rbegin(), argv.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(o, argv);
    if (eval_cmd->parsed()) return cmd_evaluate(o, argv);
    if (cv_cmd->parsed()) return cmd_cv(o, argv);
    if (pairs_cmd->parsed()) return cmd_select_pairs(o, argv);
    if (shapes_cmd->parsed()) return cmd_export_shapes(o, argv);
    if (replay_cmd->parsed()) return cmd_replay(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const EstimatorError& e) {
    std::cerr << "estimator error: " << e.what() << "\n";
    return kData;
  } catch (const TrainingError& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return kDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args);
}
