#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "addhaz/harness.hpp"
#include "addhaz/model.hpp"
#include "addhaz/pair_selection.hpp"

namespace addhaz {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// RFC-4180 quoting when the field needs it.
std::string csv_field(std::string_view s);

/// Columns: axis1 [, axis2], raw, centered. One row per grid node in
/// row-major order.
void write_shape_csv(const ShapeTable& table, std::ostream& out);

void write_cv_folds_csv(const CVSummary& s, std::ostream& out);
void write_cv_summary_csv(const CVSummary& s, std::ostream& out);

/// "mm.mm ± s.ss" of fractions scaled by 100.
std::string format_cindex_entry(double mean, double std);

void write_pairs_csv(const PairRanking& ranking, const std::vector<std::string>& names,
                     std::ostream& out);

/// Config fragment `{"pairs": [[i, j], ...]}` accepted by parse_config.
std::string pairs_fragment(const std::vector<FeaturePair>& pairs);

/// Line plot for 1-input nets, heatmap with colour scale otherwise.
std::string shape_svg(const ShapeTable& table);
std::string line_plot_svg(const ShapeTable& table);
std::string heatmap_svg(const ShapeTable& table);
/// All panels on one page, `columns` per row.
std::string shape_grid_svg(const std::vector<ShapeTable>& tables, int columns = 4);

std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const std::filesystem::path& path);

struct ManifestArtifact {
  std::string path;  // relative to the manifest's directory
  std::string sha256;
  bool operator==(const ManifestArtifact&) const = default;
};

struct RunManifest {
  std::vector<std::string> command;  // argv after the program name
  std::string config;                // resolved ModelConfig as JSON text
  std::string dataset_path;
  std::string dataset_sha256;
  std::uint64_t seed = 0;
  std::vector<ManifestArtifact> artifacts;
  std::string tool_version;
};

std::string manifest_json(const RunManifest& m);
RunManifest parse_manifest(std::string_view text);

/// Writes `text` to `dir / name` and returns the artifact record.
ManifestArtifact write_artifact(const std::filesystem::path& dir, const std::string& name,
                                const std::string& text);

}  // namespace addhaz
