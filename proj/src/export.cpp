#include "addhaz/export.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "addhaz/errors.hpp"

namespace addhaz {

using json = nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_shape_csv(const ShapeTable& t, std::ostream& out) {
  const bool two_d = !t.axis2.empty();
  out << csv_field(t.axis1_name) << ',';
  if (two_d) out << csv_field(t.axis2_name) << ',';
  out << "raw,centered\n";
  for (std::size_t i = 0; i < t.axis1.size(); ++i) {
    const std::size_t n2 = two_d ? t.axis2.size() : 1;
    for (std::size_t j = 0; j < n2; ++j) {
      const double v = t.at(i, j);
      out << format_double(t.axis1[i]) << ',';
      if (two_d) out << format_double(t.axis2[j]) << ',';
      out << format_double(v) << ',' << format_double(v - t.centering) << '\n';
    }
  }
}

namespace {

std::string pair_list(const std::vector<FeaturePair>& pairs) {
  std::string s;
  for (const FeaturePair& p : pairs) {
    if (!s.empty()) s += ' ';
    s += std::to_string(p.i) + ":" + std::to_string(p.j);
  }
  return s;
}

}  // namespace

void write_cv_folds_csv(const CVSummary& s, std::ostream& out) {
  out << "fold,cindex,harrell,timedep,train_rows,test_rows,epochs,best_epoch,stop,pairs\n";
  for (const FoldResult& f : s.folds) {
    out << f.fold << ',' << format_double(f.cindex) << ','
        << (f.harrell ? format_double(*f.harrell) : "") << ',' << format_double(f.timedep) << ','
        << f.train_rows << ',' << f.test_rows << ',' << f.report.epochs_run << ','
        << f.report.best_epoch << ',' << to_string(f.report.stop) << ',' << csv_field(pair_list(f.pairs))
        << '\n';
  }
}

void write_cv_summary_csv(const CVSummary& s, std::ostream& out) {
  out << "model,k,seed,mean,std,folds\n";
  std::string folds;
  for (const FoldResult& f : s.folds) folds += (folds.empty() ? "" : " ") + format_double(f.cindex);
  out << to_string(s.config.kind) << ',' << s.k << ',' << s.config.seed << ',' << format_double(s.mean)
      << ',' << format_double(s.std) << ',' << csv_field(folds) << '\n';
}

std::string format_cindex_entry(double mean, double std) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f ± %.2f", 100.0 * mean, 100.0 * std);
  return buf;
}

void write_pairs_csv(const PairRanking& ranking, const std::vector<std::string>& names,
                     std::ostream& out) {
  out << "rank,i,j,feature_i,feature_j,strength,cut_i,cut_j\n";
  int rank = 1;
  for (const PairScore& s : ranking.scores) {
    out << rank++ << ',' << s.pair.i << ',' << s.pair.j << ',' << csv_field(names.at(s.pair.i)) << ','
        << csv_field(names.at(s.pair.j)) << ',' << format_double(s.strength) << ','
        << format_double(s.cut_i) << ',' << format_double(s.cut_j) << '\n';
  }
}

std::string pairs_fragment(const std::vector<FeaturePair>& pairs) {
  json p = json::array();
  for (const FeaturePair& fp : pairs) p.push_back({fp.i, fp.j});
  return json{{"pairs", p}}.dump() + "\n";
}

namespace {

// Fixed-precision numbers keep SVG text identical across runs.
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", std::abs(v) < 0.005 ? 0.0 : v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr double kPanelW = 360.0;
constexpr double kPanelH = 280.0;
constexpr double kLeft = 58.0;
constexpr double kRight = 18.0;
constexpr double kTop = 30.0;
constexpr double kBottom = 44.0;
constexpr double kScaleW = 14.0;

struct Range {
  double lo;
  double hi;
};

Range padded(double lo, double hi) {
  if (!(hi > lo)) {
    const double pad = std::max(1e-6, std::abs(lo) * 0.1);
    return {lo - pad, hi + pad};
  }
  return {lo, hi};
}

// Diverging blue-white-red ramp on t in [-1, 1].
std::string diverging(double t) {
  t = std::clamp(t, -1.0, 1.0);
  int r, g, b;
  if (t < 0) {
    const double s = -t;
    r = static_cast<int>(std::lround(255 - s * (255 - 33)));
    g = static_cast<int>(std::lround(255 - s * (255 - 102)));
    b = static_cast<int>(std::lround(255 - s * (255 - 172)));
  } else {
    r = static_cast<int>(std::lround(255 - t * (255 - 178)));
    g = static_cast<int>(std::lround(255 - t * (255 - 24)));
    b = static_cast<int>(std::lround(255 - t * (255 - 43)));
  }
  char buf[16];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

void axes(std::ostringstream& s, double x0, double y0, double w, double h, Range xr, Range yr,
          const std::string& xlabel, const std::string& ylabel, int xticks, int yticks) {
  s << "<rect x=\"" << num(x0) << "\" y=\"" << num(y0) << "\" width=\"" << num(w) << "\" height=\""
    << num(h) << "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int i = 0; i < xticks; ++i) {
    const double f = xticks > 1 ? static_cast<double>(i) / (xticks - 1) : 0.5;
    const double x = x0 + f * w;
    s << "<line x1=\"" << num(x) << "\" y1=\"" << num(y0 + h) << "\" x2=\"" << num(x) << "\" y2=\""
      << num(y0 + h + 4) << "\" stroke=\"#333\"/>\n";
    s << "<text x=\"" << num(x) << "\" y=\"" << num(y0 + h + 16)
      << "\" font-size=\"10\" text-anchor=\"middle\">" << label(xr.lo + f * (xr.hi - xr.lo)) << "</text>\n";
  }
  for (int i = 0; i < yticks; ++i) {
    const double f = yticks > 1 ? static_cast<double>(i) / (yticks - 1) : 0.5;
    const double y = y0 + h - f * h;
    s << "<line x1=\"" << num(x0 - 4) << "\" y1=\"" << num(y) << "\" x2=\"" << num(x0) << "\" y2=\""
      << num(y) << "\" stroke=\"#333\"/>\n";
    s << "<text x=\"" << num(x0 - 6) << "\" y=\"" << num(y + 3)
      << "\" font-size=\"10\" text-anchor=\"end\">" << label(yr.lo + f * (yr.hi - yr.lo)) << "</text>\n";
  }
  s << "<text x=\"" << num(x0 + w / 2) << "\" y=\"" << num(y0 + h + 34)
    << "\" font-size=\"11\" text-anchor=\"middle\">" << escape(xlabel) << "</text>\n";
  s << "<text x=\"" << num(x0 - 44) << "\" y=\"" << num(y0 + h / 2)
    << "\" font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 " << num(x0 - 44) << ' '
    << num(y0 + h / 2) << ")\">" << escape(ylabel) << "</text>\n";
}

void line_panel(std::ostringstream& s, const ShapeTable& t, double ox, double oy) {
  const double w = kPanelW - kLeft - kRight;
  const double h = kPanelH - kTop - kBottom;
  const double x0 = ox + kLeft;
  const double y0 = oy + kTop;
  std::vector<double> y(t.values.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = t.values[i] - t.centering;
  const Range xr = padded(t.axis1.front(), t.axis1.back());
  const auto [ymin, ymax] = std::minmax_element(y.begin(), y.end());
  const Range yr = padded(*ymin, *ymax);
  s << "<text x=\"" << num(ox + kPanelW / 2) << "\" y=\"" << num(oy + 18)
    << "\" font-size=\"12\" text-anchor=\"middle\">" << escape(t.net) << "</text>\n";
  axes(s, x0, y0, w, h, xr, yr, t.axis1_name, "risk contribution", t.axis1.size() == 2 ? 2 : 5, 5);
  auto px = [&](double v) { return x0 + (v - xr.lo) / (xr.hi - xr.lo) * w; };
  auto py = [&](double v) { return y0 + h - (v - yr.lo) / (yr.hi - yr.lo) * h; };
  s << "<polyline fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (i) s << ' ';
    s << num(px(t.axis1[i])) << ',' << num(py(y[i]));
  }
  s << "\"/>\n";
  if (t.axis1.size() <= 2) {
    for (std::size_t i = 0; i < y.size(); ++i) {
      s << "<circle cx=\"" << num(px(t.axis1[i])) << "\" cy=\"" << num(py(y[i]))
        << "\" r=\"3\" fill=\"#1f4e9c\"/>\n";
    }
  }
}

void heatmap_panel(std::ostringstream& s, const ShapeTable& t, double ox, double oy) {
  const double w = kPanelW - kLeft - kRight - kScaleW - 34.0;
  const double h = kPanelH - kTop - kBottom;
  const double x0 = ox + kLeft;
  const double y0 = oy + kTop;
  const std::size_t n1 = t.axis1.size();
  const std::size_t n2 = t.axis2.size();
  double vmax = 0.0;
  for (double v : t.values) vmax = std::max(vmax, std::abs(v - t.centering));
  if (!(vmax > 0.0)) vmax = 1.0;
  s << "<text x=\"" << num(ox + kPanelW / 2) << "\" y=\"" << num(oy + 18)
    << "\" font-size=\"12\" text-anchor=\"middle\">" << escape(t.net) << "</text>\n";
  // axis2 runs along x, axis1 along y (time on the horizontal axis).
  const double cw = w / static_cast<double>(n2);
  const double ch = h / static_cast<double>(n1);
  for (std::size_t i = 0; i < n1; ++i) {
    for (std::size_t j = 0; j < n2; ++j) {
      const double v = t.at(i, j) - t.centering;
      s << "<rect x=\"" << num(x0 + j * cw) << "\" y=\"" << num(y0 + h - (i + 1) * ch) << "\" width=\""
        << num(cw + 0.3) << "\" height=\"" << num(ch + 0.3) << "\" fill=\"" << diverging(v / vmax)
        << "\"/>\n";
    }
  }
  axes(s, x0, y0, w, h, padded(t.axis2.front(), t.axis2.back()),
       padded(t.axis1.front(), t.axis1.back()), t.axis2_name, t.axis1_name, n2 == 2 ? 2 : 5,
       n1 == 2 ? 2 : 5);
  const double sx = x0 + w + 12.0;
  const int steps = 32;
  for (int k = 0; k < steps; ++k) {
    const double f = (k + 0.5) / steps;
    s << "<rect x=\"" << num(sx) << "\" y=\"" << num(y0 + h - (k + 1) * h / steps) << "\" width=\""
      << num(kScaleW) << "\" height=\"" << num(h / steps + 0.3) << "\" fill=\""
      << diverging(2.0 * f - 1.0) << "\"/>\n";
  }
  s << "<rect x=\"" << num(sx) << "\" y=\"" << num(y0) << "\" width=\"" << num(kScaleW)
    << "\" height=\"" << num(h) << "\" fill=\"none\" stroke=\"#333\"/>\n";
  s << "<text x=\"" << num(sx + kScaleW + 3) << "\" y=\"" << num(y0 + 8) << "\" font-size=\"9\">"
    << label(vmax) << "</text>\n";
  s << "<text x=\"" << num(sx + kScaleW + 3) << "\" y=\"" << num(y0 + h / 2 + 3)
    << "\" font-size=\"9\">0</text>\n";
  s << "<text x=\"" << num(sx + kScaleW + 3) << "\" y=\"" << num(y0 + h) << "\" font-size=\"9\">"
    << label(-vmax) << "</text>\n";
}

std::string document(double w, double h, const std::string& body) {
  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << num(w) << "\" height=\""
    << num(h) << "\" viewBox=\"0 0 " << num(w) << ' ' << num(h) << "\" font-family=\"sans-serif\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << body << "</svg>\n";
  return s.str();
}

void check_table(const ShapeTable& t) {
  const std::size_t expected = t.axis1.size() * std::max<std::size_t>(1, t.axis2.size());
  if (t.axis1.empty() || t.values.size() != expected) {
    throw ShapeError("shape table '" + t.net + "' has inconsistent grid and values");
  }
}

}  // namespace

std::string line_plot_svg(const ShapeTable& t) {
  check_table(t);
  std::ostringstream s;
  line_panel(s, t, 0, 0);
  return document(kPanelW, kPanelH, s.str());
}

std::string heatmap_svg(const ShapeTable& t) {
  check_table(t);
  if (t.axis2.empty()) throw ShapeError("heatmap needs a 2-input shape table");
  std::ostringstream s;
  heatmap_panel(s, t, 0, 0);
  return document(kPanelW, kPanelH, s.str());
}

std::string shape_svg(const ShapeTable& t) { return t.axis2.empty() ? line_plot_svg(t) : heatmap_svg(t); }

std::string shape_grid_svg(const std::vector<ShapeTable>& tables, int columns) {
  columns = std::max(1, columns);
  const auto n = static_cast<int>(tables.size());
  const int cols = std::min(columns, std::max(1, n));
  const int rows = std::max(1, (n + cols - 1) / cols);
  std::ostringstream s;
  for (int k = 0; k < n; ++k) {
    check_table(tables[k]);
    const double ox = (k % cols) * kPanelW;
    const double oy = (k / cols) * kPanelH;
    s << "<g>\n";
    if (tables[k].axis2.empty()) {
      line_panel(s, tables[k], ox, oy);
    } else {
      heatmap_panel(s, tables[k], ox, oy);
    }
    s << "</g>\n";
  }
  return document(cols * kPanelW, rows * kPanelH, s.str());
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string file_sha256(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return sha256_hex(bytes);
}

std::string manifest_json(const RunManifest& m) {
  json artifacts = json::array();
  for (const ManifestArtifact& a : m.artifacts) artifacts.push_back({{"path", a.path}, {"sha256", a.sha256}});
  json j{{"command", m.command},
         {"config", m.config.empty() ? json(nullptr) : json::parse(m.config)},
         {"dataset", {{"path", m.dataset_path}, {"sha256", m.dataset_sha256}}},
         {"seed", m.seed},
         {"artifacts", artifacts},
         {"tool_version", m.tool_version}};
  return j.dump(2) + "\n";
}

RunManifest parse_manifest(std::string_view text) {
  RunManifest m;
  try {
    const json j = json::parse(text);
    m.command = j.at("command").get<std::vector<std::string>>();
    if (!j.at("config").is_null()) m.config = j.at("config").dump();
    m.dataset_path = j.at("dataset").at("path").get<std::string>();
    m.dataset_sha256 = j.at("dataset").at("sha256").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const json& a : j.at("artifacts")) {
      m.artifacts.push_back({a.at("path").get<std::string>(), a.at("sha256").get<std::string>()});
    }
    m.tool_version = j.at("tool_version").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

ManifestArtifact write_artifact(const std::filesystem::path& dir, const std::string& name,
                                const std::string& text) {
  const std::filesystem::path path = dir / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
  return {name, sha256_hex(text)};
}

}  // namespace addhaz
