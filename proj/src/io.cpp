#include "nestcov/io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace nestcov {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

[[noreturn]] void parse_error(const std::string& field, const std::string& what) {
  fail(ErrorKind::ParseError, "field '" + field + "': " + what);
}

void reject_unknown(const json& obj, const std::string& where,
                    std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      parse_error(where.empty() ? key : where + "." + key, "unknown key");
  }
}

std::int64_t get_int(const json& v, const std::string& field) {
  if (!v.is_number_integer()) parse_error(field, "expected an integer");
  return v.get<std::int64_t>();
}

double get_number(const json& v, const std::string& field) {
  if (!v.is_number()) parse_error(field, "expected a number");
  return v.get<double>();
}

const json& get_object(const json& v, const std::string& field) {
  if (!v.is_object()) parse_error(field, "expected an object");
  return v;
}

const json& get_array(const json& v, const std::string& field) {
  if (!v.is_array()) parse_error(field, "expected an array");
  return v;
}

}  // namespace

ExperimentConfig parse_config_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    fail(ErrorKind::ParseError, e.what());
  }
  if (!doc.is_object()) fail(ErrorKind::ParseError, "config root must be a JSON object");
  reject_unknown(doc, "",
                 {"kind", "grid", "truth", "sample_sizes", "replications", "seed", "estimators", "cv"});
  if (!doc.contains("kind")) parse_error("kind", "missing");
  if (!doc["kind"].is_string()) parse_error("kind", "expected a string");
  const std::string kind_text = doc["kind"].get<std::string>();
  const auto kind = parse_experiment_kind(kind_text);
  if (!kind)
    fail(ErrorKind::ValidationError,
         "kind '" + kind_text + "' is not one of DiagDecay, Gmrf, ShrinkCompare");

  ExperimentConfig c = default_config(*kind);

  if (doc.contains("grid")) {
    const json& grid = get_object(doc["grid"], "grid");
    reject_unknown(grid, "grid", {"rows", "cols"});
    if (grid.contains("rows")) c.rows = get_int(grid["rows"], "grid.rows");
    if (grid.contains("cols")) c.cols = get_int(grid["cols"], "grid.cols");
  }

  if (doc.contains("truth")) {
    const json& truth = get_object(doc["truth"], "truth");
    if (*kind == ExperimentKind::Gmrf) {
      reject_unknown(truth, "truth", {"theta"});
      if (!truth.contains("theta")) parse_error("truth.theta", "missing");
      c.truth.clear();
      for (const auto& v : get_array(truth["theta"], "truth.theta"))
        c.truth.push_back(get_number(v, "truth.theta"));
    } else {
      reject_unknown(truth, "truth", {"c", "c1", "c2", "alpha"});
      const bool has_c = truth.contains("c"), has_c1 = truth.contains("c1");
      if (has_c == has_c1) parse_error("truth", "give exactly one of 'c' or 'c1'");
      if (has_c && truth.contains("c2")) parse_error("truth.c2", "only valid together with 'c1'");
      if (!truth.contains("alpha")) parse_error("truth.alpha", "missing");
      const double c1 = has_c ? get_number(truth["c"], "truth.c") : get_number(truth["c1"], "truth.c1");
      const double c2 = truth.contains("c2") ? get_number(truth["c2"], "truth.c2") : 0.0;
      c.truth = {c1, c2, get_number(truth["alpha"], "truth.alpha")};
    }
  }

  if (doc.contains("sample_sizes")) {
    c.sample_sizes.clear();
    for (const auto& v : get_array(doc["sample_sizes"], "sample_sizes")) {
      const std::int64_t n = get_int(v, "sample_sizes");
      if (n < 1 || n > 1'000'000) fail(ErrorKind::ValidationError, "sample_sizes entries must be in [1, 1e6]");
      c.sample_sizes.push_back(static_cast<int>(n));
    }
  }
  if (doc.contains("replications")) {
    const std::int64_t r = get_int(doc["replications"], "replications");
    if (r < 1 || r > 10'000'000) fail(ErrorKind::ValidationError, "replications must be >= 1");
    c.replications = static_cast<int>(r);
  }
  if (doc.contains("seed")) {
    const json& s = doc["seed"];
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0))
      parse_error("seed", "expected a non-negative integer");
    c.seed = s.get<std::uint64_t>();
  }
  if (doc.contains("estimators")) {
    c.estimators.clear();
    for (const auto& v : get_array(doc["estimators"], "estimators")) {
      if (!v.is_string()) parse_error("estimators", "expected strings");
      c.estimators.push_back(v.get<std::string>());
    }
  }
  if (doc.contains("cv")) {
    if (*kind != ExperimentKind::ShrinkCompare)
      fail(ErrorKind::ValidationError, "cv settings apply only to kind ShrinkCompare");
    const json& cv = get_object(doc["cv"], "cv");
    reject_unknown(cv, "cv", {"folds", "kappa_grid"});
    if (cv.contains("folds")) c.folds = static_cast<int>(get_int(cv["folds"], "cv.folds"));
    if (cv.contains("kappa_grid")) {
      c.kappa_grid.clear();
      for (const auto& v : get_array(cv["kappa_grid"], "cv.kappa_grid"))
        c.kappa_grid.push_back(get_number(v, "cv.kappa_grid"));
    }
  }

  validate(c);
  return c;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open config " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

std::string config_to_json(const ExperimentConfig& c) {
  ordered_json doc;
  doc["kind"] = std::string(to_string(c.kind));
  doc["grid"] = {{"rows", c.rows}, {"cols", c.cols}};
  if (c.kind == ExperimentKind::Gmrf) {
    doc["truth"] = {{"theta", c.truth}};
  } else {
    doc["truth"] = {{"c1", c.truth.at(0)}, {"c2", c.truth.at(1)}, {"alpha", c.truth.at(2)}};
  }
  doc["sample_sizes"] = c.sample_sizes;
  doc["replications"] = c.replications;
  doc["seed"] = c.seed;
  doc["estimators"] = c.estimators;
  if (c.kind == ExperimentKind::ShrinkCompare)
    doc["cv"] = {{"folds", c.folds}, {"kappa_grid", c.kappa_grid}};
  return doc.dump(2) + "\n";
}

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto result = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), result.ptr);
}

std::string format_csv(const ExperimentTable& table) {
  std::vector<const ExperimentRow*> rows;
  for (const auto& r : table.rows) rows.push_back(&r);
  std::sort(rows.begin(), rows.end(), [](const ExperimentRow* a, const ExperimentRow* b) {
    return std::tie(a->estimator, a->N) < std::tie(b->estimator, b->N);
  });
  std::string out = "estimator,N,mean_sq_frobenius,std_error,replications\n";
  for (const auto* r : rows) {
    out += r->estimator + "," + std::to_string(r->N) + "," + format_double(r->mean_sq_frobenius) +
           "," + format_double(r->std_error) + "," + std::to_string(r->replications) + "\n";
  }
  return out;
}

ExperimentTable parse_csv(std::string_view text) {
  ExperimentTable table;
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (header) {
      if (line != "estimator,N,mean_sq_frobenius,std_error,replications")
        fail(ErrorKind::ParseError, "unexpected CSV header");
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 5) fail(ErrorKind::ParseError, "CSV row needs 5 fields");
    ExperimentRow row;
    row.estimator = std::string(fields[0]);
    const auto number = [](std::string_view f, auto& out) {
      const auto res = std::from_chars(f.data(), f.data() + f.size(), out);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size())
        fail(ErrorKind::ParseError, "bad CSV number '" + std::string(f) + "'");
    };
    number(fields[1], row.N);
    number(fields[2], row.mean_sq_frobenius);
    number(fields[3], row.std_error);
    number(fields[4], row.replications);
    table.rows.push_back(std::move(row));
  }
  if (header) fail(ErrorKind::ParseError, "missing CSV header");
  return table;
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) fail(ErrorKind::IoError, "write to " + path.string() + " failed");
}

void emit_csv(const ExperimentTable& table, const std::filesystem::path& path) {
  write_file(path, format_csv(table));
}

std::string format_trace_csv(const std::vector<TraceRow>& rows) {
  std::string out = "model,N,asymptotic_mse\n";
  for (const auto& r : rows)
    out += r.model + "," + std::to_string(r.N) + "," + format_double(r.value) + "\n";
  return out;
}

namespace {

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += ch;
    }
  }
  return out;
}

constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                              "#9467bd", "#8c564b", "#e377c2", "#17becf"};

}  // namespace

std::string render_svg_plot(const ExperimentTable& table, std::string_view title) {
  // Series in first-appearance order, points sorted by N.
  std::vector<std::string> names;
  std::map<std::string, std::vector<std::pair<int, double>>> series;
  for (const auto& r : table.rows) {
    if (!std::isfinite(r.mean_sq_frobenius) || r.mean_sq_frobenius <= 0.0) continue;
    if (!series.count(r.estimator)) names.push_back(r.estimator);
    series[r.estimator].emplace_back(r.N, r.mean_sq_frobenius);
  }
  if (names.empty()) fail(ErrorKind::EmptyTable, "no positive finite values to plot");
  int n_min = series[names[0]][0].first, n_max = n_min;
  double y_min = series[names[0]][0].second, y_max = y_min;
  for (auto& [name, pts] : series) {
    std::sort(pts.begin(), pts.end());
    for (const auto& [n, y] : pts) {
      n_min = std::min(n_min, n);
      n_max = std::max(n_max, n);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
  }
  const int dec_lo = static_cast<int>(std::floor(std::log10(y_min)));
  int dec_hi = static_cast<int>(std::ceil(std::log10(y_max)));
  if (dec_hi == dec_lo) ++dec_hi;
  if (n_max == n_min) ++n_max;

  const double width = 720, height = 480, left = 80, right = 170, top = 50, bottom = 60;
  const double plot_w = width - left - right, plot_h = height - top - bottom;
  const auto px = [&](double n) { return left + (n - n_min) / (n_max - n_min) * plot_w; };
  const auto py = [&](double y) {
    return top + (dec_hi - std::log10(y)) / static_cast<double>(dec_hi - dec_lo) * plot_h;
  };

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"720\" height=\"480\" "
       "viewBox=\"0 0 720 480\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"720\" height=\"480\" fill=\"white\"/>\n";
  s += "<text x=\"" + fixed(left + plot_w / 2) + "\" y=\"28\" text-anchor=\"middle\" "
       "font-family=\"sans-serif\" font-size=\"16\">" + xml_escape(title) + "</text>\n";
  s += "<g stroke=\"#cccccc\" stroke-width=\"1\">\n";
  for (int d = dec_lo; d <= dec_hi; ++d) {
    const double y = py(std::pow(10.0, d));
    s += "<line x1=\"" + fixed(left) + "\" y1=\"" + fixed(y) + "\" x2=\"" + fixed(left + plot_w) +
         "\" y2=\"" + fixed(y) + "\"/>\n";
  }
  s += "</g>\n";
  s += "<g font-family=\"sans-serif\" font-size=\"12\">\n";
  for (int d = dec_lo; d <= dec_hi; ++d) {
    s += "<text x=\"" + fixed(left - 8) + "\" y=\"" + fixed(py(std::pow(10.0, d)) + 4) +
         "\" text-anchor=\"end\">1e" + std::to_string(d) + "</text>\n";
  }
  std::set<int> ticks;
  for (const auto& [name, pts] : series)
    for (const auto& p : pts) ticks.insert(p.first);
  for (int n : ticks) {
    s += "<text x=\"" + fixed(px(n)) + "\" y=\"" + fixed(top + plot_h + 18) +
         "\" text-anchor=\"middle\">" + std::to_string(n) + "</text>\n";
  }
  s += "<text x=\"" + fixed(left + plot_w / 2) + "\" y=\"" + fixed(height - 15) +
       "\" text-anchor=\"middle\">N</text>\n";
  s += "</g>\n";
  s += "<rect x=\"" + fixed(left) + "\" y=\"" + fixed(top) + "\" width=\"" + fixed(plot_w) +
       "\" height=\"" + fixed(plot_h) + "\" fill=\"none\" stroke=\"black\"/>\n";

  for (std::size_t i = 0; i < names.size(); ++i) {
    const char* color = kPalette[i % kPalette.size()];
    const auto& pts = series[names[i]];
    s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (k) s += " ";
      s += fixed(px(pts[k].first)) + "," + fixed(py(pts[k].second));
    }
    s += "\"/>\n";
    for (const auto& [n, y] : pts) {
      s += "<circle cx=\"" + fixed(px(n)) + "\" cy=\"" + fixed(py(y)) + "\" r=\"3\" fill=\"" +
           color + "\"/>\n";
    }
    const double ly = top + 10 + 20.0 * static_cast<double>(i);
    s += "<line x1=\"" + fixed(left + plot_w + 15) + "\" y1=\"" + fixed(ly) + "\" x2=\"" +
         fixed(left + plot_w + 40) + "\" y2=\"" + fixed(ly) + "\" stroke=\"" + color +
         "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + fixed(left + plot_w + 46) + "\" y=\"" + fixed(ly + 4) +
         "\" font-family=\"sans-serif\" font-size=\"12\">" + xml_escape(names[i]) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

void emit_svg_plot(const ExperimentTable& table, const std::filesystem::path& path,
                   std::string_view title) {
  write_file(path, render_svg_plot(table, title));
}

}  // namespace nestcov
