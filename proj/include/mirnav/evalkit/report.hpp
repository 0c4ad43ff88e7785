#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mirnav/evalkit/metrics.hpp"
#include "mirnav/evalkit/mi.hpp"

namespace mirnav::eval {

inline nlohmann::json to_json(const EvalReport& r) {
  auto bins = nlohmann::json::array();
  for (const auto& b : r.bins) bins.push_back({{"lo", b.lo}, {"hi", b.hi}, {"n", b.n}, {"sr", b.sr}, {"spl", b.spl}});
  return {{"n", r.n},
          {"sr", r.sr},
          {"spl", r.spl},
          {"cr", r.cr},
          {"bins", bins},
          {"long_paths", {{"min_moves", kLongPathMoves}, {"n", r.long_paths.n}, {"sr", r.long_paths.sr}, {"spl", r.long_paths.spl}}}};
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  try {
    EvalReport r;
    r.n = j.at("n");
    r.sr = j.at("sr");
    r.spl = j.at("spl");
    r.cr = j.at("cr");
    for (const auto& b : j.at("bins")) r.bins.push_back({b.at("lo"), b.at("hi"), b.at("n"), b.at("sr"), b.at("spl")});
    r.long_paths = {j.at("long_paths").at("n"), j.at("long_paths").at("sr"), j.at("long_paths").at("spl")};
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad report: ") + e.what());
  }
}

// Canonical text: sorted keys, 2-space indent, trailing newline.
inline std::string dump_canonical(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline std::string bins_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "lo,hi,n,sr,spl\n";
  out << std::setprecision(17);
  for (const auto& b : r.bins) out << b.lo << ',' << (b.hi < 0 ? std::string("inf") : std::to_string(b.hi)) << ',' << b.n << ',' << b.sr << ',' << b.spl << '\n';
  return out.str();
}

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

// Minimal line plot. One <polyline class="series"> per series, with a
// data-name attribute; points in data order.
inline std::string svg_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                            const std::vector<Series>& series) {
  constexpr double W = 640, H = 400, L = 60, R = 20, T = 40, B = 50;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool first = true;
  for (const auto& s : series) {
    require(s.x.size() == s.y.size(), "svg_plot: x/y length mismatch");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (first) {
        x0 = x1 = s.x[i];
        y0 = y1 = s.y[i];
        first = false;
      }
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (x1 - x0 < 1e-12) x1 = x0 + 1;
  if (y1 - y0 < 1e-12) y1 = y0 + 1;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  std::ostringstream o;
  o << std::fixed << std::setprecision(2);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\">\n";
  o << "<title>" << title << "</title>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\">" << title << "</text>\n";
  o << "<line class=\"axis\" x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  o << "<line class=\"axis\" x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
  o << "<text x=\"14\" y=\"" << H / 2 << "\" transform=\"rotate(-90 14 " << H / 2 << ")\" text-anchor=\"middle\">" << y_label
    << "</text>\n";
  o << "<text x=\"" << L - 6 << "\" y=\"" << py(y0) << "\" text-anchor=\"end\">" << y0 << "</text>\n";
  o << "<text x=\"" << L - 6 << "\" y=\"" << py(y1) << "\" text-anchor=\"end\">" << y1 << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    o << "<polyline class=\"series\" data-name=\"" << s.name << "\" fill=\"none\" stroke=\"" << colours[k % 6]
      << "\" points=\"";
    bool sep = false;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      o << (sep ? " " : "") << px(s.x[i]) << ',' << py(s.y[i]);
      sep = true;
    }
    o << "\"/>\n";
    o << "<text x=\"" << W - R - 4 << "\" y=\"" << T + 14 * (k + 1) << "\" text-anchor=\"end\" fill=\"" << colours[k % 6]
      << "\">" << s.name << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

struct SvgCheck {
  bool ok = false;
  std::string error;
  std::vector<std::string> names;
  std::vector<int> points;  // per series
};

// Structural check of svg_plot output: root element, axes, and series.
inline SvgCheck check_svg(const std::string& text) {
  SvgCheck c;
  auto fail = [&](const std::string& e) {
    c.ok = false;
    c.error = e;
    return c;
  };
  if (text.rfind("<svg xmlns=\"http://www.w3.org/2000/svg\"", 0) != 0) return fail("missing svg root");
  if (text.find("</svg>") == std::string::npos) return fail("unterminated svg");
  if (std::count(text.begin(), text.end(), '<') != std::count(text.begin(), text.end(), '>'))
    return fail("unbalanced angle brackets");
  const std::regex axis("<line class=\"axis\"");
  if (std::distance(std::sregex_iterator(text.begin(), text.end(), axis), std::sregex_iterator()) != 2)
    return fail("expected two axes");
  const std::regex poly("<polyline class=\"series\" data-name=\"([^\"]*)\"[^>]*points=\"([^\"]*)\"/>");
  const std::regex pt("^-?[0-9]+\\.[0-9]+,-?[0-9]+\\.[0-9]+$");
  for (auto it = std::sregex_iterator(text.begin(), text.end(), poly); it != std::sregex_iterator(); ++it) {
    c.names.push_back((*it)[1]);
    std::istringstream ps((*it)[2].str());
    std::string tok;
    int n = 0;
    while (ps >> tok) {
      if (!std::regex_match(tok, pt)) return fail("bad point '" + tok + "'");
      ++n;
    }
    c.points.push_back(n);
  }
  c.ok = true;
  return c;
}

inline std::string bins_svg(const EvalReport& r) {
  Series sr{"SR", {}, {}}, spl{"SPL", {}, {}};
  for (const auto& b : r.bins) {
    const double mid = b.hi < 0 ? b.lo + kBinWidth / 2.0 : (b.lo + b.hi) / 2.0;
    sr.x.push_back(mid);
    sr.y.push_back(b.sr);
    spl.x.push_back(mid);
    spl.y.push_back(b.spl);
  }
  return svg_plot("Success by starting geodesic distance", "start geodesic (cells)", "%", {sr, spl});
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << text;
  if (!out) throw ConfigError("write failed for " + p.string());
}

enum class ReportFormat { kJson, kCsv, kSvg };

// Writes report.json / bins.csv / curves.svg into `dir`.
inline void emit_report(const EvalReport& r, const std::filesystem::path& dir,
                        const std::vector<ReportFormat>& formats = {ReportFormat::kJson, ReportFormat::kCsv,
                                                                    ReportFormat::kSvg},
                        const nlohmann::json& extra = nlohmann::json::object()) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  for (auto f : formats) {
    switch (f) {
      case ReportFormat::kJson: {
        auto j = to_json(r);
        for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
        write_text(dir / "report.json", dump_canonical(j));
        break;
      }
      case ReportFormat::kCsv: write_text(dir / "bins.csv", bins_csv(r)); break;
      case ReportFormat::kSvg: write_text(dir / "curves.svg", bins_svg(r)); break;
    }
  }
}

inline std::string mi_csv(const std::vector<MiRow>& rows) {
  std::ostringstream out;
  out << "id,instance,exact_bits,bound_bits,gap_bits\n" << std::setprecision(17);
  for (const auto& r : rows) out << r.id << ',' << r.instance << ',' << r.exact << ',' << r.bound << ',' << r.gap() << '\n';
  return out.str();
}

}  // namespace mirnav::eval
