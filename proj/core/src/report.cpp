#include "entrolab/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace entrolab {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

constexpr double kWidth = 800.0, kHeight = 500.0;
constexpr double kLeft = 70.0, kRight = 150.0, kTop = 45.0, kBottom = 55.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

struct AxisMap {
  bool log = false;
  double lo = 0.0, hi = 1.0;
  double screen0 = 0.0, screen1 = 1.0;

  bool usable(double v) const { return std::isfinite(v) && (!log || v > 0.0); }
  double to_screen(double v) const {
    double a = log ? std::log10(v) : v;
    double l = log ? std::log10(lo) : lo;
    double h = log ? std::log10(hi) : hi;
    double u = (h > l) ? (a - l) / (h - l) : 0.5;
    return screen0 + u * (screen1 - screen0);
  }
};

void fit_axis(AxisMap& ax, const PlotSpec& spec, bool is_x) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& s : spec.series) {
    const auto& vals = is_x ? s.x : s.y;
    for (double v : vals) {
      if (!ax.usable(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(lo <= hi)) {
    lo = ax.log ? 0.1 : 0.0;
    hi = 1.0;
  }
  if (lo == hi) {
    const double pad = ax.log ? 0.0 : std::max(0.5, std::abs(lo) * 0.1);
    if (ax.log) {
      lo *= 0.5;
      hi *= 2.0;
    } else {
      lo -= pad;
      hi += pad;
    }
  } else if (!ax.log) {
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  } else {
    lo *= 0.8;
    hi *= 1.25;
  }
  ax.lo = lo;
  ax.hi = hi;
}

} // namespace

void write_svg_plot(const PlotSpec& spec, std::ostream& out) {
  AxisMap xm, ym;
  xm.log = spec.logx;
  ym.log = spec.logy;
  fit_axis(xm, spec, true);
  fit_axis(ym, spec, false);
  xm.screen0 = kLeft;
  xm.screen1 = kWidth - kRight;
  ym.screen0 = kHeight - kBottom;
  ym.screen1 = kTop;

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << kWidth << ' ' << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"13\">\n";
  out << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << px(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
      << spec.title << "</text>\n";

  // frame
  out << "<rect x=\"" << px(kLeft) << "\" y=\"" << px(kTop) << "\" width=\""
      << px(kWidth - kLeft - kRight) << "\" height=\"" << px(kHeight - kTop - kBottom)
      << "\" fill=\"none\" stroke=\"#444\"/>\n";

  const int nticks = 5;
  for (int i = 0; i <= nticks; ++i) {
    const double u = double(i) / nticks;
    double xv, yv;
    if (xm.log) {
      xv = std::pow(10.0, std::log10(xm.lo) + u * (std::log10(xm.hi) - std::log10(xm.lo)));
    } else {
      xv = xm.lo + u * (xm.hi - xm.lo);
    }
    if (ym.log) {
      yv = std::pow(10.0, std::log10(ym.lo) + u * (std::log10(ym.hi) - std::log10(ym.lo)));
    } else {
      yv = ym.lo + u * (ym.hi - ym.lo);
    }
    const double sx = xm.to_screen(xv);
    const double sy = ym.to_screen(yv);
    out << "<line x1=\"" << px(sx) << "\" y1=\"" << px(kHeight - kBottom) << "\" x2=\"" << px(sx)
        << "\" y2=\"" << px(kHeight - kBottom + 6) << "\" stroke=\"#444\"/>\n";
    out << "<text x=\"" << px(sx) << "\" y=\"" << px(kHeight - kBottom + 22)
        << "\" text-anchor=\"middle\">" << tick_label(xv) << "</text>\n";
    out << "<line x1=\"" << px(kLeft - 6) << "\" y1=\"" << px(sy) << "\" x2=\"" << px(kLeft)
        << "\" y2=\"" << px(sy) << "\" stroke=\"#444\"/>\n";
    out << "<text x=\"" << px(kLeft - 10) << "\" y=\"" << px(sy + 4)
        << "\" text-anchor=\"end\">" << tick_label(yv) << "</text>\n";
  }
  out << "<text x=\"" << px((kLeft + kWidth - kRight) / 2) << "\" y=\"" << px(kHeight - 12)
      << "\" text-anchor=\"middle\">" << spec.xlabel << "</text>\n";
  out << "<text x=\"18\" y=\"" << px((kTop + kHeight - kBottom) / 2)
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << px((kTop + kHeight - kBottom) / 2) << ")\">" << spec.ylabel << "</text>\n";

  std::size_t ci = 0;
  for (const auto& s : spec.series) {
    const char* color = kPalette[ci % (sizeof(kPalette) / sizeof(kPalette[0]))];
    std::string points;
    auto flush = [&]() {
      if (points.empty()) return;
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\""
          << points << "\"/>\n";
      points.clear();
    };
    const std::size_t npts = std::min(s.x.size(), s.y.size());
    for (std::size_t k = 0; k < npts; ++k) {
      if (!xm.usable(s.x[k]) || !ym.usable(s.y[k])) {
        flush();
        continue;
      }
      points += px(xm.to_screen(s.x[k])) + ',' + px(ym.to_screen(s.y[k])) + ' ';
    }
    flush();
    const double ly = kTop + 18.0 + 20.0 * double(ci);
    out << "<line x1=\"" << px(kWidth - kRight + 12) << "\" y1=\"" << px(ly - 4) << "\" x2=\""
        << px(kWidth - kRight + 38) << "\" y2=\"" << px(ly - 4) << "\" stroke=\"" << color
        << "\" stroke-width=\"1.8\"/>\n";
    out << "<text x=\"" << px(kWidth - kRight + 44) << "\" y=\"" << px(ly) << "\">" << s.label
        << "</text>\n";
    ++ci;
  }
  out << "</svg>\n";
}

void CheckSet::add(std::string name, bool pass, double value, double tolerance,
                   std::string detail) {
  checks.push_back({std::move(name), pass, value, tolerance, std::move(detail)});
}

bool CheckSet::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

void CheckSet::print(std::ostream& out) const {
  for (const auto& c : checks) {
    out << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << "  value=" << format_double(c.value)
        << " tol=" << format_double(c.tolerance);
    if (!c.detail.empty()) out << "  (" << c.detail << ')';
    out << '\n';
  }
}

std::string CheckSet::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : checks) {
    nlohmann::json row;
    row["name"] = c.name;
    row["pass"] = c.pass;
    row["value"] = std::isfinite(c.value) ? nlohmann::json(c.value)
                                          : nlohmann::json(format_double(c.value));
    row["tolerance"] = c.tolerance;
    if (!c.detail.empty()) row["detail"] = c.detail;
    j.push_back(std::move(row));
  }
  return j.dump(2);
}

} // namespace entrolab
