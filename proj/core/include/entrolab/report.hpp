#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace entrolab {

/// Shortest decimal form that round-trips to the same double (std::to_chars),
/// so repeated runs emit byte-identical CSV files. Non-finite values print as
/// "inf", "-inf", "nan".
std::string format_double(double v);

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool logx = false;
  bool logy = false;
  std::vector<PlotSeries> series;
};

/// Small self-contained SVG line chart. Points that are non-finite (or
/// nonpositive on a log axis) split the polyline instead of corrupting it.
void write_svg_plot(const PlotSpec& spec, std::ostream& out);

struct CheckResult {
  std::string name;
  bool pass = false;
  double value = 0.0;     // measured quantity
  double tolerance = 0.0; // threshold it was compared against
  std::string detail;
};

struct CheckSet {
  std::vector<CheckResult> checks;

  void add(std::string name, bool pass, double value, double tolerance, std::string detail = "");
  bool all_pass() const;
  /// One "[PASS]/[FAIL] name ..." line per check.
  void print(std::ostream& out) const;
  std::string to_json() const;
};

} // namespace entrolab
