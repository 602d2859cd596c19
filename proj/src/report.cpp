#include "densedet/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace densedet {

namespace {

std::string printf_double(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::string format_threshold(double t) {
  if (std::isinf(t)) return t > 0 ? "inf" : "-inf";
  return printf_double("%.17g", t);
}

std::vector<double> fields(const ApSummary& s) {
  return {s.ap, s.ap50, s.ap75, s.ap_small, s.ap_medium, s.ap_large};
}

}  // namespace

std::string format_percent(double fraction) {
  if (fraction < 0.0 || !std::isfinite(fraction)) return "—";
  return printf_double("%.1f", fraction * 100.0);
}

std::string format_delta(double fraction_delta) {
  if (!std::isfinite(fraction_delta)) return "—";
  std::string s = printf_double("%+.1f", fraction_delta * 100.0);
  if (s == "+0.0" || s == "-0.0") return "0.0";
  return s;
}

std::string summary_row(const ApSummary& s, char sep) {
  std::string out;
  for (double v : fields(s)) {
    if (!out.empty()) out += sep;
    out += format_percent(v);
  }
  return out;
}

std::string render_table(const std::string& title, const ApSummary& s) {
  return title + "\n" + kSummaryHeader + "\n" + summary_row(s) + "\n";
}

std::string render_csv(std::span<const ApSummary> rows) {
  std::string out = std::string(kSummaryCsvHeader) + "\n";
  for (const auto& r : rows) out += summary_row(r, ',') + "\n";
  return out;
}

std::string render_evaluation(const ApSummary& s) {
  return std::string(kSummaryHeader) + "\n" + summary_row(s) + "\nAR " + format_percent(s.ar) + "\n";
}

std::string render_comparison(const NamedSummary& a, const NamedSummary& b) {
  const auto fa = fields(a.summary);
  const auto fb = fields(b.summary);
  std::string delta;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    if (i) delta += ' ';
    delta += (fa[i] < 0.0 || fb[i] < 0.0) ? "—" : format_delta(fb[i] - fa[i]);
  }
  std::ostringstream out;
  out << "condition " << kSummaryHeader << '\n';
  out << a.name << ' ' << summary_row(a.summary) << '\n';
  out << b.name << ' ' << summary_row(b.summary) << '\n';
  out << "delta " << delta << '\n';
  return out.str();
}

std::string render_roc_csv(const RocCurve& curve) {
  std::string out = "threshold,fpr,tpr\n";
  for (const auto& p : curve.points)
    out += format_threshold(p.threshold) + "," + printf_double("%.17g", p.fpr) + "," + printf_double("%.17g", p.tpr) + "\n";
  out += "auc=" + printf_double("%.6f", curve.auc) + "\n";
  return out;
}

}  // namespace densedet
