#pragma once

#include <span>
#include <string>
#include <vector>

#include "densedet/metrics.hpp"

namespace densedet {

// Table cells are percentages with one decimal; undefined fields render as
// an em dash.
std::string format_percent(double fraction);

// Signed difference in percentage points, e.g. "+2.0", "-0.4", "0.0".
std::string format_delta(double fraction_delta);

inline constexpr const char* kSummaryHeader = "AP AP50 AP75 APs APm APl";
inline constexpr const char* kSummaryCsvHeader = "AP,AP50,AP75,APs,APm,APl";

// "47.9 80.9 52.6 23.9 50.3 67.5"
std::string summary_row(const ApSummary& s, char sep = ' ');

// Title line, header line, value row, each newline-terminated.
std::string render_table(const std::string& title, const ApSummary& s);

// Header plus one row per summary.
std::string render_csv(std::span<const ApSummary> rows);

// evaluate-style output: header, row, and an AR line.
std::string render_evaluation(const ApSummary& s);

struct NamedSummary {
  std::string name;
  ApSummary summary;
};

// Two rows and their difference (b - a).
std::string render_comparison(const NamedSummary& a, const NamedSummary& b);

// ROC CSV: "threshold,fpr,tpr" rows then "auc=<value>".
std::string render_roc_csv(const RocCurve& curve);

}  // namespace densedet
