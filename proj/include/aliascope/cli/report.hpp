#pragma once

#include <string>

#include <json.hpp>

#include "aliascope/adversarial.hpp"
#include "aliascope/instrumentation.hpp"

namespace aliascope::cli {

inline constexpr int kReportSchemaVersion = 1;

/// Shortest decimal that round-trips the double.
std::string format_number(double v);

nlohmann::json fractions_json(const Fractions& f);
nlohmann::json counts_json(const CategoryCounts& c);

/// Schema version 1: version, model, dataset, divisor, accuracy{top1, top5},
/// points[{name, r, counts, fractions}], outer_equal_weight, samples[{index,
/// correct, per_point_fractions}], plus the correct/incorrect split.
nlohmann::json report_to_json(const AnalysisReport& report);

/// Rebuilds a report; throws FormatError for a missing or unknown major
/// version.
AnalysisReport report_from_json(const nlohmann::json& j);

/// Per-point aggregate table (one row per point plus the equal-weight row).
std::string points_csv(const AnalysisReport& report);

/// One row per (sample, point) plus an "all" row per sample.
std::string samples_csv(const AnalysisReport& report);

/// epsilon, top1, top5, then <point>_median/_p1/_p99 per point and for "all".
std::string sweep_csv(const SweepTable& table);

}  // namespace aliascope::cli
