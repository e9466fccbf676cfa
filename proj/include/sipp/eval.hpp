#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sipp/error.hpp"

namespace sipp {

struct LabeledPrediction {
  std::string query_id;
  std::string predicted_person;
  std::string true_person;
  double score = 0.0;

  bool correct() const noexcept { return predicted_person == true_person; }
};

struct PrecisionCoveragePoint {
  double threshold = 0.0;
  double precision = 0.0;
  double coverage = 0.0;

  friend bool operator==(const PrecisionCoveragePoint&, const PrecisionCoveragePoint&) = default;
};

struct CoverageAtPrecision {
  double coverage = 0.0;
  // +infinity when no threshold reaches the requested precision.
  double threshold = std::numeric_limits<double>::infinity();

  bool qualified() const noexcept { return std::isfinite(threshold); }
};

inline constexpr std::array<double, 4> kReportPrecisions{0.99, 0.97, 0.95, 0.90};

namespace detail {

inline void validate_predictions(std::span<const LabeledPrediction> preds) {
  if (preds.empty()) throw DataError("evaluation: no predictions");
  for (const auto& p : preds) {
    if (!(p.score > 0.0 && p.score <= 1.0)) {
      throw DataError("evaluation: score " + std::to_string(p.score) + " of query '" + p.query_id +
                      "' outside (0, 1]");
    }
  }
}

}  // namespace detail

/// One point per distinct score, thresholds descending. A prediction counts
/// as answered at threshold t when its score >= t, so equal scores enter
/// together. The result does not depend on input order.
inline std::vector<PrecisionCoveragePoint> precision_coverage_curve(std::span<const LabeledPrediction> preds) {
  detail::validate_predictions(preds);
  std::vector<const LabeledPrediction*> order;
  order.reserve(preds.size());
  for (const auto& p : preds) order.push_back(&p);
  std::stable_sort(order.begin(), order.end(), [](const LabeledPrediction* a, const LabeledPrediction* b) {
    if (a->score != b->score) return a->score > b->score;
    return a->query_id < b->query_id;
  });

  const auto n = static_cast<double>(preds.size());
  std::vector<PrecisionCoveragePoint> curve;
  std::size_t answered = 0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double t = order[i]->score;
    while (i < order.size() && order[i]->score == t) {
      ++answered;
      correct += order[i]->correct() ? 1 : 0;
      ++i;
    }
    curve.push_back({t, static_cast<double>(correct) / static_cast<double>(answered),
                     static_cast<double>(answered) / n});
  }
  return curve;
}

/// Largest coverage over thresholds whose precision is at least `precision`.
inline CoverageAtPrecision coverage_at_precision(std::span<const LabeledPrediction> preds, double precision) {
  if (!(precision > 0.0 && precision <= 1.0)) {
    throw ParamError("coverage_at_precision: precision must lie in (0, 1], got " + std::to_string(precision));
  }
  CoverageAtPrecision best;
  for (const auto& pt : precision_coverage_curve(preds)) {
    if (pt.precision >= precision) best = {pt.coverage, pt.threshold};
  }
  return best;
}

enum class Subset { kBase, kNovel };

inline const char* to_string(Subset s) noexcept { return s == Subset::kBase ? "base" : "novel"; }

struct SubsetRow {
  std::string name;
  std::size_t count = 0;
  std::vector<CoverageAtPrecision> coverage;  // parallel to SplitReport::precisions
  std::optional<double> precision;            // fraction correct; empty when count == 0
};

struct SplitReport {
  std::vector<double> precisions;
  SubsetRow all;
  SubsetRow base;
  SubsetRow novel;
};

namespace detail {

inline SubsetRow subset_row(std::string name, std::span<const LabeledPrediction> preds,
                            std::span<const double> precisions) {
  SubsetRow row;
  row.name = std::move(name);
  row.count = preds.size();
  row.coverage.resize(precisions.size());
  if (preds.empty()) return row;
  for (std::size_t i = 0; i < precisions.size(); ++i) row.coverage[i] = coverage_at_precision(preds, precisions[i]);
  std::size_t correct = 0;
  for (const auto& p : preds) correct += p.correct() ? 1 : 0;
  row.precision = static_cast<double>(correct) / static_cast<double>(preds.size());
  return row;
}

}  // namespace detail

/// Coverage at each requested precision plus overall precision, for all
/// predictions and for the base-only and novel-only subsets.
inline SplitReport split_report(std::span<const LabeledPrediction> preds, const std::map<std::string, Subset>& membership,
                                std::span<const double> precisions = kReportPrecisions) {
  detail::validate_predictions(preds);
  std::vector<LabeledPrediction> base;
  std::vector<LabeledPrediction> novel;
  for (const auto& p : preds) {
    auto it = membership.find(p.query_id);
    if (it == membership.end()) throw DataError("split_report: query '" + p.query_id + "' has no subset label");
    (it->second == Subset::kBase ? base : novel).push_back(p);
  }
  SplitReport r;
  r.precisions.assign(precisions.begin(), precisions.end());
  r.all = detail::subset_row("all", preds, precisions);
  r.base = detail::subset_row("base", base, precisions);
  r.novel = detail::subset_row("novel", novel, precisions);
  return r;
}

/// Curve CSV with columns threshold,precision,coverage.
inline void write_curve_csv(const std::filesystem::path& path, std::span<const PrecisionCoveragePoint> curve) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << "threshold,precision,coverage\n";
  char buf[96];
  for (const auto& pt : curve) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f\n", pt.threshold, pt.precision, pt.coverage);
    out << buf;
  }
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace sipp
