#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sipp/error.hpp"
#include "sipp/flat_scan.hpp"
#include "sipp/gallery.hpp"
#include "sipp/lsh_index.hpp"
#include "sipp/parallel.hpp"
#include "sipp/similarity.hpp"

namespace sipp {

/// Which search produced a result.
enum class SearchKind { kBrute, kMean, kMeanBrute, kMeanLsh };

/// The five end-to-end strategies, from the no-augmentation baseline up to
/// mean search fused with LSH.
enum class Strategy { kBase0, kSvdBrute, kMean, kMeanBrute, kMeanLsh };

inline constexpr std::array<Strategy, 5> kAllStrategies{Strategy::kBase0, Strategy::kSvdBrute, Strategy::kMean,
                                                        Strategy::kMeanBrute, Strategy::kMeanLsh};

inline std::string_view strategy_name(Strategy s) noexcept {
  switch (s) {
    case Strategy::kBase0:
      return "base0";
    case Strategy::kSvdBrute:
      return "svd-brute";
    case Strategy::kMean:
      return "mean";
    case Strategy::kMeanBrute:
      return "mean-brute";
    case Strategy::kMeanLsh:
      return "mean-lsh";
  }
  return "?";
}

inline Strategy parse_strategy(std::string_view name) {
  for (Strategy s : kAllStrategies) {
    if (strategy_name(s) == name) return s;
  }
  throw ParamError("unknown strategy '" + std::string(name) + "'");
}

struct SearchResult {
  std::string person_id;
  double score = 0.0;
  SearchKind kind = SearchKind::kBrute;

  friend bool operator==(const SearchResult&, const SearchResult&) = default;
};

/// Margin T of the fusion rule.
class FusionThreshold {
 public:
  static constexpr double kDefault = 0.03;

  constexpr FusionThreshold() = default;
  explicit FusionThreshold(double t) : value_(t) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw ParamError("fusion threshold T must be finite and >= 0");
  }
  constexpr double value() const noexcept { return value_; }

 private:
  double value_ = kDefault;
};

namespace detail {

inline void require_nonempty(const Gallery& g) {
  if (g.empty()) throw DataError("search: empty gallery");
}

}  // namespace detail

/// Best single image. Augmented vectors are skipped unless
/// `include_augmented` is set; a person enrolled only through augmented
/// vectors is then unreachable.
inline SearchResult brute_force_search(const Gallery& g, std::span<const float> q, bool include_augmented) {
  detail::require_nonempty(g);
  const ScanHit hit = include_augmented ? scan_entries(g, q) : scan_entries(g, q, [](const GalleryEntry& e) {
    return e.source != Source::kNovelAugmented;
  });
  if (!hit.found()) throw DataError("brute_force_search: no eligible entries");
  return {g.entries()[hit.index].person_id, hit.score, SearchKind::kBrute};
}

inline SearchResult mean_search(const Gallery& g, std::span<const float> q) {
  detail::check_same_dim(g.dim(), q.size());
  if (g.means().empty()) throw DataError("mean_search: empty mean store");
  const ScanHit hit = scan_means(g, q);
  return {g.means()[hit.index].person_id, hit.score, SearchKind::kMean};
}

/// Rule-based fusion of a mean-search result (s1, id1) with a per-image
/// result (s2, id2):
///   same id            -> max(s1, s2), id1
///   s2 > s1 + T        -> s2, id2
///   s2 < s1 - T        -> s1, id1
///   otherwise          -> min(s1, s2), id1   (closed interval)
inline SearchResult fuse(double s1, const std::string& id1, double s2, const std::string& id2, FusionThreshold t,
                         SearchKind kind = SearchKind::kMeanBrute) {
  if (!(s1 > 0.0 && s1 <= 1.0) || !(s2 > 0.0 && s2 <= 1.0)) {
    throw ParamError("fuse: scores must lie in (0, 1], got " + std::to_string(s1) + " and " + std::to_string(s2));
  }
  const double T = t.value();
  if (id1 == id2) return {id1, std::max(s1, s2), kind};
  if (s2 > s1 + T) return {id2, s2, kind};
  if (s2 < s1 - T) return {id1, s1, kind};
  return {id1, std::min(s1, s2), kind};
}

inline SearchResult fuse(const SearchResult& mean, const SearchResult& per_image, FusionThreshold t,
                         SearchKind kind = SearchKind::kMeanBrute) {
  return fuse(mean.score, mean.person_id, per_image.score, per_image.person_id, t, kind);
}

enum class Backend { kBrute, kLsh };

/// Per-image half of the combined search: the top-1 from LSH, or from the
/// full flat store (augmented included) when no LSH candidate is found.
inline SearchResult per_image_search(const Gallery& g, std::span<const float> q, Backend backend,
                                     const LshIndex* lsh) {
  if (backend == Backend::kLsh) {
    if (lsh == nullptr) throw ParamError("search: lsh backend requested but no index is loaded");
    const auto top = lsh->query(g, q, 1);
    if (!top.empty()) return {g.entries()[top.front().entry].person_id, top.front().score, SearchKind::kBrute};
  }
  return brute_force_search(g, q, true);
}

inline SearchResult search_combined(const Gallery& g, std::span<const float> q, Backend backend,
                                    const LshIndex* lsh = nullptr, FusionThreshold t = {}) {
  if (backend == Backend::kLsh && lsh == nullptr) {
    throw ParamError("search: lsh backend requested but no index is loaded");
  }
  const SearchResult m = mean_search(g, q);
  const SearchResult p = per_image_search(g, q, backend, lsh);
  return fuse(m, p, t, backend == Backend::kLsh ? SearchKind::kMeanLsh : SearchKind::kMeanBrute);
}

inline SearchResult search(const Gallery& g, std::span<const float> q, Strategy s, const LshIndex* lsh = nullptr,
                           FusionThreshold t = {}) {
  switch (s) {
    case Strategy::kBase0:
      return brute_force_search(g, q, false);
    case Strategy::kSvdBrute:
      return brute_force_search(g, q, true);
    case Strategy::kMean:
      return mean_search(g, q);
    case Strategy::kMeanBrute:
      return search_combined(g, q, Backend::kBrute, lsh, t);
    case Strategy::kMeanLsh:
      return search_combined(g, q, Backend::kLsh, lsh, t);
  }
  throw ParamError("search: unknown strategy");
}

/// Runs one strategy over many queries; result i belongs to query i
/// regardless of how the work is split across threads.
inline std::vector<SearchResult> search_batch(const Gallery& g, std::span<const FeatureVector> queries, Strategy s,
                                              const LshIndex* lsh = nullptr, FusionThreshold t = {},
                                              unsigned threads = 0) {
  if (s == Strategy::kMeanLsh && lsh == nullptr) {
    throw ParamError("search: strategy mean-lsh needs an lsh index");
  }
  std::vector<SearchResult> out(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t i) { out[i] = search(g, queries[i].values(), s, lsh, t); });
  return out;
}

// ---------------------------------------------------------------------------
// Prediction CSV: query_image_id,person_id,score (score with 6 decimals).

struct Prediction {
  std::string query_id;
  std::string person_id;
  double score = 0.0;
};

inline std::string format_score(double score) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", score);
  return buf;
}

inline void write_predictions_csv(const std::filesystem::path& path, std::span<const std::string> query_ids,
                                  std::span<const SearchResult> results) {
  if (query_ids.size() != results.size()) throw ParamError("write_predictions_csv: ids and results differ in length");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << "query_image_id,person_id,score\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    out << query_ids[i] << ',' << results[i].person_id << ',' << format_score(results[i].score) << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

inline std::vector<Prediction> read_predictions_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<Prediction> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("query_image_id,", 0) == 0) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c2 == std::string::npos) throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 3 columns");
    Prediction p{line.substr(0, c1), line.substr(c1 + 1, c2 - c1 - 1), 0.0};
    const std::string score = line.substr(c2 + 1);
    try {
      std::size_t used = 0;
      p.score = std::stod(score, &used);
      if (used != score.size()) throw std::invalid_argument(score);
    } catch (const std::exception&) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad score '" + score + "'");
    }
    rows.push_back(std::move(p));
  }
  return rows;
}

}  // namespace sipp
