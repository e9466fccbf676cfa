#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>

#include "sipp/error.hpp"
#include "sipp/gallery.hpp"
#include "sipp/similarity.hpp"

namespace sipp {

/// Best match found by an exhaustive scan.
struct ScanHit {
  std::size_t index = std::numeric_limits<std::size_t>::max();
  double score = 0.0;

  bool found() const noexcept { return index != std::numeric_limits<std::size_t>::max(); }
};

namespace detail {

// Candidate a beats incumbent b: higher score, then smaller person id, then
// smaller row index.
inline bool better_hit(double score_a, const std::string& person_a, std::size_t idx_a, double score_b,
                       const std::string& person_b, std::size_t idx_b) noexcept {
  if (score_a != score_b) return score_a > score_b;
  if (person_a != person_b) return person_a < person_b;
  return idx_a < idx_b;
}

}  // namespace detail

/// Exhaustive argmax of similarity over the flat store. Entries rejected by
/// `accept` are skipped.
template <typename Accept>
ScanHit scan_entries(const Gallery& g, std::span<const float> q, Accept&& accept) {
  detail::check_same_dim(g.dim(), q.size());
  const auto& entries = g.entries();
  ScanHit best;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (!accept(e)) continue;
    const double d2 = detail::squared_distance_unchecked(q.data(), e.vector.values().data(), q.size());
    const double s = similarity_score_unchecked(std::sqrt(d2));
    if (!best.found() ||
        detail::better_hit(s, e.person_id, i, best.score, entries[best.index].person_id, best.index)) {
      best = {i, s};
    }
  }
  return best;
}

inline ScanHit scan_entries(const Gallery& g, std::span<const float> q) {
  return scan_entries(g, q, [](const GalleryEntry&) { return true; });
}

/// Best hit over the whole flat store and best hit over non-augmented
/// entries, from one pass. Equivalent to two scan_entries calls.
struct SplitScanHit {
  ScanHit all;
  ScanHit originals;
};

inline SplitScanHit scan_entries_split(const Gallery& g, std::span<const float> q) {
  detail::check_same_dim(g.dim(), q.size());
  const auto& entries = g.entries();
  SplitScanHit best;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const double d2 = detail::squared_distance_unchecked(q.data(), e.vector.values().data(), q.size());
    const double s = similarity_score_unchecked(std::sqrt(d2));
    if (!best.all.found() ||
        detail::better_hit(s, e.person_id, i, best.all.score, entries[best.all.index].person_id, best.all.index)) {
      best.all = {i, s};
    }
    if (e.source != Source::kNovelAugmented &&
        (!best.originals.found() || detail::better_hit(s, e.person_id, i, best.originals.score,
                                                       entries[best.originals.index].person_id,
                                                       best.originals.index))) {
      best.originals = {i, s};
    }
  }
  return best;
}

/// Exhaustive argmax of similarity over the mean store.
inline ScanHit scan_means(const Gallery& g, std::span<const float> q) {
  detail::check_same_dim(g.dim(), q.size());
  const auto& means = g.means();
  ScanHit best;
  for (std::size_t i = 0; i < means.size(); ++i) {
    const double d2 = detail::squared_distance_unchecked(q.data(), means[i].mean.values().data(), q.size());
    const double s = similarity_score_unchecked(std::sqrt(d2));
    // Means are sorted by person id, so a strict comparison keeps the
    // smallest id on ties.
    if (!best.found() || s > best.score) best = {i, s};
  }
  return best;
}

}  // namespace sipp
