#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sipp/binary_io.hpp"
#include "sipp/error.hpp"
#include "sipp/flat_scan.hpp"
#include "sipp/gallery.hpp"
#include "sipp/parallel.hpp"
#include "sipp/rng.hpp"
#include "sipp/similarity.hpp"

namespace sipp {

/// Probe count that makes every query visit every bucket of every table.
inline constexpr std::uint32_t kProbeAllBuckets = std::numeric_limits<std::uint32_t>::max();

struct LshParams {
  std::uint32_t num_tables = 8;
  std::uint32_t hashes_per_table = 12;
  double bucket_width = 1.0;
  std::uint32_t probes_per_table = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_tables < 1) throw ParamError("lsh: num_tables must be >= 1");
    if (hashes_per_table < 1) throw ParamError("lsh: hashes_per_table must be >= 1");
    if (!(bucket_width > 0.0) || !std::isfinite(bucket_width)) {
      throw ParamError("lsh: bucket_width must be a positive finite number, got " + std::to_string(bucket_width));
    }
    if (probes_per_table < 1) throw ParamError("lsh: probes_per_table must be >= 1");
  }

  friend bool operator==(const LshParams&, const LshParams&) = default;
};

struct LshHit {
  std::uint32_t entry = 0;
  double score = 0.0;
};

inline constexpr std::string_view kLshMagic = "SIPL";

/// p-stable (Gaussian) LSH over the flat store of a Gallery.
///
/// Each table concatenates k hashes h(v) = floor((a.v + b) / w) with
/// a ~ N(0, I) and b ~ U[0, w) and folds them into a 64-bit bucket key.
/// Table t draws its projections from its own stream derived from the seed,
/// so the first tables of a large index equal those of a smaller one.
/// The index stores entry indices only; queries take the Gallery it was
/// built over.
class LshIndex {
 public:
  using Bucket = std::vector<std::uint32_t>;
  using Table = std::unordered_map<std::uint64_t, Bucket>;

  LshIndex() = default;

  static LshIndex build(const Gallery& g, const LshParams& params, unsigned threads = 0) {
    params.validate();
    if (g.empty()) throw DataError("build_lsh: empty gallery");
    if (g.entries().size() > std::numeric_limits<std::uint32_t>::max()) {
      throw DataError("build_lsh: gallery too large for 32-bit entry indices");
    }
    LshIndex idx;
    idx.params_ = params;
    idx.dim_ = g.dim();
    idx.n_entries_ = g.entries().size();
    idx.draw_projections();
    idx.tables_.resize(params.num_tables);

    const auto& entries = g.entries();
    parallel_for(params.num_tables, threads, [&](std::size_t t) {
      Table& table = idx.tables_[t];
      std::vector<std::int64_t> cells(params.hashes_per_table);
      std::vector<double> frac(params.hashes_per_table);
      for (std::uint32_t e = 0; e < entries.size(); ++e) {
        idx.project(t, entries[e].vector.values(), cells, frac);
        table[key_of(cells)].push_back(e);
      }
    });
    return idx;
  }

  const LshParams& params() const noexcept { return params_; }
  std::uint32_t dim() const noexcept { return dim_; }
  std::uint64_t size() const noexcept { return n_entries_; }
  const std::vector<Table>& tables() const noexcept { return tables_; }

  /// Home bucket key of `v` in every table.
  std::vector<std::uint64_t> bucket_keys(std::span<const float> v) const {
    detail::check_same_dim(dim_, v.size());
    std::vector<std::uint64_t> keys(params_.num_tables);
    std::vector<std::int64_t> cells(params_.hashes_per_table);
    std::vector<double> frac(params_.hashes_per_table);
    for (std::size_t t = 0; t < params_.num_tables; ++t) {
      project(t, v, cells, frac);
      keys[t] = key_of(cells);
    }
    return keys;
  }

  /// Distinct flat-store indices found in the probed buckets, in first-seen
  /// order. `probes` = 0 uses the configured probe count.
  std::vector<std::uint32_t> candidates(std::span<const float> q, std::uint32_t probes = 0) const {
    detail::check_same_dim(dim_, q.size());
    if (probes == 0) probes = params_.probes_per_table;
    std::vector<std::uint8_t> seen(n_entries_, 0);
    std::vector<std::uint32_t> out;
    auto take = [&](const Bucket& b) {
      for (std::uint32_t e : b) {
        if (!seen[e]) {
          seen[e] = 1;
          out.push_back(e);
        }
      }
    };

    if (probes == kProbeAllBuckets) {
      for (const auto& table : tables_) {
        for (const auto& [key, bucket] : table) take(bucket);
      }
      return out;
    }

    const std::uint32_t k = params_.hashes_per_table;
    std::vector<std::int64_t> cells(k);
    std::vector<double> frac(k);
    for (std::size_t t = 0; t < tables_.size(); ++t) {
      project(t, q, cells, frac);
      const Table& table = tables_[t];
      if (auto it = table.find(key_of(cells)); it != table.end()) take(it->second);
      if (probes > 1) {
        for_each_perturbation(cells, frac, probes - 1, [&](const std::vector<std::int64_t>& shifted) {
          if (auto it = table.find(key_of(shifted)); it != table.end()) take(it->second);
        });
      }
    }
    return out;
  }

  /// Up to `top` candidates ranked by exact similarity (descending; ties go
  /// to the smaller person id, then the smaller row).
  std::vector<LshHit> query(const Gallery& g, std::span<const float> q, std::size_t top,
                            std::uint32_t probes = 0) const {
    check_gallery(g);
    if (top == 0) throw ParamError("query_lsh: top must be positive");
    const auto cand = candidates(q, probes);
    const auto& entries = g.entries();
    std::vector<LshHit> hits;
    hits.reserve(cand.size());
    for (std::uint32_t e : cand) {
      const double d2 = detail::squared_distance_unchecked(q.data(), entries[e].vector.values().data(), q.size());
      hits.push_back({e, similarity_score_unchecked(std::sqrt(d2))});
    }
    auto better = [&](const LshHit& a, const LshHit& b) {
      return detail::better_hit(a.score, entries[a.entry].person_id, a.entry, b.score, entries[b.entry].person_id,
                                b.entry);
    };
    const std::size_t keep = std::min(top, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), better);
    hits.resize(keep);
    return hits;
  }

  void check_gallery(const Gallery& g) const {
    if (g.dim() != dim_ || g.entries().size() != n_entries_) {
      throw DataError("lsh index was built for " + std::to_string(n_entries_) + " entries of dim " +
                      std::to_string(dim_) + ", gallery has " + std::to_string(g.entries().size()) +
                      " of dim " + std::to_string(g.dim()));
    }
  }

  // -- persistence ---------------------------------------------------------
  // "SIPL", version, L, k, w (f64), probes, seed, dim, entry count,
  // projections (f64), offsets (f64), then per table the buckets sorted by key.

  void write(io::Writer& w) const {
    w.magic(kLshMagic);
    w.u32(kFormatVersion);
    w.u32(params_.num_tables);
    w.u32(params_.hashes_per_table);
    w.f64(params_.bucket_width);
    w.u32(params_.probes_per_table);
    w.u64(params_.seed);
    w.u32(dim_);
    w.u64(n_entries_);
    for (double d : directions_) w.f64(d);
    for (double b : offsets_) w.f64(b);
    for (const auto& table : tables_) {
      std::vector<std::uint64_t> keys;
      keys.reserve(table.size());
      for (const auto& kv : table) keys.push_back(kv.first);
      std::sort(keys.begin(), keys.end());
      w.u64(keys.size());
      for (std::uint64_t key : keys) {
        const auto& bucket = table.at(key);
        w.u64(key);
        w.u32(static_cast<std::uint32_t>(bucket.size()));
        for (std::uint32_t e : bucket) w.u32(e);
      }
    }
  }

  static LshIndex read(io::Reader& r) {
    r.expect_magic(kLshMagic);
    const std::uint32_t version = r.u32();
    if (version != kFormatVersion) throw DataError("unsupported lsh section version " + std::to_string(version));
    LshIndex idx;
    idx.params_.num_tables = r.u32();
    idx.params_.hashes_per_table = r.u32();
    idx.params_.bucket_width = r.f64();
    idx.params_.probes_per_table = r.u32();
    idx.params_.seed = r.u64();
    try {
      idx.params_.validate();
    } catch (const ParamError& ex) {
      throw DataError(std::string("lsh section: ") + ex.what());
    }
    idx.dim_ = r.u32();
    idx.n_entries_ = r.u64();
    const std::size_t n_proj = std::size_t{idx.params_.num_tables} * idx.params_.hashes_per_table;
    idx.directions_.resize(n_proj * idx.dim_);
    idx.offsets_.resize(n_proj);
    for (double& d : idx.directions_) d = r.f64();
    for (double& b : idx.offsets_) b = r.f64();
    idx.tables_.resize(idx.params_.num_tables);
    for (std::size_t t = 0; t < idx.tables_.size(); ++t) {
      std::vector<std::uint8_t> present(idx.n_entries_, 0);
      std::uint64_t total = 0;
      const std::uint64_t n_buckets = r.u64();
      for (std::uint64_t b = 0; b < n_buckets; ++b) {
        const std::uint64_t key = r.u64();
        const std::uint32_t n = r.u32();
        Bucket bucket(n);
        for (auto& e : bucket) {
          e = r.u32();
          if (e >= idx.n_entries_ || present[e]) {
            throw DataError("lsh table " + std::to_string(t) + ": bad or repeated entry index " + std::to_string(e) +
                            " before byte offset " + std::to_string(r.offset()));
          }
          present[e] = 1;
        }
        total += n;
        if (!idx.tables_[t].emplace(key, std::move(bucket)).second) {
          throw DataError("lsh table " + std::to_string(t) + ": duplicate bucket key");
        }
      }
      if (total != idx.n_entries_) {
        throw DataError("lsh table " + std::to_string(t) + " indexes " + std::to_string(total) + " of " +
                        std::to_string(idx.n_entries_) + " entries");
      }
    }
    return idx;
  }

  friend bool operator==(const LshIndex&, const LshIndex&) = default;

 private:
  void draw_projections() {
    const std::uint32_t L = params_.num_tables;
    const std::uint32_t k = params_.hashes_per_table;
    directions_.assign(std::size_t{L} * k * dim_, 0.0);
    offsets_.assign(std::size_t{L} * k, 0.0);
    for (std::uint32_t t = 0; t < L; ++t) {
      Rng rng = Rng::derive(params_.seed, t);
      for (std::uint32_t j = 0; j < k; ++j) {
        double* a = &directions_[(std::size_t{t} * k + j) * dim_];
        for (std::uint32_t d = 0; d < dim_; ++d) a[d] = rng.normal();
        offsets_[std::size_t{t} * k + j] = rng.uniform() * params_.bucket_width;
      }
    }
  }

  // Cell coordinates and fractional position in [0, 1) of v in table t.
  void project(std::size_t t, std::span<const float> v, std::vector<std::int64_t>& cells,
               std::vector<double>& frac) const {
    const std::uint32_t k = params_.hashes_per_table;
    for (std::uint32_t j = 0; j < k; ++j) {
      const std::size_t row = t * k + j;
      const double* a = &directions_[row * dim_];
      double dot = 0.0;
      for (std::uint32_t d = 0; d < dim_; ++d) dot += a[d] * static_cast<double>(v[d]);
      const double x = (dot + offsets_[row]) / params_.bucket_width;
      const double cell = std::floor(x);
      cells[j] = static_cast<std::int64_t>(cell);
      frac[j] = x - cell;
    }
  }

  static std::uint64_t key_of(const std::vector<std::int64_t>& cells) noexcept {
    std::uint64_t key = 0x243f6a8885a308d3ULL;
    for (std::int64_t c : cells) key = splitmix64_mix(key ^ (static_cast<std::uint64_t>(c) + 0x9e3779b97f4a7c15ULL));
    return key;
  }

  /// Visits up to `limit` perturbed cell vectors in increasing order of
  /// squared distance to the bucket boundaries crossed (query-directed
  /// multiprobe: single +-1 steps are ranked by boundary distance and
  /// combined via shift/expand on a min-heap).
  template <typename Visit>
  static void for_each_perturbation(const std::vector<std::int64_t>& cells, const std::vector<double>& frac,
                                    std::uint32_t limit, Visit&& visit) {
    struct Step {
      double cost;
      std::uint32_t coord;
      int delta;
    };
    const std::size_t k = cells.size();
    std::vector<Step> steps;
    steps.reserve(2 * k);
    for (std::uint32_t j = 0; j < k; ++j) {
      steps.push_back({frac[j] * frac[j], j, -1});
      steps.push_back({(1.0 - frac[j]) * (1.0 - frac[j]), j, +1});
    }
    std::stable_sort(steps.begin(), steps.end(), [](const Step& a, const Step& b) { return a.cost < b.cost; });

    using Set = std::vector<std::uint16_t>;  // ascending positions into steps
    using Node = std::pair<double, Set>;
    auto worse = [](const Node& a, const Node& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second > b.second;
    };
    std::priority_queue<Node, std::vector<Node>, decltype(worse)> heap(worse);
    heap.push({steps[0].cost, Set{0}});

    std::vector<std::int64_t> shifted(cells);
    std::vector<std::uint8_t> used(k, 0);
    std::uint32_t emitted = 0;
    while (emitted < limit && !heap.empty()) {
      Node node = heap.top();
      heap.pop();
      const Set& set = node.second;
      const std::uint16_t last = set.back();
      if (last + 1u < steps.size()) {
        Set shift = set;
        shift.back() = static_cast<std::uint16_t>(last + 1);
        heap.push({node.first - steps[last].cost + steps[last + 1].cost, std::move(shift)});
        Set expand = set;
        expand.push_back(static_cast<std::uint16_t>(last + 1));
        heap.push({node.first + steps[last + 1].cost, std::move(expand)});
      }

      bool valid = true;
      std::fill(used.begin(), used.end(), 0);
      for (std::uint16_t p : set) {
        if (used[steps[p].coord]++) {
          valid = false;
          break;
        }
      }
      if (!valid) continue;
      shifted = cells;
      for (std::uint16_t p : set) shifted[steps[p].coord] += steps[p].delta;
      visit(shifted);
      ++emitted;
    }
  }

  LshParams params_;
  std::uint32_t dim_ = 0;
  std::uint64_t n_entries_ = 0;
  std::vector<double> directions_;
  std::vector<double> offsets_;
  std::vector<Table> tables_;
};

// ---------------------------------------------------------------------------
// Gallery file with an optional trailing LSH section.

struct GalleryBundle {
  Gallery gallery;
  std::optional<LshIndex> lsh;
};

inline void save_gallery(const Gallery& g, const LshIndex* lsh, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  io::Writer w(out);
  write_gallery(w, g);
  if (lsh != nullptr) {
    lsh->check_gallery(g);
    lsh->write(w);
  }
}

inline GalleryBundle load_gallery_bundle(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  io::Reader r(in);
  try {
    GalleryBundle b{read_gallery(r), std::nullopt};
    if (!r.at_end()) {
      b.lsh = LshIndex::read(r);
      b.lsh->check_gallery(b.gallery);
      if (!r.at_end()) throw DataError("trailing bytes after lsh section at byte offset " + std::to_string(r.offset()));
    }
    return b;
  } catch (const DataError& ex) {
    throw DataError(path.string() + ": " + ex.what());
  }
}

// ---------------------------------------------------------------------------
// Parameter tuning against the exhaustive oracle.

struct LshTuneGrid {
  std::vector<std::uint32_t> tables{4, 8, 16};
  std::vector<std::uint32_t> hashes{8, 12, 16};
  std::vector<double> width_multipliers{1.0, 2.0, 4.0};
  std::vector<std::uint32_t> probes{1, 4, 16};
};

struct LshTrial {
  LshParams params;
  double recall = 0.0;
};

struct LshTuneResult {
  LshParams params;
  double recall = 0.0;
  double median_distance = 0.0;
  std::vector<LshTrial> trials;  // every grid point evaluated, in cost order
};

/// Median distance over `pairs` random pairs of flat-store entries.
inline double estimate_median_distance(const Gallery& g, std::size_t pairs, std::uint64_t seed) {
  const auto& entries = g.entries();
  if (entries.size() < 2) return 1.0;
  Rng rng = Rng::derive(seed, 0x6d656469616eULL);
  std::vector<double> d;
  d.reserve(pairs);
  while (d.size() < pairs) {
    const auto i = rng.below(entries.size());
    const auto j = rng.below(entries.size());
    if (i == j) continue;
    d.push_back(euclidean_distance(entries[i].vector, entries[j].vector));
  }
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2), d.end());
  const double m = d[d.size() / 2];
  return m > 0.0 ? m : 1.0;
}

/// Fraction of queries whose LSH top-1 score equals the exhaustive top-1
/// score. Scores come from the same kernel, so equality is exact; equal
/// scores from duplicate vectors count as a hit.
inline double measure_recall(const Gallery& g, const LshIndex& idx, std::span<const FeatureVector> queries,
                             std::span<const double> exact_best, std::uint32_t probes = 0, unsigned threads = 0) {
  if (queries.empty()) return 0.0;
  std::vector<std::uint8_t> hit(queries.size(), 0);
  parallel_for(queries.size(), threads, [&](std::size_t i) {
    const auto top = idx.query(g, queries[i].values(), 1, probes);
    hit[i] = !top.empty() && top.front().score == exact_best[i];
  });
  std::size_t n = 0;
  for (auto h : hit) n += h;
  return static_cast<double>(n) / static_cast<double>(queries.size());
}

inline std::vector<double> exact_best_scores(const Gallery& g, std::span<const FeatureVector> queries,
                                             unsigned threads = 0) {
  std::vector<double> best(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t i) { best[i] = scan_entries(g, queries[i].values()).score; });
  return best;
}

/// Cheapest grid point (smallest tables x probes, then fewest hashes, then
/// narrowest width, then fewest tables) whose top-1 recall on `validation`
/// reaches `target_recall`. Bucket widths are multiples of the median
/// pairwise distance of the flat store.
inline LshTuneResult tune_lsh(const Gallery& g, std::span<const FeatureVector> validation, double target_recall = 0.98,
                              std::uint64_t seed = 0, const LshTuneGrid& grid = {}, unsigned threads = 0) {
  if (g.empty()) throw DataError("tune_lsh: empty gallery");
  if (validation.size() < 100) {
    throw ParamError("tune_lsh: need at least 100 validation queries, got " + std::to_string(validation.size()));
  }
  if (!(target_recall >= 0.0 && target_recall <= 1.0)) throw ParamError("tune_lsh: target recall must be in [0, 1]");
  if (grid.tables.empty() || grid.hashes.empty() || grid.width_multipliers.empty() || grid.probes.empty()) {
    throw ParamError("tune_lsh: empty grid axis");
  }
  for (const auto& q : validation) detail::check_same_dim(g.dim(), q.dim());

  LshTuneResult result;
  result.median_distance = estimate_median_distance(g, 1000, seed);

  std::vector<LshParams> points;
  for (auto L : grid.tables)
    for (auto k : grid.hashes)
      for (double m : grid.width_multipliers)
        for (auto p : grid.probes) points.push_back({L, k, m * result.median_distance, p, seed});
  auto cost = [](const LshParams& p) {
    const std::uint64_t work = p.probes_per_table == kProbeAllBuckets
                                   ? std::numeric_limits<std::uint64_t>::max()
                                   : std::uint64_t{p.num_tables} * p.probes_per_table;
    return std::make_tuple(work, p.hashes_per_table, p.bucket_width, p.num_tables);
  };
  std::stable_sort(points.begin(), points.end(),
                   [&](const LshParams& a, const LshParams& b) { return cost(a) < cost(b); });

  const auto exact = exact_best_scores(g, validation, threads);

  // Probing is a query-time knob, so one build serves every probe count.
  // The cache is bounded since a wide grid over a large store would not fit.
  constexpr std::size_t kMaxCachedBuilds = 6;
  std::map<std::tuple<std::uint32_t, std::uint32_t, double>, LshIndex> built;
  double best_recall = -1.0;
  for (const auto& p : points) {
    const auto key = std::make_tuple(p.num_tables, p.hashes_per_table, p.bucket_width);
    auto it = built.find(key);
    if (it == built.end()) {
      if (built.size() >= kMaxCachedBuilds) built.erase(built.begin());
      it = built.emplace(key, LshIndex::build(g, p, threads)).first;
    }
    const double recall = measure_recall(g, it->second, validation, exact, p.probes_per_table, threads);
    result.trials.push_back({p, recall});
    best_recall = std::max(best_recall, recall);
    if (recall >= target_recall) {
      result.params = p;
      result.recall = recall;
      return result;
    }
  }
  throw TuningError("tune_lsh: no grid point reached recall " + std::to_string(target_recall) + " (best " +
                        std::to_string(best_recall) + ")",
                    best_recall);
}

}  // namespace sipp
