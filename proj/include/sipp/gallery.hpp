#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sipp/binary_io.hpp"
#include "sipp/error.hpp"
#include "sipp/similarity.hpp"

namespace sipp {

enum class Source : std::uint8_t { kBase = 0, kNovelOriginal = 1, kNovelAugmented = 2 };

inline const char* to_string(Source s) noexcept {
  switch (s) {
    case Source::kBase:
      return "base";
    case Source::kNovelOriginal:
      return "novel_original";
    case Source::kNovelAugmented:
      return "novel_augmented";
  }
  return "unknown";
}

/// One row of the flat store.
struct GalleryEntry {
  std::string person_id;
  std::string image_id;
  Source source = Source::kBase;
  FeatureVector vector;

  friend bool operator==(const GalleryEntry&, const GalleryEntry&) = default;
};

/// Mean of every vector enrolled for one person.
struct PersonMean {
  std::string person_id;
  FeatureVector mean;
  std::uint32_t count = 0;

  friend bool operator==(const PersonMean&, const PersonMean&) = default;
};

/// Records of a feature file together with the header dimension.
struct FeatureSet {
  std::uint32_t dim = 0;
  std::vector<GalleryEntry> entries;
};

inline constexpr std::string_view kFeatureMagic = "SIPF";
inline constexpr std::string_view kGalleryMagic = "SIPG";
inline constexpr std::uint32_t kFormatVersion = 1;

inline PersonMean compute_person_mean(std::span<const GalleryEntry> entries) {
  if (entries.empty()) throw DataError("compute_person_mean: no entries");
  const std::string& person = entries.front().person_id;
  const std::size_t dim = entries.front().vector.dim();
  std::vector<double> sum(dim, 0.0);
  for (const auto& e : entries) {
    if (e.person_id != person) {
      throw DataError("compute_person_mean: mixed person ids '" + person + "' and '" + e.person_id + "'");
    }
    detail::check_same_dim(dim, e.vector.dim());
    const auto v = e.vector.values();
    for (std::size_t i = 0; i < dim; ++i) sum[i] += v[i];
  }
  std::vector<float> mean(dim);
  const auto n = static_cast<double>(entries.size());
  for (std::size_t i = 0; i < dim; ++i) mean[i] = static_cast<float>(sum[i] / n);
  return PersonMean{person, FeatureVector(std::move(mean)), static_cast<std::uint32_t>(entries.size())};
}

/// Flat per-image store plus per-person mean store. Immutable once built.
class Gallery {
 public:
  Gallery() = default;

  /// Assembles a gallery from already computed parts, checking every
  /// structural invariant. Means are sorted by person id.
  static Gallery from_parts(std::uint32_t dim, std::vector<GalleryEntry> entries, std::vector<PersonMean> means) {
    Gallery g;
    g.dim_ = dim;
    g.entries_ = std::move(entries);
    g.means_ = std::move(means);
    g.check_invariants();
    return g;
  }

  std::uint32_t dim() const noexcept { return dim_; }
  const std::vector<GalleryEntry>& entries() const noexcept { return entries_; }
  const std::vector<PersonMean>& means() const noexcept { return means_; }
  bool empty() const noexcept { return entries_.empty(); }

  const PersonMean* find_mean(const std::string& person) const {
    auto it = std::lower_bound(means_.begin(), means_.end(), person,
                               [](const PersonMean& m, const std::string& p) { return m.person_id < p; });
    if (it == means_.end() || it->person_id != person) return nullptr;
    return &*it;
  }

  /// Recomputes every mean from the flat store and returns the largest
  /// elementwise relative deviation from the stored means.
  double mean_recompute_deviation() const {
    std::map<std::string, std::vector<GalleryEntry>> by_person;
    for (const auto& e : entries_) by_person[e.person_id].push_back(e);
    double worst = 0.0;
    for (const auto& [person, list] : by_person) {
      const PersonMean fresh = compute_person_mean(list);
      const PersonMean* stored = find_mean(person);
      if (stored == nullptr) return INFINITY;
      for (std::size_t i = 0; i < dim_; ++i) {
        const double a = fresh.mean[i];
        const double b = stored->mean[i];
        const double scale = std::max({std::abs(a), std::abs(b), 1e-30});
        worst = std::max(worst, std::abs(a - b) / scale);
      }
    }
    return worst;
  }

  friend bool operator==(const Gallery&, const Gallery&) = default;

 private:
  void check_invariants() {
    if (dim_ == 0) throw DataError("gallery dimension must be positive");
    std::set<std::pair<std::string, std::string>> seen;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      if (e.vector.dim() != dim_) {
        throw DataError("entry " + std::to_string(i) + ": dim " + std::to_string(e.vector.dim()) +
                        " does not match gallery dim " + std::to_string(dim_));
      }
      if (!seen.emplace(e.person_id, e.image_id).second) {
        throw DataError("entry " + std::to_string(i) + ": duplicate (person_id, image_id) ('" + e.person_id + "', '" +
                        e.image_id + "')");
      }
    }
    std::sort(means_.begin(), means_.end(),
              [](const PersonMean& a, const PersonMean& b) { return a.person_id < b.person_id; });
    for (std::size_t i = 0; i < means_.size(); ++i) {
      if (i > 0 && means_[i].person_id == means_[i - 1].person_id) {
        throw DataError("duplicate mean for person '" + means_[i].person_id + "'");
      }
      if (means_[i].mean.dim() != dim_) throw DataError("mean for '" + means_[i].person_id + "' has wrong dim");
      if (means_[i].count == 0) throw DataError("mean for '" + means_[i].person_id + "' has zero count");
    }
    std::set<std::string> persons;
    for (const auto& e : entries_) persons.insert(e.person_id);
    if (persons.size() != means_.size()) {
      throw DataError("gallery has " + std::to_string(persons.size()) + " persons but " +
                      std::to_string(means_.size()) + " means");
    }
    for (const auto& p : persons) {
      if (find_mean(p) == nullptr) throw DataError("person '" + p + "' has no mean");
    }
  }

  std::uint32_t dim_ = 0;
  std::vector<GalleryEntry> entries_;
  std::vector<PersonMean> means_;
};

/// Flat store = base followed by novel; one mean per person over all of
/// that person's vectors (for novel persons: original plus augmented).
inline Gallery build_gallery(std::vector<GalleryEntry> base, std::vector<GalleryEntry> novel) {
  if (base.empty() && novel.empty()) throw DataError("build_gallery: no entries");
  const std::size_t dim = !base.empty() ? base.front().vector.dim() : novel.front().vector.dim();

  std::set<std::string> base_persons;
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (base[i].vector.dim() != dim) {
      throw DataError("base entry " + std::to_string(i) + ": dim mismatch " + std::to_string(base[i].vector.dim()) +
                      " vs " + std::to_string(dim));
    }
    if (base[i].source != Source::kBase) throw DataError("base entry " + std::to_string(i) + " is not tagged base");
    base_persons.insert(base[i].person_id);
  }
  for (std::size_t i = 0; i < novel.size(); ++i) {
    if (novel[i].vector.dim() != dim) {
      throw DataError("novel entry " + std::to_string(i) + ": dim mismatch " +
                      std::to_string(novel[i].vector.dim()) + " vs " + std::to_string(dim));
    }
    if (novel[i].source == Source::kBase) throw DataError("novel entry " + std::to_string(i) + " is tagged base");
    if (base_persons.contains(novel[i].person_id)) {
      throw DataError("person '" + novel[i].person_id + "' appears in both base and novel inputs");
    }
  }

  std::vector<GalleryEntry> entries = std::move(base);
  entries.insert(entries.end(), std::make_move_iterator(novel.begin()), std::make_move_iterator(novel.end()));

  // Accumulate per person in entry order so the result is identical to
  // compute_person_mean over that person's entries.
  std::map<std::string, std::pair<std::vector<double>, std::uint32_t>> acc;
  for (const auto& e : entries) {
    auto& [sum, count] = acc[e.person_id];
    if (sum.empty()) sum.assign(dim, 0.0);
    const auto v = e.vector.values();
    for (std::size_t i = 0; i < dim; ++i) sum[i] += v[i];
    ++count;
  }
  std::vector<PersonMean> means;
  means.reserve(acc.size());
  for (auto& [person, sc] : acc) {
    const auto& [sum, count] = sc;
    std::vector<float> mean(dim);
    for (std::size_t i = 0; i < dim; ++i) mean[i] = static_cast<float>(sum[i] / static_cast<double>(count));
    means.push_back(PersonMean{person, FeatureVector(std::move(mean)), count});
  }
  return Gallery::from_parts(static_cast<std::uint32_t>(dim), std::move(entries), std::move(means));
}

// ---------------------------------------------------------------------------
// Feature file: "SIPF", version u32, dim u32, count u64, then records of
// person_id (u16 + bytes), image_id (u16 + bytes), source u8, dim x f32.

namespace detail {

inline void write_header(io::Writer& w, std::string_view magic, std::uint32_t dim, std::uint64_t count) {
  w.magic(magic);
  w.u32(kFormatVersion);
  w.u32(dim);
  w.u64(count);
}

inline std::pair<std::uint32_t, std::uint64_t> read_header(io::Reader& r, std::string_view magic) {
  r.expect_magic(magic);
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion) {
    throw DataError("unsupported format version " + std::to_string(version) + " (expected " +
                    std::to_string(kFormatVersion) + ")");
  }
  const std::uint32_t dim = r.u32();
  const std::uint64_t count = r.u64();
  if (dim == 0) throw DataError("header dim is zero");
  return {dim, count};
}

inline void write_entry(io::Writer& w, const GalleryEntry& e) {
  w.short_string(e.person_id);
  w.short_string(e.image_id);
  w.u8(static_cast<std::uint8_t>(e.source));
  w.f32s(e.vector.values());
}

inline GalleryEntry read_entry(io::Reader& r, std::uint32_t dim) {
  GalleryEntry e;
  e.person_id = r.short_string();
  e.image_id = r.short_string();
  const std::uint8_t src = r.u8();
  if (src > 2) throw DataError("invalid source tag " + std::to_string(src));
  e.source = static_cast<Source>(src);
  std::vector<float> values(dim);
  r.f32s(values);
  e.vector = FeatureVector(std::move(values));
  return e;
}

// Reads `count` records, wrapping failures with the record index.
inline std::vector<GalleryEntry> read_entries(io::Reader& r, std::uint32_t dim, std::uint64_t count) {
  std::vector<GalleryEntry> entries;
  entries.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
  std::set<std::pair<std::string, std::string>> seen;
  for (std::uint64_t i = 0; i < count; ++i) {
    try {
      entries.push_back(read_entry(r, dim));
    } catch (const DataError& ex) {
      throw DataError("record " + std::to_string(i) + ": " + ex.what());
    }
    const auto& e = entries.back();
    if (!seen.emplace(e.person_id, e.image_id).second) {
      throw DataError("record " + std::to_string(i) + ": duplicate (person_id, image_id) ('" + e.person_id + "', '" +
                      e.image_id + "')");
    }
  }
  return entries;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  return out;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

}  // namespace detail

inline void write_features(std::ostream& out, std::uint32_t dim, std::span<const GalleryEntry> entries) {
  io::Writer w(out);
  detail::write_header(w, kFeatureMagic, dim, entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].vector.dim() != dim) {
      throw DataError("record " + std::to_string(i) + ": dim " + std::to_string(entries[i].vector.dim()) +
                      " does not match header dim " + std::to_string(dim));
    }
    detail::write_entry(w, entries[i]);
  }
}

inline void write_features(const std::filesystem::path& path, std::uint32_t dim,
                           std::span<const GalleryEntry> entries) {
  auto out = detail::open_out(path);
  write_features(out, dim, entries);
}

inline FeatureSet read_features(std::istream& in) {
  io::Reader r(in);
  const auto [dim, count] = detail::read_header(r, kFeatureMagic);
  FeatureSet fs;
  fs.dim = dim;
  fs.entries = detail::read_entries(r, dim, count);
  return fs;
}

inline FeatureSet load_features(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  try {
    return read_features(in);
  } catch (const DataError& ex) {
    throw DataError(path.string() + ": " + ex.what());
  }
}

// ---------------------------------------------------------------------------
// Gallery file: "SIPG" header (count = entry count), entries, then a u64
// mean count followed by (person_id, count u32, mean vector) records.

inline void write_gallery(io::Writer& w, const Gallery& g) {
  detail::write_header(w, kGalleryMagic, g.dim(), g.entries().size());
  for (const auto& e : g.entries()) detail::write_entry(w, e);
  w.u64(g.means().size());
  for (const auto& m : g.means()) {
    w.short_string(m.person_id);
    w.u32(m.count);
    w.f32s(m.mean.values());
  }
}

inline Gallery read_gallery(io::Reader& r) {
  const auto [dim, count] = detail::read_header(r, kGalleryMagic);
  auto entries = detail::read_entries(r, dim, count);
  const std::uint64_t n_means = r.u64();
  std::vector<PersonMean> means;
  means.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n_means, 1u << 20)));
  for (std::uint64_t i = 0; i < n_means; ++i) {
    try {
      PersonMean m;
      m.person_id = r.short_string();
      m.count = r.u32();
      std::vector<float> values(dim);
      r.f32s(values);
      m.mean = FeatureVector(std::move(values));
      means.push_back(std::move(m));
    } catch (const DataError& ex) {
      throw DataError("mean record " + std::to_string(i) + ": " + ex.what());
    }
  }
  return Gallery::from_parts(dim, std::move(entries), std::move(means));
}

inline void save_gallery(const Gallery& g, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  io::Writer w(out);
  write_gallery(w, g);
}

inline Gallery load_gallery(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  io::Reader r(in);
  try {
    return read_gallery(r);
  } catch (const DataError& ex) {
    throw DataError(path.string() + ": " + ex.what());
  }
}

}  // namespace sipp
