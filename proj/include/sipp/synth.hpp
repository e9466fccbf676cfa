#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "sipp/error.hpp"
#include "sipp/eval.hpp"
#include "sipp/gallery.hpp"
#include "sipp/rng.hpp"
#include "sipp/similarity.hpp"

namespace sipp {

/// Synthetic stand-in for a base/novel face-feature benchmark.
///
/// Person centers are N(0, inter_sigma^2 I). Base images and queries are
/// centers plus N(0, intra_sigma^2 I) noise. Each novel person gets one
/// original sample drawn the same way, and its augmented vectors scatter at
/// aug_sigma around that original rather than around the center, so the
/// augmented cloud is off-center like real augmentation of a single photo.
///
/// With pose_modes > 0 every image sample (base, novel original, query,
/// validation) also gets one of pose_modes shared N(0, pose_sigma^2 I)
/// offsets, chosen uniformly. The offsets are common to all persons, which
/// models different people photographed in the same pose or expression.
/// Augmented vectors inherit the pose of their original.
struct SynthConfig {
  std::uint32_t dim = 128;
  std::uint32_t n_base_persons = 2000;
  std::uint32_t imgs_per_base = 20;
  std::uint32_t n_novel_persons = 100;
  double intra_sigma = 0.6;
  double inter_sigma = 1.0;
  double aug_sigma = 0.3;
  std::uint32_t queries_per_person = 20;
  // Base persons that receive queries (the first n by id, capped at
  // n_base_persons); all when unset.
  std::optional<std::uint32_t> base_query_persons = 100;
  std::uint32_t augmented_per_novel = 63;
  // Extra unlabeled queries for LSH tuning, drawn like ordinary queries.
  std::uint32_t validation_queries = 200;
  std::uint32_t pose_modes = 8;
  double pose_sigma = 0.7;
  std::uint64_t seed = 42;

  void validate() const {
    if (dim == 0) throw ParamError("synth: dim must be positive");
    if (n_base_persons == 0 || imgs_per_base == 0) throw ParamError("synth: base persons and images must be positive");
    if (n_novel_persons == 0) throw ParamError("synth: novel persons must be positive");
    if (queries_per_person == 0) throw ParamError("synth: queries_per_person must be positive");
    if (!(aug_sigma >= 0.0) || !(aug_sigma < intra_sigma) || !(intra_sigma < inter_sigma) ||
        !std::isfinite(inter_sigma)) {
      throw ParamError("synth: need 0 <= aug_sigma < intra_sigma < inter_sigma");
    }
    if (!(pose_sigma >= 0.0) || !std::isfinite(pose_sigma)) throw ParamError("synth: pose_sigma must be >= 0");
  }

  std::uint32_t queried_base_persons() const noexcept {
    return std::min(base_query_persons.value_or(n_base_persons), n_base_persons);
  }
};

struct TruthRow {
  std::string query_id;
  std::string person_id;
  Subset subset = Subset::kNovel;

  friend bool operator==(const TruthRow&, const TruthRow&) = default;
};

struct SynthData {
  std::uint32_t dim = 0;
  std::vector<GalleryEntry> base;
  std::vector<GalleryEntry> novel_original;
  std::vector<GalleryEntry> novel_augmented;
  // Query records carry an empty person id; labels live in `truth`.
  std::vector<GalleryEntry> queries;
  std::vector<TruthRow> truth;
  std::vector<GalleryEntry> validation;

  std::vector<GalleryEntry> novel() const {
    std::vector<GalleryEntry> all = novel_original;
    all.insert(all.end(), novel_augmented.begin(), novel_augmented.end());
    return all;
  }
};

namespace detail {

inline std::string numbered(char prefix, std::uint32_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%05u", prefix, i);
  return buf;
}

inline std::string suffixed(const std::string& stem, const char* tag, std::uint32_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "/%s%03u", tag, i);
  return stem + buf;
}

inline std::vector<double> gaussian_vector(Rng& rng, std::uint32_t dim, double sigma) {
  std::vector<double> v(dim);
  for (auto& x : v) x = sigma * rng.normal();
  return v;
}

inline FeatureVector around(const std::vector<double>& center, Rng& rng, double sigma) {
  std::vector<float> v(center.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(center[i] + sigma * rng.normal());
  return FeatureVector(std::move(v));
}

// Shared pose offsets; posed() adds one of them (if any) to a center.
class PoseModel {
 public:
  PoseModel(const SynthConfig& cfg, Rng rng) : rng_(rng) {
    for (std::uint32_t m = 0; m < cfg.pose_modes; ++m) modes_.push_back(gaussian_vector(rng_, cfg.dim, cfg.pose_sigma));
  }

  std::vector<double> posed(const std::vector<double>& center, Rng& rng) const {
    if (modes_.empty()) return center;
    const auto& pose = modes_[rng.below(modes_.size())];
    std::vector<double> out(center.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = center[i] + pose[i];
    return out;
  }

 private:
  Rng rng_;
  std::vector<std::vector<double>> modes_;
};

}  // namespace detail

inline SynthData generate(const SynthConfig& cfg) {
  cfg.validate();
  // One derived stream per component keeps each part stable when another
  // component's count changes.
  Rng centers_rng = Rng::derive(cfg.seed, 1);
  Rng base_rng = Rng::derive(cfg.seed, 2);
  Rng novel_rng = Rng::derive(cfg.seed, 3);
  Rng aug_rng = Rng::derive(cfg.seed, 4);
  Rng base_query_rng = Rng::derive(cfg.seed, 5);
  Rng validation_rng = Rng::derive(cfg.seed, 6);
  Rng novel_query_rng = Rng::derive(cfg.seed, 7);
  const detail::PoseModel poses(cfg, Rng::derive(cfg.seed, 8));

  const std::uint32_t n_persons = cfg.n_base_persons + cfg.n_novel_persons;
  std::vector<std::vector<double>> centers;
  std::vector<std::string> ids;
  centers.reserve(n_persons);
  for (std::uint32_t p = 0; p < cfg.n_base_persons; ++p) ids.push_back(detail::numbered('b', p));
  for (std::uint32_t p = 0; p < cfg.n_novel_persons; ++p) ids.push_back(detail::numbered('n', p));
  for (std::uint32_t p = 0; p < n_persons; ++p) centers.push_back(detail::gaussian_vector(centers_rng, cfg.dim, cfg.inter_sigma));

  SynthData d;
  d.dim = cfg.dim;
  d.base.reserve(std::size_t{cfg.n_base_persons} * cfg.imgs_per_base);
  for (std::uint32_t p = 0; p < cfg.n_base_persons; ++p) {
    for (std::uint32_t j = 0; j < cfg.imgs_per_base; ++j) {
      d.base.push_back({ids[p], detail::suffixed(ids[p], "img", j), Source::kBase,
                        detail::around(poses.posed(centers[p], base_rng), base_rng, cfg.intra_sigma)});
    }
  }

  for (std::uint32_t n = 0; n < cfg.n_novel_persons; ++n) {
    const std::uint32_t p = cfg.n_base_persons + n;
    FeatureVector original = detail::around(poses.posed(centers[p], novel_rng), novel_rng, cfg.intra_sigma);
    std::vector<double> origin(original.values().begin(), original.values().end());
    d.novel_original.push_back({ids[p], ids[p] + "/orig", Source::kNovelOriginal, original});
    for (std::uint32_t a = 0; a < cfg.augmented_per_novel; ++a) {
      d.novel_augmented.push_back({ids[p], detail::suffixed(ids[p], "aug", a + 1), Source::kNovelAugmented,
                                   detail::around(origin, aug_rng, cfg.aug_sigma)});
    }
  }

  auto add_queries = [&](std::uint32_t p, Subset subset) {
    Rng& query_rng = subset == Subset::kBase ? base_query_rng : novel_query_rng;
    for (std::uint32_t j = 0; j < cfg.queries_per_person; ++j) {
      std::string qid = "q_" + ids[p] + "_" + std::to_string(j);
      d.queries.push_back({"", qid, subset == Subset::kBase ? Source::kBase : Source::kNovelOriginal,
                           detail::around(poses.posed(centers[p], query_rng), query_rng, cfg.intra_sigma)});
      d.truth.push_back({std::move(qid), ids[p], subset});
    }
  };
  for (std::uint32_t p = 0; p < cfg.queried_base_persons(); ++p) add_queries(p, Subset::kBase);
  for (std::uint32_t n = 0; n < cfg.n_novel_persons; ++n) add_queries(cfg.n_base_persons + n, Subset::kNovel);

  for (std::uint32_t v = 0; v < cfg.validation_queries; ++v) {
    const auto p = static_cast<std::uint32_t>(validation_rng.below(n_persons));
    d.validation.push_back({"", "v_" + std::to_string(v), Source::kBase,
                            detail::around(poses.posed(centers[p], validation_rng), validation_rng, cfg.intra_sigma)});
  }
  return d;
}

// ---------------------------------------------------------------------------
// Truth CSV: query_id,person_id,subset

inline void write_truth_csv(const std::filesystem::path& path, std::span<const TruthRow> rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << "query_id,person_id,subset\n";
  for (const auto& r : rows) out << r.query_id << ',' << r.person_id << ',' << to_string(r.subset) << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

inline std::vector<TruthRow> read_truth_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<TruthRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("query_id,", 0) == 0) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c2 == std::string::npos) throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 3 columns");
    TruthRow r;
    r.query_id = line.substr(0, c1);
    r.person_id = line.substr(c1 + 1, c2 - c1 - 1);
    const std::string subset = line.substr(c2 + 1);
    if (subset == "base") {
      r.subset = Subset::kBase;
    } else if (subset == "novel") {
      r.subset = Subset::kNovel;
    } else {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": subset must be base or novel, got '" + subset +
                      "'");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

struct SynthFiles {
  std::filesystem::path base, novel_original, novel_augmented, queries, truth, validation;
};

inline SynthFiles synth_paths(const std::filesystem::path& dir) {
  return {dir / "base.sipf",    dir / "novel_original.sipf", dir / "novel_augmented.sipf",
          dir / "queries.sipf", dir / "truth.csv",           dir / "validation.sipf"};
}

inline SynthFiles write_synth(const SynthData& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const SynthFiles f = synth_paths(dir);
  write_features(f.base, d.dim, d.base);
  write_features(f.novel_original, d.dim, d.novel_original);
  write_features(f.novel_augmented, d.dim, d.novel_augmented);
  write_features(f.queries, d.dim, d.queries);
  write_truth_csv(f.truth, d.truth);
  write_features(f.validation, d.dim, d.validation);
  return f;
}

}  // namespace sipp
