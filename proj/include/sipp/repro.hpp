#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "sipp/error.hpp"
#include "sipp/eval.hpp"
#include "sipp/flat_scan.hpp"
#include "sipp/gallery.hpp"
#include "sipp/lsh_index.hpp"
#include "sipp/parallel.hpp"
#include "sipp/search.hpp"
#include "sipp/synth.hpp"

namespace sipp {

/// Joins predictions with ground truth by query id. Every prediction must
/// have a truth row and each query may be predicted once.
inline std::vector<LabeledPrediction> label_predictions(std::span<const Prediction> preds,
                                                        std::span<const TruthRow> truth) {
  std::map<std::string, const TruthRow*> by_id;
  for (const auto& t : truth) {
    if (!by_id.emplace(t.query_id, &t).second) throw DataError("truth: duplicate query id '" + t.query_id + "'");
  }
  std::set<std::string> seen;
  std::vector<LabeledPrediction> out;
  out.reserve(preds.size());
  for (const auto& p : preds) {
    auto it = by_id.find(p.query_id);
    if (it == by_id.end()) throw DataError("prediction for unknown query '" + p.query_id + "'");
    if (!seen.insert(p.query_id).second) {
      throw DataError("query '" + p.query_id + "' has more than one prediction");
    }
    out.push_back({p.query_id, p.person_id, it->second->person_id, p.score});
  }
  return out;
}

inline std::map<std::string, Subset> membership_of(std::span<const TruthRow> truth) {
  std::map<std::string, Subset> m;
  for (const auto& t : truth) m[t.query_id] = t.subset;
  return m;
}

struct ReproOptions {
  FusionThreshold threshold{};
  double target_recall = 0.98;
  // Probe every bucket instead of tuning; mean-lsh then equals mean-brute.
  bool lsh_exhaustive = false;
  LshTuneGrid grid{};
  std::vector<double> precisions{0.99, 0.97, 0.95};
  unsigned threads = 0;
  std::optional<std::filesystem::path> out_dir;
};

struct StrategyRow {
  Strategy strategy = Strategy::kBase0;
  std::vector<SearchResult> results;  // parallel to SynthData::queries
  SplitReport report;
};

struct ReproReport {
  SynthConfig config;
  LshParams lsh_params;
  double lsh_validation_recall = 0.0;
  std::vector<StrategyRow> rows;  // in kAllStrategies order
  double seconds = 0.0;

  const StrategyRow& row(Strategy s) const {
    for (const auto& r : rows) {
      if (r.strategy == s) return r;
    }
    throw ParamError("repro: no row for strategy " + std::string(strategy_name(s)));
  }
};

namespace detail {

inline std::vector<FeatureVector> vectors_of(std::span<const GalleryEntry> entries) {
  std::vector<FeatureVector> v;
  v.reserve(entries.size());
  for (const auto& e : entries) v.push_back(e.vector);
  return v;
}

inline void write_table_csv(const std::filesystem::path& path, const ReproReport& r, std::span<const double> precisions) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << "strategy,subset";
  for (double p : precisions) out << ",coverage@P" << static_cast<int>(std::lround(p * 100));
  out << ",precision\n";
  for (const auto& row : r.rows) {
    for (const SubsetRow* sub : {&row.report.novel, &row.report.base, &row.report.all}) {
      out << strategy_name(row.strategy) << ',' << sub->name;
      for (const auto& c : sub->coverage) out << ',' << format_score(c.coverage);
      out << ',' << (sub->precision ? format_score(*sub->precision) : std::string("")) << '\n';
    }
  }
}

}  // namespace detail

/// Generates a synthetic benchmark, builds the gallery, tunes and builds
/// the LSH index, runs all five strategies and evaluates each one. When
/// `out_dir` is set, every intermediate artifact is written there.
inline ReproReport run_repro(const SynthConfig& cfg, const ReproOptions& opt = {}) {
  const auto start = std::chrono::steady_clock::now();
  if (opt.out_dir) std::filesystem::create_directories(*opt.out_dir);
  const SynthData data = generate(cfg);
  const Gallery gallery = build_gallery(data.base, data.novel());
  const auto queries = detail::vectors_of(data.queries);
  const auto validation = detail::vectors_of(data.validation);

  ReproReport report;
  report.config = cfg;
  LshIndex lsh;
  if (opt.lsh_exhaustive) {
    report.lsh_params = {4, 8, estimate_median_distance(gallery, 1000, cfg.seed), kProbeAllBuckets, cfg.seed};
    lsh = LshIndex::build(gallery, report.lsh_params, opt.threads);
    report.lsh_validation_recall = 1.0;
  } else {
    const LshTuneResult tuned = tune_lsh(gallery, validation, opt.target_recall, cfg.seed, opt.grid, opt.threads);
    report.lsh_params = tuned.params;
    report.lsh_validation_recall = tuned.recall;
    lsh = LshIndex::build(gallery, tuned.params, opt.threads);
  }

  // Each query needs the mean hit, the best original and best overall image
  // hit, and the LSH top-1; every strategy is assembled from those.
  struct Parts {
    SearchResult mean, originals, all, lsh;
  };
  std::vector<Parts> parts(queries.size());
  parallel_for(queries.size(), opt.threads, [&](std::size_t i) {
    const auto q = queries[i].values();
    const SplitScanHit split = scan_entries_split(gallery, q);
    Parts& p = parts[i];
    p.mean = mean_search(gallery, q);
    p.originals = {gallery.entries()[split.originals.index].person_id, split.originals.score, SearchKind::kBrute};
    p.all = {gallery.entries()[split.all.index].person_id, split.all.score, SearchKind::kBrute};
    const auto top = lsh.query(gallery, q, 1);
    p.lsh = top.empty() ? p.all
                        : SearchResult{gallery.entries()[top.front().entry].person_id, top.front().score,
                                       SearchKind::kBrute};
  });

  const auto membership = membership_of(data.truth);
  std::vector<std::string> query_ids;
  for (const auto& q : data.queries) query_ids.push_back(q.image_id);

  for (Strategy s : kAllStrategies) {
    StrategyRow row;
    row.strategy = s;
    row.results.reserve(parts.size());
    for (const auto& p : parts) {
      switch (s) {
        case Strategy::kBase0:
          row.results.push_back(p.originals);
          break;
        case Strategy::kSvdBrute:
          row.results.push_back(p.all);
          break;
        case Strategy::kMean:
          row.results.push_back(p.mean);
          break;
        case Strategy::kMeanBrute:
          row.results.push_back(fuse(p.mean, p.all, opt.threshold, SearchKind::kMeanBrute));
          break;
        case Strategy::kMeanLsh:
          row.results.push_back(fuse(p.mean, p.lsh, opt.threshold, SearchKind::kMeanLsh));
          break;
      }
    }
    std::vector<Prediction> preds;
    preds.reserve(row.results.size());
    for (std::size_t i = 0; i < row.results.size(); ++i) {
      preds.push_back({query_ids[i], row.results[i].person_id, row.results[i].score});
    }
    const auto labeled = label_predictions(preds, data.truth);
    row.report = split_report(labeled, membership, opt.precisions);

    if (opt.out_dir) {
      const std::string name(strategy_name(s));
      write_predictions_csv(*opt.out_dir / ("predictions_" + name + ".csv"), query_ids, row.results);
      write_curve_csv(*opt.out_dir / ("curve_" + name + ".csv"), precision_coverage_curve(labeled));
      std::vector<LabeledPrediction> novel;
      for (const auto& l : labeled) {
        if (membership.at(l.query_id) == Subset::kNovel) novel.push_back(l);
      }
      if (!novel.empty()) write_curve_csv(*opt.out_dir / ("curve_" + name + "_novel.csv"), precision_coverage_curve(novel));
    }
    report.rows.push_back(std::move(row));
  }

  if (opt.out_dir) {
    write_synth(data, *opt.out_dir);
    save_gallery(gallery, &lsh, *opt.out_dir / "gallery.sipg");
    detail::write_table_csv(*opt.out_dir / "table.csv", report, opt.precisions);
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace sipp
