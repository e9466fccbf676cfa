// sipp command line tool. Exit codes: 0 success, 1 usage error,
// 2 data/format error, 3 tuning or acceptance failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "manifest.hpp"
#include "sipp/sipp.hpp"

namespace fs = std::filesystem;
using namespace sipp;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitTuning = 3;

fs::path with_suffix(const fs::path& p, const std::string& suffix) { return fs::path(p.string() + suffix); }

std::string two_digits(std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%02zu", i);
  return buf;
}

std::vector<FeatureVector> vectors_of(const std::vector<GalleryEntry>& entries) {
  std::vector<FeatureVector> v;
  v.reserve(entries.size());
  for (const auto& e : entries) v.push_back(e.vector);
  return v;
}

std::vector<GalleryEntry> load_all(const std::vector<fs::path>& files, std::optional<std::uint32_t>& dim,
                                   cli::Manifest& m) {
  std::vector<GalleryEntry> all;
  for (const auto& f : files) {
    FeatureSet s = load_features(f);
    if (dim && *dim != s.dim) {
      throw DataError(f.string() + ": dimension " + std::to_string(s.dim) + " differs from " + std::to_string(*dim));
    }
    dim = s.dim;
    m.input(f);
    all.insert(all.end(), std::make_move_iterator(s.entries.begin()), std::make_move_iterator(s.entries.end()));
  }
  return all;
}

void print_report(const std::string& label, const SplitReport& r) {
  std::printf("%-12s %-6s %6s", label.c_str(), "subset", "n");
  for (double p : r.precisions) std::printf("  cov@P%-3d", static_cast<int>(std::lround(p * 100)));
  std::printf("  precision\n");
  for (const SubsetRow* row : {&r.all, &r.base, &r.novel}) {
    if (row->count == 0) continue;
    std::printf("%-12s %-6s %6zu", "", row->name.c_str(), row->count);
    for (const auto& c : row->coverage) std::printf("  %8.4f", c.coverage);
    std::printf("  %9.4f\n", *row->precision);
  }
}

nlohmann::json report_json(const SplitReport& r) {
  nlohmann::json j = nlohmann::json::object();
  for (const SubsetRow* row : {&r.all, &r.base, &r.novel}) {
    nlohmann::json s;
    s["count"] = row->count;
    if (row->precision) s["precision"] = *row->precision;
    for (std::size_t i = 0; i < r.precisions.size(); ++i) {
      const std::string key = "coverage@P" + std::to_string(std::lround(r.precisions[i] * 100));
      s[key] = row->coverage[i].coverage;
    }
    j[row->name] = s;
  }
  return j;
}

nlohmann::json params_json(const LshParams& p) {
  return {{"tables", p.num_tables},
          {"hashes", p.hashes_per_table},
          {"width", p.bucket_width},
          {"probes", p.probes_per_table == kProbeAllBuckets ? std::string("all") : std::to_string(p.probes_per_table)},
          {"seed", p.seed}};
}

void add_synth_options(CLI::App* sub, SynthConfig& cfg) {
  sub->add_option("--dim", cfg.dim, "Feature dimension")->capture_default_str();
  sub->add_option("--base-persons", cfg.n_base_persons, "Base persons")->capture_default_str();
  sub->add_option("--imgs-per-base", cfg.imgs_per_base, "Images per base person")->capture_default_str();
  sub->add_option("--novel-persons", cfg.n_novel_persons, "Novel persons")->capture_default_str();
  sub->add_option("--augmented-per-novel", cfg.augmented_per_novel, "Augmented vectors per novel person")
      ->capture_default_str();
  sub->add_option("--queries-per-person", cfg.queries_per_person, "Queries per queried person")->capture_default_str();
  sub->add_option("--base-query-persons", cfg.base_query_persons,
                  "Base persons that get queries (first n by id)")
      ->capture_default_str();
  sub->add_option("--validation-queries", cfg.validation_queries, "Unlabeled queries for LSH tuning")
      ->capture_default_str();
  sub->add_option("--intra-sigma", cfg.intra_sigma, "Within-person spread")->capture_default_str();
  sub->add_option("--inter-sigma", cfg.inter_sigma, "Spread of person centers")->capture_default_str();
  sub->add_option("--aug-sigma", cfg.aug_sigma, "Spread of augmented vectors around the novel original")
      ->capture_default_str();
  sub->add_option("--pose-modes", cfg.pose_modes, "Shared pose offsets (0 disables)")->capture_default_str();
  sub->add_option("--pose-sigma", cfg.pose_sigma, "Spread of the pose offsets")->capture_default_str();
  sub->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Single-image-per-person face search toolkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  unsigned threads = 0;
  std::optional<fs::path> manifest_path;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--threads", threads, "Worker threads (0 = available parallelism)")->capture_default_str();
    sub->add_option("--manifest", manifest_path, "Manifest path (default: next to the primary output)");
  };

  // augment
  auto* augment = app.add_subcommand("augment", "Write the SVD-degraded variants of an image");
  fs::path aug_input;
  fs::path aug_out_dir;
  std::vector<double> fractions(kDefaultEnergyFractions.begin(), kDefaultEnergyFractions.end());
  augment->add_option("image", aug_input, "Input image (.ppm, .pgm, .png)")->required()->check(CLI::ExistingFile);
  augment->add_option("--out-dir", aug_out_dir, "Output directory")->required();
  augment->add_option("--fractions", fractions, "Energy fractions per channel")->delimiter(',')->capture_default_str();
  common(augment);

  // build
  auto* build = app.add_subcommand("build", "Build a gallery from feature files");
  std::vector<fs::path> base_files;
  std::vector<fs::path> novel_files;
  fs::path build_out;
  bool with_lsh = false;
  LshParams lsh_params;
  lsh_params.bucket_width = 0.0;
  build->add_option("--base", base_files, "Base feature file(s)")->required()->check(CLI::ExistingFile);
  build->add_option("--novel", novel_files, "Novel feature file(s): originals and augmented")
      ->check(CLI::ExistingFile);
  build->add_option("--out", build_out, "Output gallery file")->required();
  build->add_flag("--lsh", with_lsh, "Also build and store an LSH index");
  build->add_option("--tables", lsh_params.num_tables, "LSH tables")->capture_default_str();
  build->add_option("--hashes", lsh_params.hashes_per_table, "Hashes per table")->capture_default_str();
  build->add_option("--width", lsh_params.bucket_width, "Bucket width (0 = 2x median pairwise distance)")
      ->capture_default_str();
  build->add_option("--probes", lsh_params.probes_per_table, "Probes per table")->capture_default_str();
  build->add_option("--seed", lsh_params.seed, "LSH seed")->capture_default_str();
  common(build);

  // tune-lsh
  auto* tune = app.add_subcommand("tune-lsh", "Pick LSH parameters for a target recall and store the index");
  fs::path tune_gallery;
  fs::path tune_validation;
  fs::path tune_out;
  double target_recall = 0.98;
  std::uint64_t tune_seed = 0;
  LshTuneGrid grid;
  tune->add_option("--gallery", tune_gallery, "Input gallery file")->required()->check(CLI::ExistingFile);
  tune->add_option("--validation", tune_validation, "Validation query features (>= 100 records)")
      ->required()
      ->check(CLI::ExistingFile);
  tune->add_option("--out", tune_out, "Output gallery file with index")->required();
  tune->add_option("--target-recall", target_recall, "Required top-1 recall")->capture_default_str();
  tune->add_option("--seed", tune_seed, "LSH seed")->capture_default_str();
  tune->add_option("--grid-tables", grid.tables, "Table counts to try")->delimiter(',')->capture_default_str();
  tune->add_option("--grid-hashes", grid.hashes, "Hash counts to try")->delimiter(',')->capture_default_str();
  tune->add_option("--grid-widths", grid.width_multipliers, "Width multipliers of the median distance")
      ->delimiter(',')
      ->capture_default_str();
  tune->add_option("--grid-probes", grid.probes, "Probe counts to try")->delimiter(',')->capture_default_str();
  common(tune);

  // search
  auto* search_cmd = app.add_subcommand("search", "Identify query features against a gallery");
  fs::path search_gallery;
  fs::path search_queries;
  fs::path search_out;
  std::string strategy_str = "mean-brute";
  double threshold_t = FusionThreshold::kDefault;
  search_cmd->add_option("--gallery", search_gallery, "Gallery file")->required()->check(CLI::ExistingFile);
  search_cmd->add_option("--queries", search_queries, "Query feature file")->required()->check(CLI::ExistingFile);
  search_cmd->add_option("--strategy", strategy_str, "base0|svd-brute|mean|mean-brute|mean-lsh")
      ->check(CLI::IsMember({"base0", "svd-brute", "mean", "mean-brute", "mean-lsh"}))
      ->capture_default_str();
  search_cmd->add_option("--threshold-t", threshold_t, "Fusion margin T")->capture_default_str();
  search_cmd->add_option("--out", search_out, "Predictions CSV")->required();
  common(search_cmd);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Coverage at precision for a predictions file");
  fs::path eval_predictions;
  fs::path eval_truth;
  std::vector<double> precisions(kReportPrecisions.begin(), kReportPrecisions.end());
  std::optional<fs::path> curve_out;
  evaluate->add_option("--predictions", eval_predictions, "Predictions CSV")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--truth", eval_truth, "Truth CSV (query_id,person_id,subset)")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--precisions", precisions, "Precision levels")->delimiter(',')->capture_default_str();
  evaluate->add_option("--curve-out", curve_out, "Precision-coverage curve CSV");
  common(evaluate);

  // gen-synth
  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic benchmark");
  SynthConfig synth_cfg;
  fs::path gen_out_dir;
  add_synth_options(gen, synth_cfg);
  gen->add_option("--out-dir", gen_out_dir, "Output directory")->required();
  common(gen);

  // repro
  auto* repro = app.add_subcommand("repro", "Run all five strategies on a synthetic benchmark");
  SynthConfig repro_cfg;
  fs::path repro_out_dir;
  ReproOptions repro_opt;
  double repro_t = FusionThreshold::kDefault;
  bool check_ordering = false;
  add_synth_options(repro, repro_cfg);
  repro->add_option("--out-dir", repro_out_dir, "Output directory")->required();
  repro->add_option("--threshold-t", repro_t, "Fusion margin T")->capture_default_str();
  repro->add_option("--target-recall", repro_opt.target_recall, "LSH target recall")->capture_default_str();
  repro->add_flag("--lsh-exhaustive", repro_opt.lsh_exhaustive, "Probe every bucket instead of tuning");
  repro->add_option("--precisions", repro_opt.precisions, "Precision levels")->delimiter(',')->capture_default_str();
  repro->add_flag("--check-ordering", check_ordering,
                  "Exit 3 unless novel coverage at the first precision is ordered base0 <= svd-brute <= mean <= "
                  "mean-brute and mean-lsh >= 0.95 x mean-brute");
  common(repro);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*augment) {
      cli::Manifest m(args, *augment);
      const ImageRGB img = read_image(aug_input);
      m.input(aug_input);
      std::string ext = aug_input.extension().string();
      if (detail::lower_extension(aug_input) == ".pgm") ext = ".ppm";
      const auto outputs = augment_image(img, fractions);
      const std::size_t n = fractions.size();
      fs::create_directories(aug_out_dir);
      const std::string stem = aug_input.stem().string();
      for (std::size_t idx = 0; idx < outputs.size(); ++idx) {
        const std::size_t i = idx / (n * n);
        const std::size_t j = (idx / n) % n;
        const std::size_t k = idx % n;
        const fs::path out = aug_out_dir / (stem + "_i" + two_digits(i) + "_j" + two_digits(j) + "_k" + two_digits(k) + ext);
        write_image(outputs[idx], out);
        m.output(out);
      }
      m.write(manifest_path.value_or(aug_out_dir / (stem + "_manifest.json")));
      std::printf("wrote %zu images to %s\n", outputs.size(), aug_out_dir.string().c_str());
    } else if (*build) {
      cli::Manifest m(args, *build);
      std::optional<std::uint32_t> dim;
      auto base = load_all(base_files, dim, m);
      auto novel = load_all(novel_files, dim, m);
      const Gallery g = build_gallery(std::move(base), std::move(novel));
      std::optional<LshIndex> idx;
      if (with_lsh) {
        if (lsh_params.bucket_width == 0.0) lsh_params.bucket_width = 2.0 * estimate_median_distance(g, 1000, lsh_params.seed);
        idx = LshIndex::build(g, lsh_params, threads);
        m.extra()["lsh"] = params_json(lsh_params);
      }
      save_gallery(g, idx ? &*idx : nullptr, build_out);
      m.output(build_out);
      m.write(manifest_path.value_or(with_suffix(build_out, ".manifest.json")));
      std::printf("gallery: %zu entries, %zu persons, dim %u%s\n", g.entries().size(), g.means().size(), g.dim(),
                  idx ? ", with LSH index" : "");
    } else if (*tune) {
      cli::Manifest m(args, *tune);
      GalleryBundle bundle = load_gallery_bundle(tune_gallery);
      m.input(tune_gallery);
      const FeatureSet validation = load_features(tune_validation);
      m.input(tune_validation);
      LshTuneResult result;
      try {
        result = tune_lsh(bundle.gallery, vectors_of(validation.entries), target_recall, tune_seed, grid, threads);
      } catch (const TuningError& e) {
        std::fprintf(stderr, "sipp: %s (best recall %.4f)\n", e.what(), e.best_achieved());
        return kExitTuning;
      }
      const LshIndex idx = LshIndex::build(bundle.gallery, result.params, threads);
      save_gallery(bundle.gallery, &idx, tune_out);
      m.output(tune_out);
      m.extra()["lsh"] = params_json(result.params);
      m.extra()["validation_recall"] = result.recall;
      m.extra()["median_distance"] = result.median_distance;
      m.extra()["trials"] = result.trials.size();
      m.write(manifest_path.value_or(with_suffix(tune_out, ".manifest.json")));
      const auto& p = result.params;
      std::printf("tables=%u hashes=%u width=%.6f probes=%u recall=%.4f (%zu grid points tried)\n", p.num_tables,
                  p.hashes_per_table, p.bucket_width, p.probes_per_table, result.recall, result.trials.size());
    } else if (*search_cmd) {
      cli::Manifest m(args, *search_cmd);
      const Strategy s = parse_strategy(strategy_str);
      const FusionThreshold T(threshold_t);
      GalleryBundle bundle = load_gallery_bundle(search_gallery);
      m.input(search_gallery);
      const FeatureSet queries = load_features(search_queries);
      m.input(search_queries);
      if (s == Strategy::kMeanLsh && !bundle.lsh) {
        throw DataError(search_gallery.string() + " has no LSH index; rebuild with 'build --lsh' or 'tune-lsh'");
      }
      const auto results =
          search_batch(bundle.gallery, vectors_of(queries.entries), s, bundle.lsh ? &*bundle.lsh : nullptr, T, threads);
      std::vector<std::string> ids;
      for (const auto& q : queries.entries) ids.push_back(q.image_id);
      write_predictions_csv(search_out, ids, results);
      m.output(search_out);
      m.write(manifest_path.value_or(with_suffix(search_out, ".manifest.json")));
      std::printf("%zu predictions written to %s\n", results.size(), search_out.string().c_str());
    } else if (*evaluate) {
      cli::Manifest m(args, *evaluate);
      const auto preds = read_predictions_csv(eval_predictions);
      m.input(eval_predictions);
      const auto truth = read_truth_csv(eval_truth);
      m.input(eval_truth);
      for (double p : precisions) {
        if (!(p > 0.0 && p <= 1.0)) throw ParamError("precision levels must lie in (0, 1]");
      }
      const auto labeled = label_predictions(preds, truth);
      const SplitReport r = split_report(labeled, membership_of(truth), precisions);
      print_report(eval_predictions.stem().string(), r);
      m.extra() = report_json(r);
      if (curve_out) {
        write_curve_csv(*curve_out, precision_coverage_curve(labeled));
        m.output(*curve_out);
      }
      if (manifest_path) {
        m.write(*manifest_path);
      } else if (curve_out) {
        m.write(with_suffix(*curve_out, ".manifest.json"));
      }
    } else if (*gen) {
      cli::Manifest m(args, *gen);
      const SynthFiles f = write_synth(generate(synth_cfg), gen_out_dir);
      for (const auto& p : {f.base, f.novel_original, f.novel_augmented, f.queries, f.truth, f.validation}) m.output(p);
      m.write(manifest_path.value_or(gen_out_dir / "manifest.json"));
      std::printf("synthetic benchmark written to %s\n", gen_out_dir.string().c_str());
    } else if (*repro) {
      cli::Manifest m(args, *repro);
      repro_opt.threshold = FusionThreshold(repro_t);
      repro_opt.threads = threads;
      repro_opt.out_dir = repro_out_dir;
      ReproReport r;
      try {
        r = run_repro(repro_cfg, repro_opt);
      } catch (const TuningError& e) {
        std::fprintf(stderr, "sipp: %s (best recall %.4f)\n", e.what(), e.best_achieved());
        return kExitTuning;
      }
      std::printf("lsh: tables=%u hashes=%u width=%.4f probes=%s validation recall %.4f\n", r.lsh_params.num_tables,
                  r.lsh_params.hashes_per_table, r.lsh_params.bucket_width,
                  r.lsh_params.probes_per_table == kProbeAllBuckets
                      ? "all"
                      : std::to_string(r.lsh_params.probes_per_table).c_str(),
                  r.lsh_validation_recall);
      m.extra()["lsh"] = params_json(r.lsh_params);
      m.extra()["lsh_validation_recall"] = r.lsh_validation_recall;
      for (const auto& row : r.rows) {
        print_report(std::string(strategy_name(row.strategy)), row.report);
        m.extra()["strategies"][std::string(strategy_name(row.strategy))] = report_json(row.report);
      }
      std::printf("%.1f s\n", r.seconds);
      m.output(repro_out_dir / "table.csv");
      m.write(manifest_path.value_or(repro_out_dir / "manifest.json"));
      if (check_ordering) {
        auto cov = [&](Strategy s) { return r.row(s).report.novel.coverage.at(0).coverage; };
        const bool ok = cov(Strategy::kBase0) <= cov(Strategy::kSvdBrute) &&
                        cov(Strategy::kSvdBrute) <= cov(Strategy::kMean) &&
                        cov(Strategy::kMean) <= cov(Strategy::kMeanBrute) &&
                        cov(Strategy::kMeanLsh) >= 0.95 * cov(Strategy::kMeanBrute);
        std::printf("ordering: %s\n", ok ? "ok" : "violated");
        if (!ok) return kExitTuning;
      }
    }
  } catch (const ParamError& e) {
    std::fprintf(stderr, "sipp: %s\n", e.what());
    return kExitUsage;
  } catch (const TuningError& e) {
    std::fprintf(stderr, "sipp: %s\n", e.what());
    return kExitTuning;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "sipp: %s\n", e.what());
    return kExitData;
  }
  return 0;
}
