#include <filesystem>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "sipp/repro.hpp"
#include "support.hpp"

namespace sipp {
namespace {

SynthConfig small_config() {
  SynthConfig c;
  c.dim = 16;
  c.n_base_persons = 60;
  c.imgs_per_base = 5;
  c.n_novel_persons = 8;
  c.augmented_per_novel = 15;
  c.queries_per_person = 5;
  c.base_query_persons = 10;
  c.validation_queries = 100;
  c.seed = 5;
  return c;
}

TEST(Repro, ExhaustiveLshMakesMethod4EqualMethod3) {
  ReproOptions opt;
  opt.lsh_exhaustive = true;
  const ReproReport r = run_repro(small_config(), opt);
  ASSERT_EQ(r.rows.size(), 5u);
  for (std::size_t i = 0; i < r.rows.size(); ++i) EXPECT_EQ(r.rows[i].strategy, kAllStrategies[i]);
  const auto& m3 = r.row(Strategy::kMeanBrute).results;
  const auto& m4 = r.row(Strategy::kMeanLsh).results;
  ASSERT_EQ(m3.size(), m4.size());
  for (std::size_t i = 0; i < m3.size(); ++i) {
    EXPECT_EQ(m3[i].person_id, m4[i].person_id);
    EXPECT_EQ(m3[i].score, m4[i].score);
  }
}

TEST(Repro, RowsMatchIndependentSearchBatch) {
  const SynthConfig cfg = small_config();
  ReproOptions opt;
  opt.target_recall = 0.9;
  opt.threads = 3;
  const ReproReport r = run_repro(cfg, opt);
  EXPECT_GE(r.lsh_validation_recall, 0.9);

  const SynthData d = generate(cfg);
  const Gallery g = build_gallery(d.base, d.novel());
  const LshIndex idx = LshIndex::build(g, r.lsh_params);
  std::vector<FeatureVector> queries;
  for (const auto& q : d.queries) queries.push_back(q.vector);
  for (Strategy s : kAllStrategies) {
    const auto expected = search_batch(g, queries, s, &idx, opt.threshold, 1);
    const auto& got = r.row(s).results;
    ASSERT_EQ(got.size(), expected.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].person_id, expected[i].person_id) << strategy_name(s) << " query " << i;
      EXPECT_EQ(got[i].score, expected[i].score) << strategy_name(s) << " query " << i;
    }
  }
}

TEST(Repro, ReportCoverageMatchesLabeledPredictions) {
  const SynthConfig cfg = small_config();
  ReproOptions opt;
  opt.lsh_exhaustive = true;
  const ReproReport r = run_repro(cfg, opt);
  const SynthData d = generate(cfg);
  for (const auto& row : r.rows) {
    std::vector<LabeledPrediction> novel;
    for (std::size_t i = 0; i < d.queries.size(); ++i) {
      if (d.truth[i].subset != Subset::kNovel) continue;
      novel.push_back({d.truth[i].query_id, row.results[i].person_id, d.truth[i].person_id, row.results[i].score});
    }
    ASSERT_EQ(row.report.novel.count, novel.size());
    for (std::size_t k = 0; k < opt.precisions.size(); ++k) {
      EXPECT_EQ(row.report.novel.coverage[k].coverage, coverage_at_precision(novel, opt.precisions[k]).coverage);
    }
    double previous = 1.0;
    for (const auto& c : row.report.all.coverage) {
      EXPECT_LE(c.coverage, previous);
      previous = c.coverage;
    }
  }
}

TEST(Repro, WritesArtifacts) {
  test::TempDir dir;
  ReproOptions opt;
  opt.lsh_exhaustive = true;
  opt.out_dir = dir.path();
  const ReproReport r = run_repro(small_config(), opt);
  for (Strategy s : kAllStrategies) {
    const std::string name(strategy_name(s));
    EXPECT_TRUE(std::filesystem::exists(dir / ("predictions_" + name + ".csv")));
    EXPECT_TRUE(std::filesystem::exists(dir / ("curve_" + name + ".csv")));
    EXPECT_TRUE(std::filesystem::exists(dir / ("curve_" + name + "_novel.csv")));
    EXPECT_EQ(read_predictions_csv(dir / ("predictions_" + name + ".csv")).size(), r.row(s).results.size());
  }
  for (const char* f : {"table.csv", "gallery.sipg", "truth.csv", "base.sipf", "queries.sipf"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  const auto bundle = load_gallery_bundle(dir / "gallery.sipg");
  ASSERT_TRUE(bundle.lsh.has_value());
  EXPECT_EQ(bundle.lsh->params().num_tables, r.lsh_params.num_tables);
}

TEST(LabelPredictions, JoinsAndRejects) {
  const std::vector<TruthRow> truth{{"q1", "amy", Subset::kBase}, {"q2", "bob", Subset::kNovel}};
  const std::vector<Prediction> preds{{"q2", "amy", 0.5}, {"q1", "amy", 0.7}};
  const auto labeled = label_predictions(preds, truth);
  ASSERT_EQ(labeled.size(), 2u);
  EXPECT_FALSE(labeled[0].correct());
  EXPECT_TRUE(labeled[1].correct());
  EXPECT_EQ(labeled[0].true_person, "bob");

  const std::vector<Prediction> unknown{{"q9", "amy", 0.5}};
  EXPECT_THROW(label_predictions(unknown, truth), DataError);
  const std::vector<Prediction> twice{{"q1", "amy", 0.5}, {"q1", "bob", 0.6}};
  EXPECT_THROW(label_predictions(twice, truth), DataError);
  const std::vector<TruthRow> dup{{"q1", "amy", Subset::kBase}, {"q1", "bob", Subset::kBase}};
  EXPECT_THROW(label_predictions(preds, dup), DataError);
}

}  // namespace
}  // namespace sipp
