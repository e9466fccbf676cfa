#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "sipp/search.hpp"
#include "support.hpp"

namespace sipp {
namespace {

GalleryEntry entry(const std::string& person, const std::string& image, Source src, std::vector<float> v) {
  return {person, image, src, FeatureVector(std::move(v))};
}

TEST(BruteForce, ExactMatchScoresOne) {
  const Gallery g = test::random_gallery(1, 50, 6);
  for (const auto& e : g.entries()) {
    const auto r = brute_force_search(g, e.vector.values(), false);
    EXPECT_EQ(r.person_id, e.person_id);
    EXPECT_EQ(r.score, 1.0);
    EXPECT_EQ(r.kind, SearchKind::kBrute);
  }
}

TEST(BruteForce, TwoPointHandComputation) {
  const Gallery g = build_gallery({entry("A", "a", Source::kBase, {0, 0}), entry("B", "b", Source::kBase, {10, 10})}, {});
  const FeatureVector q{1, 1};
  const auto r = brute_force_search(g, q.values(), false);
  EXPECT_EQ(r.person_id, "A");
  EXPECT_DOUBLE_EQ(r.score, 1.0 / (1.0 + std::sqrt(2.0)));
}

TEST(BruteForce, AugmentedOnlyPersonIsUnreachableWithoutFlag) {
  const Gallery g = build_gallery({entry("A", "a", Source::kBase, {5, 5})},
                                  {entry("P", "aug1", Source::kNovelAugmented, {0, 0})});
  const FeatureVector q{0, 0};
  EXPECT_EQ(brute_force_search(g, q.values(), false).person_id, "A");
  EXPECT_EQ(brute_force_search(g, q.values(), true).person_id, "P");
  const Gallery only_aug = build_gallery({}, {entry("P", "aug1", Source::kNovelAugmented, {0, 0})});
  EXPECT_THROW(brute_force_search(only_aug, q.values(), false), DataError);
}

TEST(BruteForce, TiesGoToSmallestPersonId) {
  const Gallery g = build_gallery({entry("zed", "1", Source::kBase, {1, 0}), entry("amy", "1", Source::kBase, {-1, 0}),
                                   entry("bob", "1", Source::kBase, {0, 1})},
                                  {});
  const FeatureVector q{0, 0};
  EXPECT_EQ(brute_force_search(g, q.values(), true).person_id, "amy");
  EXPECT_EQ(mean_search(g, q.values()).person_id, "amy");
}

TEST(BruteForce, Errors) {
  const Gallery g = test::random_gallery(2, 5, 3);
  const FeatureVector q{1, 2};
  EXPECT_THROW(brute_force_search(g, q.values(), true), DataError);
  const Gallery empty = Gallery::from_parts(2, {}, {});
  EXPECT_THROW(brute_force_search(empty, q.values(), true), DataError);
  EXPECT_THROW(mean_search(empty, q.values()), DataError);
  EXPECT_THROW(mean_search(g, q.values()), DataError);
}

TEST(MeanSearch, ExactMeanScoresOne) {
  const Gallery g = test::random_gallery(3, 60, 5, 4);
  for (const auto& m : g.means()) {
    const auto r = mean_search(g, m.mean.values());
    EXPECT_EQ(r.person_id, m.person_id);
    EXPECT_EQ(r.score, 1.0);
    EXPECT_EQ(r.kind, SearchKind::kMean);
  }
}

TEST(MeanSearch, SinglePersonAlwaysWins) {
  const Gallery g = build_gallery({entry("solo", "1", Source::kBase, {0, 0}), entry("solo", "2", Source::kBase, {2, 2})}, {});
  for (const auto& q : test::random_queries(4, 20, 2)) EXPECT_EQ(mean_search(g, q.values()).person_id, "solo");
}

// Left cluster L has a tight core around (-2, 0) plus one outlier at
// (1.5, 0); right cluster R sits around (3, 0). A query at (1.2, 0) is
// nearest to L's outlier but nearer to R's mean.
Gallery outlier_gallery() {
  return build_gallery({entry("L", "1", Source::kBase, {-2.0f, 0.3f}), entry("L", "2", Source::kBase, {-2.0f, -0.3f}),
                        entry("L", "3", Source::kBase, {-2.3f, 0.0f}), entry("L", "4", Source::kBase, {-1.7f, 0.0f}),
                        entry("L", "5", Source::kBase, {1.5f, 0.0f}), entry("R", "1", Source::kBase, {3.0f, 0.6f}),
                        entry("R", "2", Source::kBase, {3.0f, -0.6f}), entry("R", "3", Source::kBase, {3.6f, 0.0f}),
                        entry("R", "4", Source::kBase, {2.4f, 0.0f})},
                       {});
}

TEST(MeanSearch, OutlierPullsBruteForceAway) {
  const Gallery g = outlier_gallery();
  const FeatureVector q{1.2f, 0.0f};
  // Preconditions of the fixture, checked independently.
  const FeatureVector left_mean = g.find_mean("L")->mean;
  const FeatureVector right_mean = g.find_mean("R")->mean;
  ASSERT_LT(euclidean_distance(q, right_mean), euclidean_distance(q, left_mean));
  EXPECT_EQ(mean_search(g, q.values()).person_id, "R");
  EXPECT_EQ(brute_force_search(g, q.values(), true).person_id, "L");
}

TEST(MeanSearch, EqualsBruteForceOverMeanStore) {
  const Gallery g = test::random_gallery(5, 400, 6, 8);
  std::vector<GalleryEntry> mean_rows;
  for (const auto& m : g.means()) mean_rows.push_back({m.person_id, "mean", Source::kBase, m.mean});
  const Gallery as_flat = build_gallery(mean_rows, {});
  for (const auto& q : test::random_queries(6, 200, 6)) {
    EXPECT_EQ(mean_search(g, q.values()), (SearchResult{brute_force_search(as_flat, q.values(), false).person_id,
                                                        brute_force_search(as_flat, q.values(), false).score,
                                                        SearchKind::kMean}));
  }
}

TEST(FusionThreshold, DefaultAndValidation) {
  EXPECT_EQ(FusionThreshold().value(), 0.03);
  EXPECT_EQ(FusionThreshold(0.0).value(), 0.0);
  EXPECT_THROW(FusionThreshold(-0.01), ParamError);
  EXPECT_THROW(FusionThreshold(std::nan("")), ParamError);
}

TEST(Fuse, Examples) {
  const FusionThreshold T(0.03);
  auto r = fuse(0.7, "a", 0.9, "a", T);
  EXPECT_EQ(r.person_id, "a");
  EXPECT_EQ(r.score, 0.9);
  r = fuse(0.70, "a", 0.74, "b", T);
  EXPECT_EQ(r.person_id, "b");
  EXPECT_EQ(r.score, 0.74);
  r = fuse(0.70, "a", 0.73, "b", T);
  EXPECT_EQ(r.person_id, "a");
  EXPECT_EQ(r.score, 0.70);
  r = fuse(0.70, "a", 0.60, "b", T);
  EXPECT_EQ(r.person_id, "a");
  EXPECT_EQ(r.score, 0.70);
  r = fuse(0.70, "a", 0.68, "b", T);
  EXPECT_EQ(r.person_id, "a");
  EXPECT_EQ(r.score, 0.68);
}

TEST(Fuse, ExactBoundaryFallsInInterval) {
  // 0.5 + 0.25 is exact in binary, so s2 == s1 + T holds exactly.
  const auto r = fuse(0.5, "a", 0.75, "b", FusionThreshold(0.25));
  EXPECT_EQ(r.person_id, "a");
  EXPECT_EQ(r.score, 0.5);
  const auto lo = fuse(0.75, "a", 0.5, "b", FusionThreshold(0.25));
  EXPECT_EQ(lo.person_id, "a");
  EXPECT_EQ(lo.score, 0.5);
}

TEST(Fuse, RejectsScoresOutsideUnitInterval) {
  EXPECT_THROW(fuse(0.0, "a", 0.5, "b", {}), ParamError);
  EXPECT_THROW(fuse(0.5, "a", 1.01, "b", {}), ParamError);
  EXPECT_THROW(fuse(std::nan(""), "a", 0.5, "b", {}), ParamError);
}

TEST(FuseProperty, OutputDrawnFromInputs) {
  Rng rng(7);
  for (int i = 0; i < 20000; ++i) {
    const double s1 = 1e-6 + (1 - 1e-6) * rng.uniform();
    const double s2 = 1e-6 + (1 - 1e-6) * rng.uniform();
    const double T = rng.uniform() * 0.2;
    const bool same = rng.below(2) == 0;
    const auto r = fuse(s1, "x", s2, same ? "x" : "y", FusionThreshold(T));
    EXPECT_TRUE(r.score == s1 || r.score == s2);
    EXPECT_TRUE(r.person_id == "x" || r.person_id == "y");
    if (r.person_id == "y") {
      EXPECT_GT(s2, s1 + T);
    }
  }
}

TEST(SearchCombined, AgreementTakesMaxScore) {
  const Gallery g = build_gallery({entry("A", "1", Source::kBase, {0, 0}), entry("A", "2", Source::kBase, {2, 0}),
                                   entry("B", "1", Source::kBase, {20, 20})},
                                  {});
  const FeatureVector q{0.1f, 0};
  const auto r = search_combined(g, q.values(), Backend::kBrute);
  EXPECT_EQ(r.person_id, "A");
  EXPECT_EQ(r.score, brute_force_search(g, q.values(), true).score);
  EXPECT_GT(r.score, mean_search(g, q.values()).score);
  EXPECT_EQ(r.kind, SearchKind::kMeanBrute);
}

TEST(SearchCombined, LshBackendNeedsIndex) {
  const Gallery g = test::random_gallery(8, 10, 3);
  EXPECT_THROW(search_combined(g, g.entries()[0].vector.values(), Backend::kLsh, nullptr), ParamError);
  EXPECT_THROW(search(g, g.entries()[0].vector.values(), Strategy::kMeanLsh), ParamError);
}

TEST(SearchCombined, ExhaustiveLshEqualsBrute) {
  const Gallery g = test::random_gallery(9, 600, 8, 3);
  const LshIndex idx = LshIndex::build(g, {4, 6, 2.0, kProbeAllBuckets, 3});
  for (const auto& q : test::random_queries(10, 300, 8)) {
    const auto brute = search_combined(g, q.values(), Backend::kBrute);
    const auto lsh = search_combined(g, q.values(), Backend::kLsh, &idx);
    EXPECT_EQ(lsh.person_id, brute.person_id);
    EXPECT_EQ(lsh.score, brute.score);
    EXPECT_EQ(lsh.kind, SearchKind::kMeanLsh);
  }
}

TEST(SearchCombined, EmptyLshCandidatesFallBackToBrute) {
  const Gallery g = test::random_gallery(11, 50, 8);
  const LshIndex idx = LshIndex::build(g, {1, 16, 0.05, 1, 0});
  std::vector<float> far(8, 50.0f);
  ASSERT_TRUE(idx.query(g, far, 1).empty());
  EXPECT_EQ(per_image_search(g, far, Backend::kLsh, &idx), brute_force_search(g, far, true));
  EXPECT_EQ(search_combined(g, far, Backend::kLsh, &idx).person_id, search_combined(g, far, Backend::kBrute).person_id);
}

TEST(SearchCombined, FusionLiftsSamePersonAboveAcceptanceThreshold) {
  // Novel person N: original at the origin plus augmented vectors on one
  // side, so the mean is pulled away from the original. A query next to
  // the original scores below 0.88 against the mean but above it against
  // the original; fusion keeps the higher score.
  std::vector<GalleryEntry> novel{entry("N", "orig", Source::kNovelOriginal, {0, 0})};
  for (int i = 0; i < 8; ++i) {
    novel.push_back(entry("N", "aug" + std::to_string(i), Source::kNovelAugmented, {0.4f, 0.05f * static_cast<float>(i - 4)}));
  }
  const Gallery g = build_gallery({entry("B", "1", Source::kBase, {9, 9})}, novel);
  const FeatureVector q{-0.05f, 0};
  const double threshold = 0.88;
  const auto mean = mean_search(g, q.values());
  const auto brute = brute_force_search(g, q.values(), true);
  ASSERT_EQ(mean.person_id, "N");
  ASSERT_LT(mean.score, threshold);
  ASSERT_GT(brute.score, mean.score + 0.03);
  const auto fused = search_combined(g, q.values(), Backend::kBrute);
  EXPECT_EQ(fused.person_id, "N");
  EXPECT_EQ(fused.score, brute.score);
  EXPECT_GE(fused.score, threshold);
}

TEST(Strategy, NamesRoundTrip) {
  for (Strategy s : kAllStrategies) EXPECT_EQ(parse_strategy(strategy_name(s)), s);
  EXPECT_EQ(strategy_name(Strategy::kSvdBrute), "svd-brute");
  EXPECT_THROW(parse_strategy("mean+lsh"), ParamError);
}

TEST(Strategy, DispatchMatchesPrimitives) {
  Rng rng(12);
  auto base = test::random_entries(rng, 60, 6, 3);
  std::vector<GalleryEntry> novel{{"nov", "orig", Source::kNovelOriginal, test::random_vector(rng, 6)}};
  for (int i = 0; i < 5; ++i) novel.push_back({"nov", "aug" + std::to_string(i), Source::kNovelAugmented, test::random_vector(rng, 6)});
  const Gallery g = build_gallery(base, novel);
  const LshIndex idx = LshIndex::build(g, {4, 4, 3.0, 2, 1});
  for (const auto& q : test::random_queries(13, 50, 6)) {
    const auto v = q.values();
    EXPECT_EQ(search(g, v, Strategy::kBase0), brute_force_search(g, v, false));
    EXPECT_EQ(search(g, v, Strategy::kSvdBrute), brute_force_search(g, v, true));
    EXPECT_EQ(search(g, v, Strategy::kMean), mean_search(g, v));
    EXPECT_EQ(search(g, v, Strategy::kMeanBrute), search_combined(g, v, Backend::kBrute));
    EXPECT_EQ(search(g, v, Strategy::kMeanLsh, &idx), search_combined(g, v, Backend::kLsh, &idx));
  }
}

TEST(SearchBatch, IndependentOfThreadCount) {
  const Gallery g = test::random_gallery(14, 300, 8, 3);
  const auto queries = test::random_queries(15, 97, 8);
  for (Strategy s : {Strategy::kBase0, Strategy::kMean, Strategy::kMeanBrute}) {
    const auto one = search_batch(g, queries, s, nullptr, {}, 1);
    const auto many = search_batch(g, queries, s, nullptr, {}, 7);
    EXPECT_EQ(one, many);
    for (std::size_t i = 0; i < queries.size(); ++i) EXPECT_EQ(one[i], search(g, queries[i].values(), s));
  }
  EXPECT_THROW(search_batch(g, queries, Strategy::kMeanLsh), ParamError);
}

TEST(PredictionCsv, RoundTripAndFormat) {
  test::TempDir dir;
  const std::vector<std::string> ids{"q1", "q2"};
  const std::vector<SearchResult> results{{"amy", 0.5, SearchKind::kMean}, {"bob", 1.0 / 3.0, SearchKind::kBrute}};
  write_predictions_csv(dir / "p.csv", ids, results);
  std::ifstream in(dir / "p.csv");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(text, "query_image_id,person_id,score\nq1,amy,0.500000\nq2,bob,0.333333\n");
  const auto back = read_predictions_csv(dir / "p.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].person_id, "bob");
  EXPECT_DOUBLE_EQ(back[1].score, 0.333333);
  EXPECT_THROW(write_predictions_csv(dir / "x.csv", ids, std::vector<SearchResult>{}), ParamError);
}

TEST(PredictionCsv, MalformedRows) {
  test::TempDir dir;
  {
    std::ofstream out(dir / "a.csv");
    out << "query_image_id,person_id,score\nq1,amy\n";
  }
  EXPECT_THROW(read_predictions_csv(dir / "a.csv"), DataError);
  {
    std::ofstream out(dir / "b.csv");
    out << "q1,amy,0.5x\n";
  }
  EXPECT_THROW(read_predictions_csv(dir / "b.csv"), DataError);
  EXPECT_THROW(read_predictions_csv(dir / "missing.csv"), DataError);
}

}  // namespace
}  // namespace sipp
