// Small end-to-end walk through the library: generate a synthetic
// benchmark, build a gallery, search with every strategy and report
// coverage at 99% precision on the novel persons.

#include <cstdio>
#include <vector>

#include "sipp/sipp.hpp"

int main() {
  sipp::SynthConfig cfg;
  cfg.dim = 64;
  cfg.n_base_persons = 300;
  cfg.imgs_per_base = 10;
  cfg.n_novel_persons = 30;
  cfg.seed = 7;
  const sipp::SynthData data = sipp::generate(cfg);

  const sipp::Gallery gallery = sipp::build_gallery(data.base, data.novel());
  std::vector<sipp::FeatureVector> validation;
  for (const auto& v : data.validation) validation.push_back(v.vector);
  const auto tuned = sipp::tune_lsh(gallery, validation, 0.98, cfg.seed);
  const auto lsh = sipp::LshIndex::build(gallery, tuned.params);

  std::vector<sipp::FeatureVector> queries;
  for (const auto& q : data.queries) queries.push_back(q.vector);

  std::printf("%-11s novel coverage@P99\n", "strategy");
  for (sipp::Strategy s : sipp::kAllStrategies) {
    const auto results = sipp::search_batch(gallery, queries, s, &lsh);
    std::vector<sipp::LabeledPrediction> novel;
    for (std::size_t i = 0; i < results.size(); ++i) {
      if (data.truth[i].subset != sipp::Subset::kNovel) continue;
      novel.push_back({data.truth[i].query_id, results[i].person_id, data.truth[i].person_id, results[i].score});
    }
    const auto c = sipp::coverage_at_precision(novel, 0.99);
    std::printf("%-11s %.3f\n", std::string(sipp::strategy_name(s)).c_str(), c.coverage);
  }
}
