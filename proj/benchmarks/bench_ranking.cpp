#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "dialogrank/ranking.hpp"
#include "dialogrank/rng.hpp"
#include "dialogrank/text.hpp"

using namespace dialogrank;

namespace {

std::vector<std::vector<std::string>> random_docs(int count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<std::string>> docs;
  for (int d = 0; d < count; ++d) {
    std::vector<std::string> doc;
    const int len = 5 + static_cast<int>(uniform_index(rng, 30));
    for (int t = 0; t < len; ++t)
      doc.push_back("w" + std::to_string(uniform_index(rng, 2000)));
    docs.push_back(std::move(doc));
  }
  return docs;
}

void BM_TfIdfScore(benchmark::State& state) {
  auto docs = random_docs(2000, 1);
  TfIdfModel model = TfIdfModel::fit(docs);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        tfidf_score(docs[i % docs.size()], docs[(i + 7) % docs.size()], model));
    ++i;
  }
  state.SetItemsProcessed(state.iterations());
}

void BM_RankTenCandidates(benchmark::State& state) {
  Rng rng(2);
  RankingInstance inst;
  inst.context = "ctx";
  for (int c = 0; c < 10; ++c) inst.candidates.push_back("cand" + std::to_string(c));
  inst.truth_index = 3;
  PairScorer scorer = [&rng](const std::string&, const std::string&) {
    return uniform_real(rng, 0.0, 1.0);
  };
  for (auto _ : state) benchmark::DoNotOptimize(rank(inst, scorer));
  state.SetItemsProcessed(state.iterations() * 10);
}

}  // namespace

BENCHMARK(BM_TfIdfScore);
BENCHMARK(BM_RankTenCandidates);
