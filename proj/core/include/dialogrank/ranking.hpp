#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dialogrank/corpus.hpp"
#include "dialogrank/scorer.hpp"
#include "dialogrank/text.hpp"

namespace dialogrank {

// Lexical baseline: raw-count tf, idf(w) = ln(N / df(w)), unseen tokens
// contribute nothing.
class TfIdfModel {
 public:
  static TfIdfModel fit(std::span<const std::vector<std::string>> documents);

  double idf(const std::string& token) const;
  std::size_t doc_count() const { return doc_count_; }
  std::size_t df(const std::string& token) const;

 private:
  std::size_t doc_count_ = 0;
  std::unordered_map<std::string, std::size_t> df_;
};

// Cosine similarity of the two tf-idf vectors; 0 when either vector is zero.
double tfidf_score(std::span<const std::string> a, std::span<const std::string> b,
                   const TfIdfModel& model);

using PairScorer = std::function<double(const std::string& context, const std::string& response)>;
using ScorerFactory = std::function<PairScorer()>;

struct RankingResult {
  std::vector<double> scores;  // one per candidate, in candidate order
  std::vector<int> order;      // candidate indices, best first; ties by index
  int rank_of_truth = 0;       // 1-based

  int candidate_count() const { return static_cast<int>(scores.size()); }
};

RankingResult rank(const RankingInstance& instance, const PairScorer& scorer);

// Fraction of results whose truth landed in the top k.
double recall_at_k(std::span<const RankingResult> results, int k);

struct Ensemble {
  std::vector<DualEncoderModel> members;
};

// Mean of the given scores, summed in ascending value order so the result
// does not depend on member listing order.
double mean_of_scores(std::vector<double> scores);

double ensemble_score(const TokenSeq& context, const TokenSeq& response,
                      const Ensemble& ensemble);

// String-level scorers for rank()/evaluate(). The model and ensemble scorers
// memoize the most recent context, which rank() exploits by scoring all
// candidates of one instance consecutively.
PairScorer make_model_scorer(const DualEncoderModel& model, const Vocabulary& vocab, int max_len);
PairScorer make_ensemble_scorer(const Ensemble& ensemble, const Vocabulary& vocab, int max_len);
PairScorer make_tfidf_scorer(const TfIdfModel& model);

struct MetricRow {
  int n = 0;
  int k = 0;
  double recall = 0.0;
};

// One Recall@k per requested (n, k), in request order. Instances must be
// provided for every n that appears in the requests. The factory is invoked
// once per worker thread.
std::vector<MetricRow> evaluate(const ScorerFactory& make_scorer,
                                const std::map<int, std::vector<RankingInstance>>& instances_by_n,
                                std::span<const std::pair<int, int>> requests, int threads = 1);

std::vector<MetricRow> evaluate(const PairScorer& scorer,
                                const std::map<int, std::vector<RankingInstance>>& instances_by_n,
                                std::span<const std::pair<int, int>> requests);

// Pre-encoded instance for the fast model-evaluation path used by training.
struct EncodedInstance {
  TokenSeq context;
  std::vector<TokenSeq> candidates;
  int truth_index = 0;
};

std::vector<EncodedInstance> encode_instances(std::span<const RankingInstance> instances,
                                              const Vocabulary& vocab, int max_len);

// Recall@1 with the rank() tie-break (earlier candidate wins ties). Scoring
// is read-only, so the hit count is identical for any thread count.
double model_recall_at_1(const DualEncoderModel& model,
                         std::span<const EncodedInstance> instances, int threads = 1);

}  // namespace dialogrank
