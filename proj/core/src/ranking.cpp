#include "dialogrank/ranking.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <memory>
#include <numeric>

#include "dialogrank/errors.hpp"
#include "dialogrank/parallel.hpp"

namespace dialogrank {

TfIdfModel TfIdfModel::fit(std::span<const std::vector<std::string>> documents) {
  if (documents.empty()) throw ValidationError("tfidf_fit: empty corpus");
  TfIdfModel model;
  model.doc_count_ = documents.size();
  std::unordered_map<std::string, bool> seen;
  for (const auto& doc : documents) {
    seen.clear();
    for (const auto& tok : doc) {
      if (!seen.emplace(tok, true).second) continue;
      ++model.df_[tok];
    }
  }
  return model;
}

double TfIdfModel::idf(const std::string& token) const {
  auto it = df_.find(token);
  if (it == df_.end()) return 0.0;
  return std::log(static_cast<double>(doc_count_) / static_cast<double>(it->second));
}

std::size_t TfIdfModel::df(const std::string& token) const {
  auto it = df_.find(token);
  return it == df_.end() ? 0 : it->second;
}

namespace {

// Ordered map: accumulation order is then independent of token order in the
// text, which keeps cosine scores exactly symmetric and order-invariant.
std::map<std::string, double> tfidf_vector(std::span<const std::string> tokens,
                                           const TfIdfModel& model) {
  std::unordered_map<std::string, std::size_t> tf;
  for (const auto& tok : tokens) ++tf[tok];
  std::map<std::string, double> vec;
  for (const auto& [tok, count] : tf) {
    const double w = static_cast<double>(count) * model.idf(tok);
    if (w != 0.0) vec.emplace(tok, w);
  }
  return vec;
}

}  // namespace

double tfidf_score(std::span<const std::string> a, std::span<const std::string> b,
                   const TfIdfModel& model) {
  const auto va = tfidf_vector(a, model);
  const auto vb = tfidf_vector(b, model);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [tok, w] : va) {
    na += w * w;
    auto it = vb.find(tok);
    if (it != vb.end()) dot += w * it->second;
  }
  for (const auto& [tok, w] : vb) nb += w * w;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

RankingResult rank(const RankingInstance& instance, const PairScorer& scorer) {
  const int n = static_cast<int>(instance.candidates.size());
  if (n < 2) throw ValidationError("ranking instance needs at least 2 candidates");
  if (instance.truth_index < 0 || instance.truth_index >= n)
    throw ValidationError("truth_index out of range");
  RankingResult result;
  result.scores.resize(n);
  for (int i = 0; i < n; ++i) {
    try {
      result.scores[i] = scorer(instance.context, instance.candidates[i]);
    } catch (const std::exception& e) {
      throw Error("scoring candidate " + std::to_string(i) + ": " + e.what());
    }
  }
  result.order.resize(n);
  std::iota(result.order.begin(), result.order.end(), 0);
  std::stable_sort(result.order.begin(), result.order.end(), [&](int lhs, int rhs) {
    return result.scores[lhs] > result.scores[rhs];
  });
  for (int pos = 0; pos < n; ++pos) {
    if (result.order[pos] == instance.truth_index) {
      result.rank_of_truth = pos + 1;
      break;
    }
  }
  return result;
}

double recall_at_k(std::span<const RankingResult> results, int k) {
  if (k < 1) throw ValidationError("recall_at_k: k must be >= 1");
  if (results.empty()) throw ValidationError("recall_at_k: no results");
  std::size_t hits = 0;
  for (const auto& r : results) {
    if (k > r.candidate_count())
      throw ValidationError("recall_at_k: k = " + std::to_string(k) +
                            " exceeds candidate count " + std::to_string(r.candidate_count()));
    if (r.rank_of_truth <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

double mean_of_scores(std::vector<double> scores) {
  if (scores.empty()) throw ValidationError("mean of empty score list");
  std::sort(scores.begin(), scores.end());
  double sum = 0.0;
  for (double s : scores) sum += s;
  return sum / static_cast<double>(scores.size());
}

double ensemble_score(const TokenSeq& context, const TokenSeq& response,
                      const Ensemble& ensemble) {
  if (ensemble.members.empty()) throw ValidationError("empty ensemble");
  std::vector<double> scores;
  scores.reserve(ensemble.members.size());
  for (const auto& member : ensemble.members)
    scores.push_back(score_pair(context, response, member));
  return mean_of_scores(std::move(scores));
}

namespace {

// Encodes the context once per distinct string; candidates of one instance
// then reuse the cached context embedding.
class CachedModelScorer {
 public:
  CachedModelScorer(const DualEncoderModel& model, const Vocabulary& vocab, int max_len)
      : model_(model), vocab_(vocab), max_len_(max_len) {}

  double operator()(const std::string& context, const std::string& response) {
    if (!has_ctx_ || context != last_context_) {
      const TokenSeq seq = encode_text(context, vocab_, max_len_, Keep::tail);
      const TokenSeq* ptr[] = {&seq};
      const Matrix out = encode_batch(SequenceBatch::from(std::span<const TokenSeq* const>(ptr)),
                                      model_.embeddings.value, model_.context_encoder);
      ctx_times_m_ = predict_response_embedding(
          std::span<const double>(out.row_ptr(0), static_cast<std::size_t>(out.cols)),
          model_.bilinear.value);
      last_context_ = context;
      has_ctx_ = true;
    }
    const TokenSeq seq = encode_text(response, vocab_, max_len_, Keep::head);
    const TokenSeq* ptr[] = {&seq};
    const Matrix out = encode_batch(SequenceBatch::from(std::span<const TokenSeq* const>(ptr)),
                                    model_.embeddings.value, model_.response_params());
    double s = model_.bias.value(0, 0);
    for (int j = 0; j < out.cols; ++j) s += ctx_times_m_[j] * out(0, j);
    return sigmoid(s);
  }

 private:
  const DualEncoderModel& model_;
  const Vocabulary& vocab_;
  int max_len_;
  bool has_ctx_ = false;
  std::string last_context_;
  std::vector<double> ctx_times_m_;
};

}  // namespace

PairScorer make_model_scorer(const DualEncoderModel& model, const Vocabulary& vocab,
                             int max_len) {
  return CachedModelScorer(model, vocab, max_len);
}

PairScorer make_ensemble_scorer(const Ensemble& ensemble, const Vocabulary& vocab, int max_len) {
  if (ensemble.members.empty()) throw ValidationError("empty ensemble");
  auto members = std::make_shared<std::vector<CachedModelScorer>>();
  members->reserve(ensemble.members.size());
  for (const auto& m : ensemble.members) members->emplace_back(m, vocab, max_len);
  return [members](const std::string& context, const std::string& response) {
    std::vector<double> scores;
    scores.reserve(members->size());
    for (auto& scorer : *members) scores.push_back(scorer(context, response));
    return mean_of_scores(std::move(scores));
  };
}

PairScorer make_tfidf_scorer(const TfIdfModel& model) {
  return [&model](const std::string& context, const std::string& response) {
    return tfidf_score(tokenize(context), tokenize(response), model);
  };
}

std::vector<MetricRow> evaluate(const ScorerFactory& make_scorer,
                                const std::map<int, std::vector<RankingInstance>>& instances_by_n,
                                std::span<const std::pair<int, int>> requests, int threads) {
  if (requests.empty()) throw ValidationError("evaluate: no metrics requested");
  // rank each instance set once, reusing results across k values
  std::map<int, std::vector<RankingResult>> results_by_n;
  for (const auto& [n, k] : requests) {
    if (k < 1 || k > n)
      throw ValidationError("evaluate: bad metric (n=" + std::to_string(n) +
                            ", k=" + std::to_string(k) + ")");
    if (results_by_n.count(n)) continue;
    auto it = instances_by_n.find(n);
    if (it == instances_by_n.end() || it->second.empty())
      throw ValidationError("evaluate: no ranking instances with n = " + std::to_string(n));
    const auto& instances = it->second;
    for (const auto& inst : instances)
      if (static_cast<int>(inst.candidates.size()) != n)
        throw ValidationError("evaluate: instance candidate count does not match n = " +
                              std::to_string(n));
    std::vector<RankingResult> results(instances.size());
    parallel_chunks(instances.size(), threads, [&](std::size_t begin, std::size_t end) {
      PairScorer scorer = make_scorer();
      for (std::size_t i = begin; i < end; ++i) results[i] = rank(instances[i], scorer);
    });
    results_by_n.emplace(n, std::move(results));
  }
  std::vector<MetricRow> rows;
  rows.reserve(requests.size());
  for (const auto& [n, k] : requests)
    rows.push_back({n, k, recall_at_k(results_by_n.at(n), k)});
  return rows;
}

std::vector<MetricRow> evaluate(const PairScorer& scorer,
                                const std::map<int, std::vector<RankingInstance>>& instances_by_n,
                                std::span<const std::pair<int, int>> requests) {
  return evaluate([&scorer]() { return scorer; }, instances_by_n, requests, 1);
}

std::vector<EncodedInstance> encode_instances(std::span<const RankingInstance> instances,
                                              const Vocabulary& vocab, int max_len) {
  std::vector<EncodedInstance> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) {
    EncodedInstance enc;
    enc.context = encode_text(inst.context, vocab, max_len, Keep::tail);
    enc.truth_index = inst.truth_index;
    enc.candidates.reserve(inst.candidates.size());
    for (const auto& cand : inst.candidates)
      enc.candidates.push_back(encode_text(cand, vocab, max_len, Keep::head));
    out.push_back(std::move(enc));
  }
  return out;
}

double model_recall_at_1(const DualEncoderModel& model,
                         std::span<const EncodedInstance> instances, int threads) {
  if (instances.empty()) throw ValidationError("model_recall_at_1: no instances");
  std::atomic<std::size_t> hits{0};
  parallel_chunks(instances.size(), threads, [&](std::size_t begin, std::size_t end) {
    std::size_t local = 0;
    for (std::size_t idx = begin; idx < end; ++idx) {
      const auto& inst = instances[idx];
      const int n = static_cast<int>(inst.candidates.size());
      std::vector<const TokenSeq*> ctxs(static_cast<std::size_t>(n), &inst.context);
      std::vector<const TokenSeq*> cands;
      cands.reserve(n);
      for (const auto& c : inst.candidates) cands.push_back(&c);
      const auto scores =
          score_batch(SequenceBatch::from(std::span<const TokenSeq* const>(ctxs)),
                      SequenceBatch::from(std::span<const TokenSeq* const>(cands)), model);
      int best = 0;
      for (int i = 1; i < n; ++i)
        if (scores[i] > scores[best]) best = i;
      if (best == inst.truth_index) ++local;
    }
    hits += local;
  });
  return static_cast<double>(hits.load()) / static_cast<double>(instances.size());
}

}  // namespace dialogrank
