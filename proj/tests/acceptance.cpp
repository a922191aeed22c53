// Acceptance suite: one pass/fail line per criterion, exit 0 iff none fail.
// Criterion 9 needs the public corpus on disk and is skipped unless
// DIALOGRANK_UBUNTU_DATA points at a directory with train.csv and test.csv.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dialogrank/corpus.hpp"
#include "dialogrank/csv.hpp"
#include "dialogrank/encoders.hpp"
#include "dialogrank/model_io.hpp"
#include "dialogrank/numerics.hpp"
#include "dialogrank/ranking.hpp"
#include "dialogrank/rng.hpp"
#include "dialogrank/scorer.hpp"
#include "dialogrank/text.hpp"
#include "dialogrank/training.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace dialogrank;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report_line(int criterion, const char* status, const std::string& detail) {
  std::printf("%s  criterion %d: %s\n", status, criterion, detail.c_str());
}

void pass(int criterion, const std::string& detail) { report_line(criterion, "PASS", detail); }

void fail(int criterion, const std::string& detail) {
  report_line(criterion, "FAIL", detail);
  ++g_failures;
}

void check(int criterion, bool ok, const std::string& detail) {
  if (ok)
    pass(criterion, detail);
  else
    fail(criterion, detail);
}

void skip(int criterion, const std::string& detail) { report_line(criterion, "SKIP", detail); }

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// --------------------------------------------------------------------------
// 1. Gradient correctness per architecture at the pinned dimensions.

DualEncoderModel gradient_check_model(Arch arch, std::uint64_t seed) {
  ModelSpec spec;
  spec.lstm_hidden = 5;
  spec.bilstm_hidden = 3;
  spec.cnn.filters = {{1, 2}, {2, 2}, {3, 1}};
  Matrix emb(12, 4);
  Rng rng(seed);
  for (int i = 1; i < emb.rows; ++i)
    for (int j = 0; j < emb.cols; ++j) emb(i, j) = uniform_real(rng, -0.5, 0.5);
  DualEncoderModel model = make_model(arch, spec, std::move(emb), seed + 1);
  for (double& v : model.bilinear.value.data) v += uniform_real(rng, -0.3, 0.3);
  model.bias.value(0, 0) = uniform_real(rng, -0.3, 0.3);
  return model;
}

// Central differences at eps=1e-5 carry a roundoff floor of about
// |loss|*2^-52/(2*eps) ~ 1e-11, so an analytic entry below ~1e-7 cannot be
// verified relative to itself. Batches are redrawn until every entry is
// either structurally zero (an unused embedding row) or above that band;
// the check itself still covers every entry, zeros included.
bool gradient_entries_conditioned(std::span<Parameter* const> params) {
  for (const Parameter* p : params)
    for (double g : p->grad.data)
      if (g != 0.0 && std::abs(g) < 1e-7) return false;
  return true;
}

void criterion_1() {
  const auto start = std::chrono::steady_clock::now();
  const int caps[] = {7, 6, 6};  // L=7 for the CNN configuration
  int i = 0;
  for (Arch arch : {Arch::cnn, Arch::lstm, Arch::bilstm}) {
    DualEncoderModel model = gradient_check_model(arch, 100 + i);
    auto params = model.parameters();
    std::vector<TokenSeq> ctxs, resps;
    std::vector<int> flags;
    bool conditioned = false;
    for (std::uint64_t attempt = 0; attempt < 50 && !conditioned; ++attempt) {
      Rng rng(200 + i + 1000 * attempt);
      ctxs.clear();
      resps.clear();
      flags.clear();
      for (int k = 0; k < 3; ++k) {
        ctxs.push_back(synth::random_seq(rng, 12, caps[i], 1, caps[i]));
        resps.push_back(synth::random_seq(rng, 12, caps[i], 1, caps[i]));
        flags.push_back(k % 2);
      }
      model.zero_grads();
      model_backward(SequenceBatch::from(ctxs), SequenceBatch::from(resps), flags, model);
      conditioned = gradient_entries_conditioned(params);
    }
    if (!conditioned) {
      fail(1, arch_name(arch) + ": no well-conditioned batch found for the gradient check");
      ++i;
      continue;
    }
    auto loss = [&] {
      auto probs = score_batch(SequenceBatch::from(ctxs), SequenceBatch::from(resps), model);
      double total = 0.0;
      for (std::size_t k = 0; k < probs.size(); ++k) total += nll_loss(probs[k], flags[k]);
      return total / static_cast<double>(probs.size());
    };
    const double err = gradient_check(loss, params, 1e-5);
    check(1, err < 1e-4,
          fmt("%s full-model gradient check: max rel err %.2e (< 1e-4)",
              arch_name(arch).c_str(), err));
    ++i;
  }
  const double elapsed = seconds_since(start);
  check(1, elapsed < 60.0, fmt("gradient checks finished in %.2fs (< 60s)", elapsed));
}

// --------------------------------------------------------------------------
// 2. Overfit sanity on a deterministic 200-example corpus.

void criterion_2() {
  auto corpus = synth::make_qa_corpus(20, 200, 2, 777);
  for (Arch arch : {Arch::cnn, Arch::lstm, Arch::bilstm}) {
    const auto start = std::chrono::steady_clock::now();
    ModelSpec spec;
    spec.lstm_hidden = 16;
    spec.bilstm_hidden = 8;
    spec.cnn.filters = {{1, 8}};
    Rng rng(778);
    auto emb = init_embeddings(corpus.vocab, 16, rng);
    DualEncoderModel model = make_model(arch, spec, std::move(emb), 779);

    TrainConfig config;
    config.batch_size = 16;
    config.max_epochs = 300;
    config.patience = 300;
    config.seed = 780;
    config.eval_candidates = 2;
    config.max_len = 12;
    TrainResult result =
        train(std::move(model), corpus.vocab, corpus.examples, corpus.instances, config);
    const double elapsed = seconds_since(start);
    check(2, result.best_recall1 >= 0.95 && elapsed < 300.0,
          fmt("%s 1-in-2 R@1 %.3f (>= 0.95) after %d epochs in %.1fs (< 300s)",
              arch_name(arch).c_str(), result.best_recall1, result.best_epoch, elapsed));
  }
}

// --------------------------------------------------------------------------
// 3. Random-scorer calibration over 100,000 1-in-10 instances.

void criterion_3() {
  Rng rng(31337);
  RankingInstance inst;
  inst.context = "ctx";
  for (int c = 0; c < 10; ++c) inst.candidates.push_back("cand" + std::to_string(c));
  PairScorer random_scorer = [&rng](const std::string&, const std::string&) {
    return uniform_real(rng, 0.0, 1.0);
  };
  std::vector<RankingResult> results;
  results.reserve(100000);
  for (int i = 0; i < 100000; ++i) {
    inst.truth_index = static_cast<int>(uniform_index(rng, 10));
    results.push_back(rank(inst, random_scorer));
  }
  const struct { int k; double expected; } targets[] = {{1, 0.1}, {2, 0.2}, {5, 0.5}};
  for (const auto& target : targets) {
    const double got = recall_at_k(results, target.k);
    check(3, std::abs(got - target.expected) <= 0.01,
          fmt("random scorer R@%d = %.4f (expected %.2f +/- 0.01)", target.k, got,
              target.expected));
  }
}

// --------------------------------------------------------------------------
// 4. Recall@k equals the brute-force oracle exactly.

void criterion_4() {
  Rng rng(41);
  std::vector<RankingResult> results;
  std::vector<std::vector<double>> all_scores;
  std::vector<int> truths;
  for (int i = 0; i < 50; ++i) {
    const int n = 2 + static_cast<int>(uniform_index(rng, 9));  // n in [2, 10]
    RankingInstance inst;
    inst.context = "c";
    std::vector<double> scores;
    for (int c = 0; c < n; ++c) {
      inst.candidates.push_back("cand" + std::to_string(c));
      // coarse grid so score ties actually occur
      scores.push_back(std::floor(uniform_real(rng, 0.0, 4.0)) / 4.0);
    }
    inst.truth_index = static_cast<int>(uniform_index(rng, n));
    results.push_back(rank(inst, [&](const std::string&, const std::string& cand) {
      return scores[static_cast<std::size_t>(std::stoi(cand.substr(4)))];
    }));
    all_scores.push_back(scores);
    truths.push_back(inst.truth_index);
  }
  bool all_equal = true;
  for (int k = 1; k <= 2; ++k) {
    const double lib = recall_at_k(results, k);
    const double ref = oracle::recall_at_k(all_scores, truths, k);
    if (lib != ref) all_equal = false;
  }
  check(4, all_equal, "recall@k equals the sort-and-count oracle exactly on 50 instances");
}

// --------------------------------------------------------------------------
// 5. TF-IDF against the brute-force oracle, then ranking power on a corpus
//    where positives share a rare token with their context.

void criterion_5() {
  Rng rng(51);
  std::vector<std::vector<std::string>> docs;
  const char* words[] = {"alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta"};
  for (int d = 0; d < 50; ++d) {
    std::vector<std::string> doc;
    const int len = 2 + static_cast<int>(uniform_index(rng, 6));
    for (int t = 0; t < len; ++t) doc.push_back(words[uniform_index(rng, 7)]);
    docs.push_back(std::move(doc));
  }
  TfIdfModel model = TfIdfModel::fit(docs);
  double max_err = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto& a = docs[uniform_index(rng, docs.size())];
    const auto& b = docs[uniform_index(rng, docs.size())];
    max_err = std::max(max_err,
                       std::abs(tfidf_score(a, b, model) - oracle::tfidf_cosine(a, b, docs)));
  }
  check(5, max_err <= 1e-12,
        fmt("tfidf cosine vs brute-force oracle: max abs err %.2e (<= 1e-12)", max_err));

  auto instances = synth::make_lexical_instances(30, 120, 2, 52);
  std::vector<std::vector<std::string>> fit_docs;
  for (const auto& inst : instances) {
    fit_docs.push_back(tokenize(inst.context));
    for (const auto& cand : inst.candidates) fit_docs.push_back(tokenize(cand));
  }
  TfIdfModel lexical = TfIdfModel::fit(fit_docs);
  PairScorer scorer = make_tfidf_scorer(lexical);
  std::vector<RankingResult> results;
  for (const auto& inst : instances) results.push_back(rank(inst, scorer));
  const double recall = recall_at_k(results, 1);
  check(5, recall >= 0.9,
        fmt("tfidf 1-in-2 R@1 on the shared-rare-token corpus: %.3f (>= 0.9)", recall));
}

// --------------------------------------------------------------------------
// 6. Ensemble identities.

void criterion_6() {
  auto corpus = synth::make_qa_corpus(8, 60, 2, 61);
  Ensemble ensemble;
  ensemble.members.push_back(synth::tiny_model(Arch::cnn, corpus.vocab, 8, 62));
  ensemble.members.push_back(synth::tiny_model(Arch::lstm, corpus.vocab, 8, 63));
  ensemble.members.push_back(synth::tiny_model(Arch::bilstm, corpus.vocab, 8, 64));
  Ensemble solo;
  solo.members.push_back(ensemble.members[1]);

  Rng rng(65);
  const int vocab_size = static_cast<int>(corpus.vocab.size());
  bool solo_exact = true, bounded = true;
  for (int i = 0; i < 1000; ++i) {
    TokenSeq ctx = synth::random_seq(rng, vocab_size, 6, 1, 6);
    TokenSeq resp = synth::random_seq(rng, vocab_size, 6, 1, 6);
    if (ensemble_score(ctx, resp, solo) != score_pair(ctx, resp, solo.members[0]))
      solo_exact = false;
    double lo = 1.0, hi = 0.0;
    for (const auto& m : ensemble.members) {
      const double s = score_pair(ctx, resp, m);
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    const double mean = ensemble_score(ctx, resp, ensemble);
    if (mean < lo || mean > hi) bounded = false;
  }
  check(6, solo_exact, "single-member ensemble equals the member exactly on 1000 pairs");
  check(6, mean_of_scores({0.2, 0.8}) == 0.5, "mean of {0.2, 0.8} is exactly 0.5");
  check(6, bounded, "ensemble scores stay within [min, max] of members on 1000 pairs");
}

// --------------------------------------------------------------------------
// 7. Masking invariance, 64-bit in-memory and 32-bit after save/load.

void criterion_7() {
  auto corpus = synth::make_qa_corpus(8, 60, 2, 71);
  const fs::path tmp =
      fs::temp_directory_path() / ("dialogrank_acc7_" + std::to_string(::getpid()));
  fs::create_directories(tmp);
  const int vocab_size = static_cast<int>(corpus.vocab.size());
  double worst64 = 0.0, worst32 = 0.0;
  for (Arch arch : {Arch::cnn, Arch::lstm, Arch::bilstm}) {
    DualEncoderModel model = synth::tiny_model(arch, corpus.vocab, 8, 72);
    save_model(model, tmp / "m.drnk", 0xfeed);
    DualEncoderModel loaded = load_model(tmp / "m.drnk", 0xfeed);
    Rng rng(73);
    for (int i = 0; i < 40; ++i) {
      TokenSeq ctx = synth::random_seq(rng, vocab_size, 7, 1, 7);
      TokenSeq resp = synth::random_seq(rng, vocab_size, 6, 1, 6);
      TokenSeq ctx_wide = synth::repad(ctx, 11);
      TokenSeq resp_wide = synth::repad(resp, 11);

      std::vector<TokenSeq> narrow = {ctx}, wide = {ctx_wide};
      Matrix out_narrow =
          encode_batch(SequenceBatch::from(narrow), model.embeddings.value, model.context_encoder);
      Matrix out_wide =
          encode_batch(SequenceBatch::from(wide), model.embeddings.value, model.context_encoder);
      for (int d = 0; d < out_narrow.cols; ++d)
        worst64 = std::max(worst64, std::abs(out_narrow(0, d) - out_wide(0, d)));
      worst64 = std::max(
          worst64, std::abs(score_pair(ctx, resp, model) - score_pair(ctx_wide, resp_wide, model)));
      worst32 = std::max(worst32, std::abs(score_pair(ctx, resp, loaded) -
                                           score_pair(ctx_wide, resp_wide, loaded)));
    }
  }
  fs::remove_all(tmp);
  check(7, worst64 <= 1e-12,
        fmt("64-bit in-memory repadding delta %.2e (<= 1e-12)", worst64));
  check(7, worst32 <= 1e-6,
        fmt("32-bit loaded-model repadding delta %.2e (<= 1e-6)", worst32));
}

// --------------------------------------------------------------------------
// 8. Byte-identical train + evaluate through the CLI.

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void criterion_8() {
  const fs::path dir =
      fs::temp_directory_path() / ("dialogrank_acc8_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  {
    std::ofstream dialogs(dir / "dialogs.txt");
    for (int i = 0; i < 60; ++i)
      dialogs << "A\tquestion q" << i % 20 << " about f" << i % 5 << "\n"
              << "B\tanswer a" << i % 20 << " here\n"
              << "A\tthanks for a" << i % 20 << "\n\n";
  }
  auto cli = [&](const std::string& args) {
    const std::string cmd = "cd '" + dir.string() + "' && '" + DIALOGRANK_CLI_PATH + "' " + args +
                            " > /dev/null 2>&1";
    return std::system(cmd.c_str()) == 0;
  };
  bool ok = cli("prepare --dialogs dialogs.txt --out data --seed 3 --test-fraction 0.1 "
                "--valid-fraction 0.1 --candidates 2") &&
            cli("vocab --train data/train_examples.csv --out data --dim 12 --seed 3");
  for (const char* run : {"r1", "r2"}) {
    ok = ok &&
         cli(std::string("train --train data/train_examples.csv "
                         "--valid data/valid_instances_n2.csv --vocab data/vocab.txt "
                         "--embeddings data/embeddings.txt --model-out ") +
             run + ".drnk --arch lstm --hidden 8 --batch-size 8 --epochs 3 --patience 3 "
                   "--seed 11 --max-len 24") &&
         cli(std::string("evaluate --model ") + run +
             ".drnk --vocab data/vocab.txt --instances 2=data/test_instances_n2.csv "
             "--metrics 2:1 --threads 1 --out " + run + "_metrics.csv");
  }
  if (!ok) {
    fail(8, "CLI pipeline did not complete");
    fs::remove_all(dir);
    return;
  }
  const bool metrics_equal = slurp(dir / "r1_metrics.csv") == slurp(dir / "r2_metrics.csv") &&
                             !slurp(dir / "r1_metrics.csv").empty();
  const bool models_equal = slurp(dir / "r1.drnk") == slurp(dir / "r2.drnk");
  fs::remove_all(dir);
  check(8, metrics_equal, "two seeded train+evaluate runs produce byte-identical metric CSVs");
  check(8, models_equal, "the two runs also produce byte-identical model files");
}

// --------------------------------------------------------------------------
// 9. Optional: public-corpus subsample, LSTM vs tf-idf ordering.

std::vector<RankingInstance> load_public_test_instances(const fs::path& path, int limit) {
  std::ifstream in(path);
  CsvReader reader(in);
  std::vector<std::string> fields;
  std::vector<RankingInstance> out;
  bool first = true;
  while (reader.next(fields) && static_cast<int>(out.size()) < limit) {
    if (first) {  // header: context, ground truth, 9 distractors
      first = false;
      continue;
    }
    if (fields.size() < 3) continue;
    RankingInstance inst;
    inst.context = fields[0];
    inst.truth_index = 0;
    inst.candidates.assign(fields.begin() + 1, fields.end());
    out.push_back(std::move(inst));
  }
  return out;
}

void criterion_9() {
  const char* env = std::getenv("DIALOGRANK_UBUNTU_DATA");
  if (!env || !*env) {
    skip(9, "set DIALOGRANK_UBUNTU_DATA to a directory with train.csv/test.csv to run");
    return;
  }
  const fs::path dir(env);
  if (!fs::exists(dir / "train.csv") || !fs::exists(dir / "test.csv")) {
    skip(9, "train.csv/test.csv not found under " + dir.string());
    return;
  }
  constexpr int kTrainLimit = 100000;
  std::vector<Example> examples;
  {
    std::ifstream in(dir / "train.csv");
    CsvReader reader(in);
    std::vector<std::string> fields;
    bool first = true;
    while (reader.next(fields) && static_cast<int>(examples.size()) < kTrainLimit) {
      if (first) {
        first = false;
        continue;
      }
      if (fields.size() != 3) continue;
      const double flag = std::atof(fields[2].c_str());
      examples.push_back({fields[0], fields[1], flag >= 0.5 ? 1 : 0});
    }
  }
  auto instances = load_public_test_instances(dir / "test.csv", 5000);
  if (examples.size() < 1000 || instances.empty()) {
    skip(9, "public corpus files look empty");
    return;
  }

  TokenCounts counts;
  for (const auto& ex : examples) {
    counts.add_text(ex.context);
    counts.add_text(ex.response);
  }
  Vocabulary vocab = build_vocabulary(counts, 5, 50000);
  Rng rng(91);
  auto emb = init_embeddings(vocab, 100, rng);

  ModelSpec spec;
  spec.lstm_hidden = 128;
  DualEncoderModel model = make_model(Arch::lstm, spec, std::move(emb), 92);
  TrainConfig config;
  config.batch_size = 256;
  config.max_epochs = 4;
  config.patience = 2;
  config.seed = 93;
  config.max_len = 160;
  auto valid = std::vector<RankingInstance>(instances.begin(),
                                            instances.begin() + instances.size() / 10);
  TrainResult trained = train(std::move(model), vocab, examples, valid, config);

  auto encoded = encode_instances(instances, vocab, config.max_len);
  const double lstm_recall = model_recall_at_1(trained.model, encoded);

  std::vector<std::vector<std::string>> docs;
  for (const auto& ex : examples) {
    docs.push_back(tokenize(ex.context));
    docs.push_back(tokenize(ex.response));
  }
  TfIdfModel tfidf = TfIdfModel::fit(docs);
  PairScorer scorer = make_tfidf_scorer(tfidf);
  std::vector<RankingResult> results;
  for (const auto& inst : instances) results.push_back(rank(inst, scorer));
  const double tfidf_recall = recall_at_k(results, 1);

  check(9, lstm_recall > tfidf_recall,
        fmt("100k-subsample 1-in-10 R@1: lstm %.3f vs tfidf %.3f (lstm must lead)", lstm_recall,
            tfidf_recall));
}

// --------------------------------------------------------------------------
// 10. Sweep harness: rising learning curve on synthetic data.

void criterion_10() {
  auto train_corpus = synth::make_qa_corpus(50, 20000, 2, 1001);
  auto test_corpus = synth::make_qa_corpus(50, 2000, 10, 1002);

  SweepData data;
  data.examples = train_corpus.examples;
  data.valid = std::vector<RankingInstance>(train_corpus.instances.begin(),
                                            train_corpus.instances.begin() + 200);
  data.test = std::vector<RankingInstance>(test_corpus.instances.begin(),
                                           test_corpus.instances.begin() + 500);

  ModelSpec spec;
  spec.lstm_hidden = 16;
  spec.bilstm_hidden = 8;
  spec.cnn.filters = {{1, 8}};
  TrainConfig config;
  config.batch_size = 64;
  config.max_epochs = 2;
  config.patience = 2;
  config.seed = 1003;
  config.max_len = 12;

  Rng rng(1004);
  auto emb = init_embeddings(train_corpus.vocab, 16, rng);
  const Arch archs[] = {Arch::cnn, Arch::lstm, Arch::bilstm};
  const int sizes[] = {1000, 2000, 5000, 10000};
  auto points = sweep(archs, sizes, data, train_corpus.vocab, emb, spec, config);

  for (Arch arch : archs) {
    double smallest = -1.0, largest = -1.0;
    for (const auto& pt : points) {
      if (pt.arch != arch) continue;
      if (pt.size == sizes[0]) smallest = pt.test_recall1;
      if (pt.size == sizes[3]) largest = pt.test_recall1;
    }
    check(10, largest >= smallest,
          fmt("%s 1-in-10 R@1 at 10k examples %.3f >= %.3f at 1k", arch_name(arch).c_str(),
              largest, smallest));
  }
}

}  // namespace

int main() {
  std::printf("dialogrank acceptance suite\n");
  const auto start = std::chrono::steady_clock::now();
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  std::printf("total time %.1fs, %s\n", seconds_since(start),
              g_failures == 0 ? "all criteria passed" : "FAILURES PRESENT");
  return g_failures == 0 ? 0 : 1;
}
