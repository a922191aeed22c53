// dialogrank: build ranking data from dialogs, train dual-encoder scorers,
// evaluate Recall@k, and combine models into ensembles.

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dialogrank/corpus.hpp"
#include "dialogrank/csv.hpp"
#include "dialogrank/errors.hpp"
#include "dialogrank/model_io.hpp"
#include "dialogrank/ranking.hpp"
#include "dialogrank/rng.hpp"
#include "dialogrank/scorer.hpp"
#include "dialogrank/text.hpp"
#include "dialogrank/training.hpp"
#include "selftest.hpp"

namespace fs = std::filesystem;
using namespace dialogrank;

namespace {

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string percent1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", v * 100.0);
  return buf;
}

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

int parse_int(const std::string& text, const std::string& what) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("bad " + what + ": '" + text + "'");
  }
}

std::vector<std::pair<int, int>> parse_filters(const std::string& spec) {
  std::vector<std::pair<int, int>> filters;
  for (const auto& part : split_list(spec, ',')) {
    const auto colon = part.find(':');
    if (colon == std::string::npos)
      throw ValidationError("bad filter spec '" + part + "', expected width:count");
    filters.emplace_back(parse_int(part.substr(0, colon), "filter width"),
                         parse_int(part.substr(colon + 1), "filter count"));
  }
  if (filters.empty()) throw ValidationError("empty filter spec");
  return filters;
}

std::vector<std::pair<int, int>> parse_metrics(const std::string& spec) {
  std::vector<std::pair<int, int>> metrics;
  for (const auto& part : split_list(spec, ',')) {
    const auto colon = part.find(':');
    if (colon == std::string::npos)
      throw ValidationError("bad metric '" + part + "', expected n:k");
    metrics.emplace_back(parse_int(part.substr(0, colon), "metric n"),
                         parse_int(part.substr(colon + 1), "metric k"));
  }
  if (metrics.empty()) throw ValidationError("empty metric list");
  return metrics;
}

int infer_glove_dim(const fs::path& path) {
  auto in = open_input(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    int count = -1;  // first field is the token
    while (ls >> tok) ++count;
    if (count < 1) throw ValidationError("embedding file has no vector components");
    return count;
  }
  throw ValidationError("embedding file is empty: " + path.string());
}

// Shared model/optimizer options for train and sweep.
struct HyperOptions {
  std::string arch = "lstm";
  int dim = 100;
  int hidden = 200;
  int bilstm_hidden = 250;
  std::string filters = "1:400,2:100,3:100";
  std::string cnn_activation = "relu";
  bool shared_encoders = true;
  bool freeze_embeddings = false;
  int batch_size = 256;
  int epochs = 10;
  int patience = 1;
  std::uint64_t seed = 0;
  int max_len = 160;
  double learning_rate = 0.001;
  int threads = 1;

  void attach(CLI::App* cmd, bool with_arch = true) {
    if (with_arch)
      cmd->add_option("--arch", arch, "Encoder architecture: cnn|lstm|bilstm")
          ->check(CLI::IsMember({"cnn", "lstm", "bilstm"}));
    cmd->add_option("--dim", dim, "Embedding dimension (ignored when --embeddings is given)");
    cmd->add_option("--hidden", hidden, "LSTM hidden units");
    cmd->add_option("--bilstm-hidden", bilstm_hidden, "Bi-LSTM hidden units per direction");
    cmd->add_option("--filters", filters, "CNN filter spec, width:count pairs");
    cmd->add_option("--cnn-activation", cnn_activation, "CNN nonlinearity: relu|tanh")
        ->check(CLI::IsMember({"relu", "tanh"}));
    cmd->add_flag("--shared,!--separate", shared_encoders,
                  "Share encoder parameters between context and response");
    cmd->add_flag("--freeze-embeddings", freeze_embeddings,
                  "Do not update word vectors during training");
    cmd->add_option("--batch-size", batch_size, "Minibatch size");
    cmd->add_option("--epochs", epochs, "Maximum training epochs");
    cmd->add_option("--patience", patience, "Epochs without validation improvement before stop");
    cmd->add_option("--seed", seed, "RNG seed");
    cmd->add_option("--max-len", max_len, "Token sequence cap (tail for contexts, head for responses)");
    cmd->add_option("--learning-rate", learning_rate, "Adam step size");
    cmd->add_option("--threads", threads, "Worker threads for validation evaluation");
  }

  ModelSpec model_spec() const {
    ModelSpec spec;
    spec.lstm_hidden = hidden;
    spec.bilstm_hidden = bilstm_hidden;
    spec.cnn.filters = parse_filters(filters);
    spec.cnn.activation = cnn_activation == "tanh" ? Nonlinearity::tanh : Nonlinearity::relu;
    spec.shared_encoders = shared_encoders;
    spec.freeze_embeddings = freeze_embeddings;
    return spec;
  }

  TrainConfig train_config() const {
    TrainConfig config;
    config.batch_size = batch_size;
    config.max_epochs = epochs;
    config.patience = patience;
    config.seed = seed;
    config.shared_encoders = shared_encoders;
    config.freeze_embeddings = freeze_embeddings;
    config.max_len = max_len;
    config.threads = threads;
    config.adam.alpha = learning_rate;
    return config;
  }
};

Vocabulary load_vocab_file(const fs::path& path) {
  auto in = open_input(path);
  return Vocabulary::load(in);
}

EmbeddingMatrix load_embeddings_for(const Vocabulary& vocab, const fs::path& glove, int dim,
                                    std::uint64_t seed) {
  Rng rng(splitmix64(seed ^ 0x9d2c5680ULL));
  if (glove.empty()) return init_embeddings(vocab, dim, rng);
  auto in = open_input(glove);
  return load_pretrained(in, vocab, infer_glove_dim(glove), rng);
}

std::vector<Example> load_triples_file(const fs::path& path) {
  auto in = open_input(path);
  return load_triples(in, true);
}

std::vector<RankingInstance> load_instances_file(const fs::path& path) {
  auto in = open_input(path);
  return load_instances(in);
}

void write_history_csv(const fs::path& path, const std::vector<EpochRecord>& history) {
  auto out = open_output(path);
  write_csv_row(out, {"epoch", "loss", "recall@1", "seconds"});
  for (const auto& rec : history)
    write_csv_row(out, {std::to_string(rec.epoch), fixed6(rec.train_loss),
                        fixed6(rec.valid_recall1), fixed3(rec.seconds)});
}

// ---------------------------------------------------------------------------
// prepare

struct PrepareOptions {
  fs::path dialogs;
  fs::path out_dir;
  double test_fraction = 0.02;
  double valid_fraction = 0.02;
  std::uint64_t seed = 0;
  std::string candidates = "2,10";
};

int cmd_prepare(const PrepareOptions& opt) {
  auto in = open_input(opt.dialogs);
  auto dialogs = load_dialogs(in);
  if (dialogs.empty()) throw ValidationError("no dialogs in " + opt.dialogs.string());

  std::vector<Dialog> usable;
  for (auto& d : dialogs)
    if (d.turns.size() >= 3) usable.push_back(std::move(d));
  if (usable.size() < dialogs.size())
    std::cerr << "note: skipped " << dialogs.size() - usable.size()
              << " dialogs with fewer than 3 turns\n";

  SplitSpec split_spec{opt.test_fraction, opt.valid_fraction, opt.seed};
  DialogSplit split = split_dialogs(usable, split_spec);
  UtterancePool pool = UtterancePool::from_dialogs(usable);

  std::vector<Example> examples;
  for (const auto& dialog : split.train) {
    Rng rng = derive_rng(opt.seed, "examples:" + dialog.id);
    auto batch = generate_examples(dialog, pool, rng);
    examples.insert(examples.end(), batch.begin(), batch.end());
  }
  Rng shuffle_rng(splitmix64(opt.seed ^ 0x5deece66dULL));
  std::shuffle(examples.begin(), examples.end(), shuffle_rng);

  fs::create_directories(opt.out_dir);
  {
    auto out = open_output(opt.out_dir / "train_examples.csv");
    write_triples(out, examples);
  }

  std::vector<int> ns;
  for (const auto& item : split_list(opt.candidates, ',')) ns.push_back(parse_int(item, "n"));
  for (int n : ns) {
    for (const auto& [name, dialog_set] :
         {std::pair{std::string("valid"), &split.valid}, {std::string("test"), &split.test}}) {
      Rng rng = derive_rng(opt.seed, name + ":" + std::to_string(n));
      auto instances = build_ranking_instances(*dialog_set, n, pool, rng);
      if (instances.empty())
        throw ValidationError("the " + name + " split produced no ranking instances");
      auto out = open_output(opt.out_dir /
                             (name + "_instances_n" + std::to_string(n) + ".csv"));
      write_instances(out, instances);
    }
  }

  std::cout << "dialogs: " << usable.size() << " (train " << split.train.size() << ", valid "
            << split.valid.size() << ", test " << split.test.size() << ")\n"
            << "training examples: " << examples.size() << "\n"
            << "instance files per split for n in {" << opt.candidates << "}\n"
            << "wrote " << opt.out_dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// vocab

struct VocabOptions {
  fs::path train;
  fs::path out_dir;
  fs::path glove;
  long long min_count = 1;
  long long max_size = 0;
  int dim = 100;
  std::uint64_t seed = 0;
};

int cmd_vocab(const VocabOptions& opt) {
  auto examples = load_triples_file(opt.train);
  if (examples.empty()) throw ValidationError("no training examples in " + opt.train.string());
  TokenCounts counts;
  for (const auto& ex : examples) {
    counts.add_text(ex.context);
    counts.add_text(ex.response);
  }
  Vocabulary vocab = build_vocabulary(counts, opt.min_count, opt.max_size);

  const int dim = opt.glove.empty() ? opt.dim : infer_glove_dim(opt.glove);
  EmbeddingMatrix emb = load_embeddings_for(vocab, opt.glove, dim, opt.seed);

  fs::create_directories(opt.out_dir);
  {
    auto out = open_output(opt.out_dir / "vocab.txt");
    vocab.save(out);
  }
  {
    auto out = open_output(opt.out_dir / "embeddings.txt");
    save_embeddings(out, vocab, emb);
  }
  std::cout << "vocabulary: " << vocab.size() << " tokens (reserved included)\n"
            << "embeddings: " << emb.rows << " x " << emb.cols << "\n"
            << "wrote " << (opt.out_dir / "vocab.txt").string() << ", "
            << (opt.out_dir / "embeddings.txt").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  fs::path train;
  fs::path valid;
  fs::path vocab;
  fs::path embeddings;
  fs::path model_out;
  fs::path history;
  HyperOptions hyper;
};

int cmd_train(const TrainOptions& opt) {
  Vocabulary vocab = load_vocab_file(opt.vocab);
  const std::uint64_t checksum = fnv1a_file(opt.vocab);
  EmbeddingMatrix emb = load_embeddings_for(vocab, opt.embeddings, opt.hyper.dim,
                                            opt.hyper.seed);
  auto examples = load_triples_file(opt.train);
  auto valid = load_instances_file(opt.valid);

  TrainConfig config = opt.hyper.train_config();
  config.eval_candidates = valid.empty() ? 0 : static_cast<int>(valid[0].candidates.size());
  const Arch arch = parse_arch(opt.hyper.arch);
  DualEncoderModel model =
      make_model(arch, opt.hyper.model_spec(), std::move(emb), opt.hyper.seed);

  std::cout << "training " << arch_name(arch) << " on " << examples.size() << " examples ("
            << valid.size() << " validation instances, 1-in-" << config.eval_candidates
            << ")\n";
  TrainResult result = train(std::move(model), vocab, examples, valid, config);

  for (const auto& rec : result.history)
    std::cout << "epoch " << rec.epoch << ": loss " << fixed6(rec.train_loss) << ", valid R@1 "
              << percent1(rec.valid_recall1) << ", " << fixed3(rec.seconds) << "s\n";
  std::cout << "best epoch " << result.best_epoch << " with R@1 "
            << percent1(result.best_recall1) << "\n";

  if (!opt.history.empty()) write_history_csv(opt.history, result.history);
  save_model(result.model, opt.model_out, checksum);
  std::cout << "wrote " << opt.model_out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct ScorerChoice {
  fs::path model;
  fs::path ensemble;
  fs::path tfidf_corpus;
  fs::path vocab;
  int max_len = 160;

  void attach(CLI::App* cmd) {
    auto* m = cmd->add_option("--model", model, "Trained model file");
    auto* e = cmd->add_option("--ensemble", ensemble, "Ensemble manifest (one model path per line)");
    auto* t = cmd->add_option("--tfidf", tfidf_corpus,
                              "Score with the tf-idf baseline fitted on this triples CSV");
    m->excludes(e)->excludes(t);
    e->excludes(t);
    cmd->add_option("--vocab", vocab, "Vocabulary file (required for --model/--ensemble)");
    cmd->add_option("--max-len", max_len, "Token sequence cap");
  }

  bool is_tfidf() const { return !tfidf_corpus.empty(); }

  std::string label() const {
    if (!tfidf_corpus.empty()) return "tfidf(tf=raw,idf=ln(N/df),unseen=0)";
    if (!ensemble.empty()) return "ensemble";
    return "model";
  }
};

// Loaded scoring state. Holds whichever backend was requested plus a factory
// for per-thread scorers.
struct LoadedScorer {
  std::optional<Vocabulary> vocab;
  std::optional<DualEncoderModel> model;
  std::optional<Ensemble> ensemble;
  std::optional<TfIdfModel> tfidf;
  std::string label;
  int max_len = 160;

  ScorerFactory factory() const {
    return [this]() -> PairScorer {
      if (tfidf) return make_tfidf_scorer(*tfidf);
      if (ensemble) return make_ensemble_scorer(*ensemble, *vocab, max_len);
      return make_model_scorer(*model, *vocab, max_len);
    };
  }
};

LoadedScorer load_scorer(const ScorerChoice& choice) {
  LoadedScorer loaded;
  loaded.max_len = choice.max_len;
  if (choice.is_tfidf()) {
    auto examples = load_triples_file(choice.tfidf_corpus);
    std::vector<std::vector<std::string>> docs;
    docs.reserve(examples.size() * 2);
    for (const auto& ex : examples) {
      docs.push_back(tokenize(ex.context));
      docs.push_back(tokenize(ex.response));
    }
    loaded.tfidf = TfIdfModel::fit(docs);
    loaded.label = choice.label();
    return loaded;
  }
  if (choice.model.empty() && choice.ensemble.empty())
    throw ValidationError("choose one of --model, --ensemble or --tfidf");
  if (choice.vocab.empty())
    throw ValidationError("--vocab is required with --model/--ensemble");
  loaded.vocab = load_vocab_file(choice.vocab);
  const std::uint64_t checksum = fnv1a_file(choice.vocab);
  if (!choice.ensemble.empty()) {
    loaded.ensemble = load_ensemble(choice.ensemble, checksum);
    loaded.label = "ensemble(" + std::to_string(loaded.ensemble->members.size()) + ")";
  } else {
    loaded.model = load_model(choice.model, checksum);
    loaded.label = arch_name(loaded.model->arch);
  }
  return loaded;
}

struct EvaluateOptions {
  ScorerChoice scorer;
  std::vector<std::string> instance_specs;
  std::string metrics = "2:1,10:1,10:2,10:5";
  fs::path out;
  int threads = 1;
};

int cmd_evaluate(const EvaluateOptions& opt) {
  std::map<int, std::vector<RankingInstance>> instances;
  for (const auto& spec : opt.instance_specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos)
      throw ValidationError("bad --instances '" + spec + "', expected N=FILE");
    const int n = parse_int(spec.substr(0, eq), "instance n");
    instances[n] = load_instances_file(spec.substr(eq + 1));
  }
  const auto requests = parse_metrics(opt.metrics);
  LoadedScorer scorer = load_scorer(opt.scorer);
  const auto rows = evaluate(scorer.factory(), instances, requests, opt.threads);

  std::cout << "metric        " << scorer.label << "\n";
  for (const auto& row : rows) {
    char metric[32];
    std::snprintf(metric, sizeof metric, "1 in %d R@%d", row.n, row.k);
    std::printf("%-13s %s\n", metric, percent1(row.recall).c_str());
  }
  if (!opt.out.empty()) {
    auto out = open_output(opt.out);
    write_csv_row(out, {"n", "k", "recall", "scorer"});
    for (const auto& row : rows)
      write_csv_row(out, {std::to_string(row.n), std::to_string(row.k), fixed6(row.recall),
                          scorer.label});
    std::cout << "wrote " << opt.out.string() << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// rank

struct RankOptions {
  ScorerChoice scorer;
  fs::path context;
  fs::path candidates;
};

int cmd_rank(const RankOptions& opt) {
  std::string context;
  {
    auto in = open_input(opt.context);
    std::ostringstream buf;
    buf << in.rdbuf();
    context = buf.str();
    while (!context.empty() && (context.back() == '\n' || context.back() == '\r'))
      context.pop_back();
  }
  std::vector<std::string> candidates;
  {
    auto in = open_input(opt.candidates);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) candidates.push_back(line);
    }
  }
  if (candidates.size() < 2) throw ValidationError("need at least 2 candidate responses");

  LoadedScorer scorer = load_scorer(opt.scorer);
  RankingInstance instance{context, candidates, 0};
  RankingResult result = rank(instance, scorer.factory()());

  std::printf("%-7s %-18s %s\n", "N-Best", "Confidence", "Response");
  for (std::size_t pos = 0; pos < result.order.size(); ++pos) {
    const int idx = result.order[pos];
    const double conf = result.scores[idx];
    const int stars = std::clamp(static_cast<int>(std::lround(conf * 10.0)), 0, 10);
    char confidence[32];
    std::snprintf(confidence, sizeof confidence, "%-10s %.3f", std::string(stars, '*').c_str(),
                  conf);
    std::printf("%-7zu %-18s %s\n", pos + 1, confidence, candidates[idx].c_str());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// ensemble

struct EnsembleOptions {
  std::vector<fs::path> members;
  fs::path vocab;
  fs::path out;
};

int cmd_ensemble(const EnsembleOptions& opt) {
  Vocabulary vocab = load_vocab_file(opt.vocab);
  const std::uint64_t checksum = fnv1a_file(opt.vocab);
  if (opt.members.empty()) throw ValidationError("no member models given");
  for (const auto& member : opt.members) load_model(member, checksum);  // verify now

  auto out = open_output(opt.out);
  out << "# dialogrank ensemble manifest\n";
  for (const auto& member : opt.members) out << fs::absolute(member).string() << "\n";
  std::cout << "wrote " << opt.out.string() << " with " << opt.members.size() << " members\n";
  return 0;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepOptions {
  fs::path train;
  fs::path valid;
  fs::path test;
  fs::path vocab;
  fs::path embeddings;
  fs::path out;
  std::string sizes;
  std::string archs = "cnn,lstm,bilstm";
  HyperOptions hyper;
};

int cmd_sweep(const SweepOptions& opt) {
  Vocabulary vocab = load_vocab_file(opt.vocab);
  EmbeddingMatrix emb = load_embeddings_for(vocab, opt.embeddings, opt.hyper.dim,
                                            opt.hyper.seed);
  SweepData data;
  data.examples = load_triples_file(opt.train);
  data.valid = load_instances_file(opt.valid);
  data.test = load_instances_file(opt.test);

  std::vector<int> sizes;
  for (const auto& item : split_list(opt.sizes, ',')) sizes.push_back(parse_int(item, "size"));
  std::vector<Arch> archs;
  for (const auto& item : split_list(opt.archs, ',')) archs.push_back(parse_arch(item));

  const auto points =
      sweep(archs, sizes, data, vocab, emb, opt.hyper.model_spec(), opt.hyper.train_config());

  std::printf("%-8s %-10s %s\n", "arch", "size", "test R@1");
  for (const auto& pt : points)
    std::printf("%-8s %-10d %s\n", arch_name(pt.arch).c_str(), pt.size,
                percent1(pt.test_recall1).c_str());
  if (!opt.out.empty()) {
    auto out = open_output(opt.out);
    write_csv_row(out, {"arch", "size", "recall@1"});
    for (const auto& pt : points)
      write_csv_row(out, {arch_name(pt.arch), std::to_string(pt.size), fixed6(pt.test_recall1)});
    std::cout << "wrote " << opt.out.string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dialogrank: next-utterance ranking for multi-turn dialogs"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from an INI file ([subcommand] sections)");
  app.allow_config_extras(false);

  PrepareOptions prepare_opt;
  auto* prepare = app.add_subcommand("prepare", "Build training triples and ranking instances");
  prepare->add_option("--dialogs", prepare_opt.dialogs, "Dialog file (speaker<TAB>utterance blocks)")
      ->required();
  prepare->add_option("--out", prepare_opt.out_dir, "Output directory")->required();
  prepare->add_option("--test-fraction", prepare_opt.test_fraction, "Test split fraction");
  prepare->add_option("--valid-fraction", prepare_opt.valid_fraction, "Validation split fraction");
  prepare->add_option("--seed", prepare_opt.seed, "RNG seed");
  prepare->add_option("--candidates", prepare_opt.candidates,
                      "Comma list of candidate counts for instance files");

  VocabOptions vocab_opt;
  auto* vocab = app.add_subcommand("vocab", "Build the vocabulary and embedding matrix");
  vocab->add_option("--train", vocab_opt.train, "Training triples CSV")->required();
  vocab->add_option("--out", vocab_opt.out_dir, "Output directory")->required();
  vocab->add_option("--glove", vocab_opt.glove, "Pretrained vectors (GloVe text format)");
  vocab->add_option("--min-count", vocab_opt.min_count, "Minimum token frequency");
  vocab->add_option("--max-size", vocab_opt.max_size, "Vocabulary cap (0 = unlimited)");
  vocab->add_option("--dim", vocab_opt.dim, "Embedding dimension when no --glove is given");
  vocab->add_option("--seed", vocab_opt.seed, "RNG seed for out-of-vocabulary rows");

  TrainOptions train_opt;
  auto* train_cmd = app.add_subcommand("train", "Train a dual-encoder model");
  train_cmd->add_option("--train", train_opt.train, "Training triples CSV")->required();
  train_cmd->add_option("--valid", train_opt.valid, "Validation instance CSV")->required();
  train_cmd->add_option("--vocab", train_opt.vocab, "Vocabulary file")->required();
  train_cmd->add_option("--embeddings", train_opt.embeddings,
                        "Initial word vectors (GloVe text format)");
  train_cmd->add_option("--model-out", train_opt.model_out, "Output model file")->required();
  train_cmd->add_option("--history", train_opt.history, "Per-epoch history CSV");
  train_opt.hyper.attach(train_cmd);

  EvaluateOptions eval_opt;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Recall@k metrics for a scorer");
  eval_opt.scorer.attach(evaluate_cmd);
  evaluate_cmd->add_option("--instances", eval_opt.instance_specs,
                           "Instance files as N=FILE (repeatable)")
      ->required();
  evaluate_cmd->add_option("--metrics", eval_opt.metrics, "Comma list of n:k pairs");
  evaluate_cmd->add_option("--out", eval_opt.out, "Metrics CSV output");
  evaluate_cmd->add_option("--threads", eval_opt.threads, "Worker threads for scoring");

  RankOptions rank_opt;
  auto* rank_cmd = app.add_subcommand("rank", "Print the ranked n-best list for one context");
  rank_opt.scorer.attach(rank_cmd);
  rank_cmd->add_option("--context", rank_opt.context, "File holding the context text")->required();
  rank_cmd->add_option("--candidates", rank_opt.candidates, "File with one candidate per line")
      ->required();

  EnsembleOptions ensemble_opt;
  auto* ensemble_cmd = app.add_subcommand("ensemble", "Write a validated ensemble manifest");
  ensemble_cmd->add_option("--vocab", ensemble_opt.vocab, "Vocabulary file")->required();
  ensemble_cmd->add_option("--out", ensemble_opt.out, "Manifest output path")->required();
  ensemble_cmd->add_option("models", ensemble_opt.members, "Member model files")->required();

  SweepOptions sweep_opt;
  auto* sweep_cmd = app.add_subcommand("sweep", "Training-set-size sweep");
  sweep_cmd->add_option("--train", sweep_opt.train, "Training triples CSV")->required();
  sweep_cmd->add_option("--valid", sweep_opt.valid, "Validation instance CSV")->required();
  sweep_cmd->add_option("--test", sweep_opt.test, "Test instance CSV")->required();
  sweep_cmd->add_option("--vocab", sweep_opt.vocab, "Vocabulary file")->required();
  sweep_cmd->add_option("--embeddings", sweep_opt.embeddings, "Initial word vectors");
  sweep_cmd->add_option("--sizes", sweep_opt.sizes, "Ascending comma list of training sizes")
      ->required();
  sweep_cmd->add_option("--archs", sweep_opt.archs, "Comma list of architectures");
  sweep_cmd->add_option("--out", sweep_opt.out, "Sweep curve CSV output");
  sweep_opt.hyper.attach(sweep_cmd, /*with_arch=*/false);

  bool inject_fault = false;
  auto* selftest_cmd = app.add_subcommand("selftest", "Gradient checks and oracle suites");
  selftest_cmd->add_flag("--inject-gradient-fault", inject_fault)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (prepare->parsed()) return cmd_prepare(prepare_opt);
    if (vocab->parsed()) return cmd_vocab(vocab_opt);
    if (train_cmd->parsed()) return cmd_train(train_opt);
    if (evaluate_cmd->parsed()) return cmd_evaluate(eval_opt);
    if (rank_cmd->parsed()) return cmd_rank(rank_opt);
    if (ensemble_cmd->parsed()) return cmd_ensemble(ensemble_opt);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_opt);
    if (selftest_cmd->parsed())
      return dialogrank::tools::run_selftest(inject_fault) == 0 ? 0 : 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
