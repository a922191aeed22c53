#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dialogrank/corpus.hpp"
#include "dialogrank/numerics.hpp"
#include "dialogrank/ranking.hpp"
#include "dialogrank/scorer.hpp"

namespace dialogrank {

struct AdamConfig {
  double alpha = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment buffers, parallel to a fixed parameter list.
struct AdamState {
  AdamConfig config;
  long long t = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;

  static AdamState init(std::span<Parameter* const> params, AdamConfig config = {});
};

// One update from the gradients currently held by the parameters. Throws
// ValidationError naming the parameter if any gradient entry is non-finite.
void adam_step(std::span<Parameter* const> params, AdamState& state);

// Stop once the monitored value fails to improve for `patience` epochs;
// keep the best-so-far epoch.
struct EarlyStopper {
  int patience = 1;
  double best = 0.0;
  int best_epoch = -1;
  int stale = 0;

  // Returns true when `value` strictly improves on the best so far.
  bool observe(int epoch, double value);
  bool should_stop() const { return stale >= patience; }
};

struct TrainConfig {
  int batch_size = 256;
  int max_epochs = 10;
  int patience = 1;
  std::uint64_t seed = 0;
  int eval_candidates = 10;  // n of the validation ranking instances
  bool shared_encoders = true;
  bool freeze_embeddings = false;
  int max_len = 160;
  int threads = 1;  // read-only evaluation passes only; the optimizer is serial
  AdamConfig adam;
};

struct EpochRecord {
  int epoch = 0;           // 1-based
  double train_loss = 0.0; // mean over all examples seen this epoch
  double valid_recall1 = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  DualEncoderModel model;  // parameters of the best validation epoch
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_recall1 = 0.0;
};

// Minibatch Adam over shuffled examples with per-epoch validation Recall@1,
// best-epoch snapshotting, and patience-based early stopping.
TrainResult train(DualEncoderModel model, const Vocabulary& vocab,
                  const std::vector<Example>& examples,
                  const std::vector<RankingInstance>& valid, const TrainConfig& config);

struct SweepData {
  std::vector<Example> examples;
  std::vector<RankingInstance> valid;
  std::vector<RankingInstance> test;
};

struct SweepPoint {
  Arch arch;
  int size = 0;
  double test_recall1 = 0.0;
};

// Trains a fresh model per (architecture, size) on the first `size` examples
// of one fixed shuffle and reports test Recall@1. Sizes must be strictly
// ascending and within the example pool.
std::vector<SweepPoint> sweep(std::span<const Arch> archs, std::span<const int> sizes,
                              const SweepData& data, const Vocabulary& vocab,
                              const EmbeddingMatrix& embeddings, const ModelSpec& spec,
                              const TrainConfig& config);

}  // namespace dialogrank
