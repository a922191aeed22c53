#include "dialogrank/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "dialogrank/errors.hpp"

namespace dialogrank {

AdamState AdamState::init(std::span<Parameter* const> params, AdamConfig config) {
  AdamState state;
  state.config = config;
  state.m.reserve(params.size());
  state.v.reserve(params.size());
  for (const Parameter* p : params) {
    state.m.emplace_back(p->value.rows, p->value.cols);
    state.v.emplace_back(p->value.rows, p->value.cols);
  }
  return state;
}

void adam_step(std::span<Parameter* const> params, AdamState& state) {
  if (params.size() != state.m.size())
    throw ValidationError("adam_step: state does not match parameter list");
  const AdamConfig& c = state.config;
  state.t += 1;
  const double m_corr = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double v_corr = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    if (!p.value.same_shape(m))
      throw ValidationError("adam_step: shape changed for parameter " + p.name);
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad.data[k];
      if (!std::isfinite(g))
        throw ValidationError("non-finite gradient in parameter " + p.name);
      m.data[k] = c.beta1 * m.data[k] + (1.0 - c.beta1) * g;
      v.data[k] = c.beta2 * v.data[k] + (1.0 - c.beta2) * g * g;
      const double m_hat = m.data[k] / m_corr;
      const double v_hat = v.data[k] / v_corr;
      p.value.data[k] -= c.alpha * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

bool EarlyStopper::observe(int epoch, double value) {
  if (best_epoch < 0 || value > best) {
    best = value;
    best_epoch = epoch;
    stale = 0;
    return true;
  }
  ++stale;
  return false;
}

namespace {

struct EncodedExample {
  TokenSeq context;
  TokenSeq response;
  int flag = 0;
};

std::vector<EncodedExample> encode_examples(const std::vector<Example>& examples,
                                            const Vocabulary& vocab, int max_len) {
  std::vector<EncodedExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    EncodedExample enc;
    enc.context = encode_text(ex.context, vocab, max_len, Keep::tail);
    enc.response = encode_text(ex.response, vocab, max_len, Keep::head);
    enc.flag = ex.flag;
    if (enc.context.true_length == 0)
      throw ValidationError("training example has empty context after tokenization");
    if (enc.response.true_length == 0)
      throw ValidationError("training example has empty response after tokenization");
    out.push_back(std::move(enc));
  }
  return out;
}

}  // namespace

TrainResult train(DualEncoderModel model, const Vocabulary& vocab,
                  const std::vector<Example>& examples,
                  const std::vector<RankingInstance>& valid, const TrainConfig& config) {
  if (examples.empty()) throw ValidationError("train: no training examples");
  if (valid.empty()) throw ValidationError("train: no validation instances");
  if (config.batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
  if (config.patience < 1) throw ValidationError("train: patience must be >= 1");
  if (config.max_epochs < 1) throw ValidationError("train: max_epochs must be >= 1");

  const auto encoded = encode_examples(examples, vocab, config.max_len);
  const auto valid_encoded = encode_instances(valid, vocab, config.max_len);

  model.freeze_embeddings = config.freeze_embeddings;
  auto trainable = model.trainable_parameters();
  AdamState adam = AdamState::init(trainable, config.adam);

  Rng rng(config.seed);
  std::vector<std::size_t> order(encoded.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  EarlyStopper stopper{config.patience};
  DualEncoderModel best = model;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    const std::size_t n = order.size();
    const std::size_t bsz = static_cast<std::size_t>(config.batch_size);
    std::vector<const TokenSeq*> ctxs, resps;
    std::vector<int> flags;
    for (std::size_t begin = 0; begin < n; begin += bsz) {
      const std::size_t end = std::min(n, begin + bsz);  // last partial batch is trained too
      ctxs.clear();
      resps.clear();
      flags.clear();
      for (std::size_t i = begin; i < end; ++i) {
        const EncodedExample& ex = encoded[order[i]];
        ctxs.push_back(&ex.context);
        resps.push_back(&ex.response);
        flags.push_back(ex.flag);
      }
      model.zero_grads();
      const double mean_loss =
          model_backward(SequenceBatch::from(std::span<const TokenSeq* const>(ctxs)),
                         SequenceBatch::from(std::span<const TokenSeq* const>(resps)), flags,
                         model);
      adam_step(trainable, adam);
      loss_sum += mean_loss * static_cast<double>(end - begin);
    }

    const double recall1 = model_recall_at_1(model, valid_encoded, config.threads);
    const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start);
    result.history.push_back(
        {epoch, loss_sum / static_cast<double>(n), recall1, elapsed.count()});

    if (stopper.observe(epoch, recall1)) best = model;
    if (stopper.should_stop()) break;
  }

  result.model = std::move(best);
  result.best_epoch = stopper.best_epoch;
  result.best_recall1 = stopper.best;
  return result;
}

std::vector<SweepPoint> sweep(std::span<const Arch> archs, std::span<const int> sizes,
                              const SweepData& data, const Vocabulary& vocab,
                              const EmbeddingMatrix& embeddings, const ModelSpec& spec,
                              const TrainConfig& config) {
  if (archs.empty()) throw ValidationError("sweep: no architectures");
  if (sizes.empty()) throw ValidationError("sweep: no sizes");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < 1) throw ValidationError("sweep: sizes must be positive");
    if (i > 0 && sizes[i] == sizes[i - 1])
      throw ValidationError("sweep: duplicated size " + std::to_string(sizes[i]));
    if (i > 0 && sizes[i] < sizes[i - 1]) throw ValidationError("sweep: sizes must be ascending");
    if (static_cast<std::size_t>(sizes[i]) > data.examples.size())
      throw ValidationError("sweep: size " + std::to_string(sizes[i]) +
                            " exceeds available examples (" +
                            std::to_string(data.examples.size()) + ")");
  }

  std::vector<Example> shuffled = data.examples;
  Rng rng(config.seed);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto test_encoded = encode_instances(data.test, vocab, config.max_len);

  std::vector<SweepPoint> points;
  for (Arch arch : archs) {
    for (int size : sizes) {
      std::vector<Example> subset(shuffled.begin(), shuffled.begin() + size);
      const std::uint64_t model_seed =
          splitmix64(config.seed ^ fnv1a64(arch_name(arch) + ":" + std::to_string(size)));
      DualEncoderModel model = make_model(arch, spec, embeddings, model_seed);
      TrainConfig run = config;
      run.seed = model_seed;
      TrainResult trained = train(std::move(model), vocab, subset, data.valid, run);
      points.push_back({arch, size, model_recall_at_1(trained.model, test_encoded, config.threads)});
    }
  }
  return points;
}

}  // namespace dialogrank
