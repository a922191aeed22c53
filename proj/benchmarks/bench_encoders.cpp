#include <benchmark/benchmark.h>

#include "dialogrank/encoders.hpp"
#include "dialogrank/rng.hpp"
#include "dialogrank/scorer.hpp"

using namespace dialogrank;

namespace {

constexpr int kVocab = 5000;
constexpr int kDim = 64;

Matrix random_embeddings(std::uint64_t seed) {
  Matrix emb(kVocab, kDim);
  Rng rng(seed);
  for (int i = 1; i < emb.rows; ++i)
    for (int j = 0; j < emb.cols; ++j) emb(i, j) = uniform_real(rng, -0.25, 0.25);
  return emb;
}

SequenceBatch random_batch(int items, int len, std::uint64_t seed) {
  Rng rng(seed);
  SequenceBatch batch;
  batch.count = items;
  batch.max_len = len;
  batch.ids.assign(static_cast<std::size_t>(items) * len, Vocabulary::kPad);
  batch.lengths.assign(items, len);
  for (auto& id : batch.ids)
    id = 1 + static_cast<std::int32_t>(uniform_index(rng, kVocab - 1));
  return batch;
}

EncoderParams make_encoder(Arch arch) {
  switch (arch) {
    case Arch::cnn: {
      std::pair<int, int> filters[] = {{1, 64}, {2, 32}, {3, 32}};
      return make_cnn(kDim, filters, Nonlinearity::relu);
    }
    case Arch::lstm:
      return make_lstm(kDim, 64);
    case Arch::bilstm:
      return make_bilstm(kDim, 32);
  }
  return make_lstm(kDim, 64);
}

void BM_EncoderForward(benchmark::State& state, Arch arch) {
  Matrix emb = random_embeddings(1);
  EncoderParams params = make_encoder(arch);
  Rng rng(2);
  init_encoder(params, rng);
  SequenceBatch batch = random_batch(16, 64, 3);
  for (auto _ : state) benchmark::DoNotOptimize(encode_batch(batch, emb, params));
  state.SetItemsProcessed(state.iterations() * batch.count);
}

void BM_EncoderBackward(benchmark::State& state, Arch arch) {
  Parameter emb("embeddings", kVocab, kDim);
  emb.value = random_embeddings(4);
  EncoderParams params = make_encoder(arch);
  Rng rng(5);
  init_encoder(params, rng);
  SequenceBatch batch = random_batch(16, 64, 6);
  Matrix upstream(batch.count, encoder_output_dim(params));
  for (double& v : upstream.data) v = uniform_real(rng, -1.0, 1.0);
  for (auto _ : state) {
    EncoderCache cache;
    benchmark::DoNotOptimize(encode_batch(batch, emb.value, params, &cache));
    for (Parameter* p : encoder_parameters(params)) p->zero_grad();
    emb.zero_grad();
    encoder_backward(upstream, batch, emb.value, params, cache, &emb.grad);
  }
  state.SetItemsProcessed(state.iterations() * batch.count);
}

}  // namespace

BENCHMARK_CAPTURE(BM_EncoderForward, cnn, Arch::cnn);
BENCHMARK_CAPTURE(BM_EncoderForward, lstm, Arch::lstm);
BENCHMARK_CAPTURE(BM_EncoderForward, bilstm, Arch::bilstm);
BENCHMARK_CAPTURE(BM_EncoderBackward, cnn, Arch::cnn);
BENCHMARK_CAPTURE(BM_EncoderBackward, lstm, Arch::lstm);
BENCHMARK_CAPTURE(BM_EncoderBackward, bilstm, Arch::bilstm);
