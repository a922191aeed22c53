#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "dialogrank/numerics.hpp"
#include "dialogrank/rng.hpp"
#include "dialogrank/text.hpp"

namespace dialogrank {

// PAD-filled id matrix with per-item true lengths. Positions at or beyond an
// item's length are PAD and never influence encoder outputs.
struct SequenceBatch {
  int count = 0;
  int max_len = 0;
  std::vector<std::int32_t> ids;  // count*max_len, row-major
  std::vector<int> lengths;

  std::int32_t id_at(int item, int t) const {
    return ids[static_cast<std::size_t>(item) * max_len + t];
  }

  static SequenceBatch from(std::span<const TokenSeq> seqs);
  static SequenceBatch from(std::span<const TokenSeq* const> seqs);
};

enum class Nonlinearity { relu, tanh };

// One bank of convolution filters of a fixed width. Each kernel row is the
// flattened w*e window weights, position-major.
struct CnnFilterGroup {
  int width = 0;
  Parameter kernels;  // count x (width*e)
  Parameter biases;   // count x 1
  int count() const { return kernels.value.rows; }
};

struct CnnParams {
  int input_dim = 0;
  Nonlinearity activation = Nonlinearity::relu;
  std::vector<CnnFilterGroup> groups;

  int output_dim() const;
  int max_width() const;
};

struct LstmParams {
  int input_dim = 0;
  int hidden = 0;
  Parameter w_i, w_f, w_c, w_o;  // hidden x input_dim
  Parameter u_i, u_f, u_c, u_o;  // hidden x hidden
  Parameter b_i, b_f, b_c, b_o;  // hidden x 1
};

struct BiLstmParams {
  LstmParams forward;
  LstmParams backward;
  int output_dim() const { return forward.hidden + backward.hidden; }
};

using EncoderParams = std::variant<CnnParams, LstmParams, BiLstmParams>;

// Filter spec: (width, count) pairs. Widths 1..5 are supported.
CnnParams make_cnn(int input_dim, std::span<const std::pair<int, int>> filters,
                   Nonlinearity activation);
LstmParams make_lstm(int input_dim, int hidden);
BiLstmParams make_bilstm(int input_dim, int hidden);

// Weight initialization: uniform in [-s, s] with s = 1/sqrt(fan-in); biases
// zero except the LSTM forget bias, which starts at 1.
void init_encoder(CnnParams& params, Rng& rng);
void init_encoder(LstmParams& params, Rng& rng);
void init_encoder(BiLstmParams& params, Rng& rng);
void init_encoder(EncoderParams& params, Rng& rng);

int encoder_output_dim(const EncoderParams& params);
std::vector<Parameter*> encoder_parameters(EncoderParams& params);

// Column t is the embedding row of token t; PAD columns are hard zeros, so
// the PAD row of E never influences outputs or gradients.
Matrix embed(const TokenSeq& seq, const EmbeddingMatrix& emb);

struct CnnCache {
  int filters = 0;
  std::vector<int> argmax;    // count*filters; position of the pooled window
  std::vector<double> act;    // activation at the pooled window
};

struct LstmItemCache {
  int len = 0;
  // len*hidden each, time-major
  std::vector<double> gate_i, gate_f, gate_g, gate_o, cell, hidden;
};

struct LstmCache {
  std::vector<LstmItemCache> items;
};

struct BiLstmCache {
  LstmCache fwd;
  LstmCache bwd;
};

using EncoderCache = std::variant<CnnCache, LstmCache, BiLstmCache>;

// Forward passes return one output row per batch item. Passing a cache
// pointer records the activations needed for the exact backward pass.
Matrix cnn_encode(const SequenceBatch& batch, const EmbeddingMatrix& emb, const CnnParams& params,
                  CnnCache* cache = nullptr);
Matrix lstm_encode(const SequenceBatch& batch, const EmbeddingMatrix& emb,
                   const LstmParams& params, LstmCache* cache = nullptr);
Matrix bilstm_encode(const SequenceBatch& batch, const EmbeddingMatrix& emb,
                     const BiLstmParams& params, BiLstmCache* cache = nullptr);
Matrix encode_batch(const SequenceBatch& batch, const EmbeddingMatrix& emb,
                    const EncoderParams& params, EncoderCache* cache = nullptr);

// Accumulates analytic gradients into the encoder parameters and, when
// d_embeddings is non-null, into the embedding rows that were read. The PAD
// row never receives gradient.
void encoder_backward(const Matrix& d_out, const SequenceBatch& batch, const EmbeddingMatrix& emb,
                      EncoderParams& params, const EncoderCache& cache, Matrix* d_embeddings);

}  // namespace dialogrank
