#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dialogrank/encoders.hpp"
#include "dialogrank/numerics.hpp"
#include "dialogrank/text.hpp"

namespace dialogrank {

enum class Arch { cnn, lstm, bilstm };

std::string arch_name(Arch arch);
Arch parse_arch(const std::string& name);

struct CnnSpec {
  std::vector<std::pair<int, int>> filters = {{1, 400}, {2, 100}, {3, 100}};
  Nonlinearity activation = Nonlinearity::relu;
};

struct ModelSpec {
  int lstm_hidden = 200;
  int bilstm_hidden = 250;  // per direction
  CnnSpec cnn;
  bool shared_encoders = true;
  bool freeze_embeddings = false;
};

// g(context, response) = sigmoid(c^T M r + b) with c and r produced by the
// context/response encoders. In shared mode both sides run through the one
// context-encoder parameter set.
struct DualEncoderModel {
  Arch arch = Arch::lstm;
  Parameter embeddings;  // |V| x e; row 0 (PAD) stays zero
  EncoderParams context_encoder;
  std::optional<EncoderParams> response_encoder;  // nullopt = shared parameters
  Parameter bilinear;  // M: d_c x d_r
  Parameter bias;      // 1x1
  bool freeze_embeddings = false;

  bool shared() const { return !response_encoder.has_value(); }
  EncoderParams& response_params() {
    return response_encoder ? *response_encoder : context_encoder;
  }
  const EncoderParams& response_params() const {
    return response_encoder ? *response_encoder : context_encoder;
  }
  int embedding_dim() const { return embeddings.value.cols; }
  int vocab_size() const { return embeddings.value.rows; }
  int context_dim() const { return encoder_output_dim(context_encoder); }
  int response_dim() const { return encoder_output_dim(response_params()); }

  // Fixed order: embeddings, context encoder tensors, response encoder
  // tensors (separate mode only), M, b.
  std::vector<Parameter*> parameters();
  // Same order minus the embeddings when they are frozen.
  std::vector<Parameter*> trainable_parameters();
  void zero_grads();
};

// Fresh model with the given dimensions. M starts as the rectangular
// identity and b at zero, so the initial scorer is close to dot-product
// similarity.
DualEncoderModel make_model(Arch arch, const ModelSpec& spec, EmbeddingMatrix embeddings,
                            std::uint64_t seed);

constexpr double kProbClipLo = 1e-7;
constexpr double kProbClipHi = 1.0 - 1e-7;

// Binary negative log-likelihood with probability clipping at 1e-7.
double nll_loss(double p, int flag);

double score_pair(const TokenSeq& context, const TokenSeq& response,
                  const DualEncoderModel& model);

std::vector<double> score_batch(const SequenceBatch& contexts, const SequenceBatch& responses,
                                const DualEncoderModel& model);

// r' = c^T M: the predicted response embedding, so that
// score == sigmoid(dot(r', r) + b).
std::vector<double> predict_response_embedding(std::span<const double> c, const Matrix& m);

// Forward + backward over one minibatch. Accumulates the gradient of the
// mean batch loss into the model parameters and returns that loss. Shared
// mode sums both encoders' contributions into the single parameter set.
double model_backward(const SequenceBatch& contexts, const SequenceBatch& responses,
                      std::span<const int> flags, DualEncoderModel& model);

}  // namespace dialogrank
