#include "dialogrank/scorer.hpp"

#include <algorithm>
#include <cmath>

#include "dialogrank/errors.hpp"

namespace dialogrank {

std::string arch_name(Arch arch) {
  switch (arch) {
    case Arch::cnn: return "cnn";
    case Arch::lstm: return "lstm";
    case Arch::bilstm: return "bilstm";
  }
  return "?";
}

Arch parse_arch(const std::string& name) {
  if (name == "cnn") return Arch::cnn;
  if (name == "lstm") return Arch::lstm;
  if (name == "bilstm") return Arch::bilstm;
  throw ValidationError("unknown architecture '" + name + "' (expected cnn|lstm|bilstm)");
}

std::vector<Parameter*> DualEncoderModel::parameters() {
  std::vector<Parameter*> out;
  out.push_back(&embeddings);
  auto ctx = encoder_parameters(context_encoder);
  out.insert(out.end(), ctx.begin(), ctx.end());
  if (response_encoder) {
    auto resp = encoder_parameters(*response_encoder);
    out.insert(out.end(), resp.begin(), resp.end());
  }
  out.push_back(&bilinear);
  out.push_back(&bias);
  return out;
}

std::vector<Parameter*> DualEncoderModel::trainable_parameters() {
  auto out = parameters();
  if (freeze_embeddings) out.erase(out.begin());
  return out;
}

void DualEncoderModel::zero_grads() {
  for (Parameter* p : parameters()) p->zero_grad();
}

namespace {

EncoderParams build_encoder(Arch arch, const ModelSpec& spec, int e) {
  switch (arch) {
    case Arch::cnn:
      return make_cnn(e, spec.cnn.filters, spec.cnn.activation);
    case Arch::lstm:
      return make_lstm(e, spec.lstm_hidden);
    case Arch::bilstm:
      return make_bilstm(e, spec.bilstm_hidden);
  }
  throw ValidationError("bad architecture tag");
}

void prefix_names(EncoderParams& params, const std::string& prefix) {
  for (Parameter* p : encoder_parameters(params)) p->name = prefix + p->name;
}

}  // namespace

DualEncoderModel make_model(Arch arch, const ModelSpec& spec, EmbeddingMatrix embeddings,
                            std::uint64_t seed) {
  if (embeddings.rows < 2 || embeddings.cols < 1)
    throw ValidationError("make_model: embedding matrix must be at least 2 x 1");
  DualEncoderModel model;
  model.arch = arch;
  model.freeze_embeddings = spec.freeze_embeddings;
  const int e = embeddings.cols;
  model.embeddings = Parameter("embeddings", embeddings.rows, e);
  model.embeddings.value = std::move(embeddings);

  Rng rng(splitmix64(seed));
  model.context_encoder = build_encoder(arch, spec, e);
  init_encoder(model.context_encoder, rng);
  prefix_names(model.context_encoder, "context.");
  if (!spec.shared_encoders) {
    model.response_encoder = build_encoder(arch, spec, e);
    init_encoder(*model.response_encoder, rng);
    prefix_names(*model.response_encoder, "response.");
  }

  const int dc = model.context_dim();
  const int dr = model.response_dim();
  model.bilinear = Parameter("bilinear", dc, dr);
  for (int i = 0; i < std::min(dc, dr); ++i) model.bilinear.value(i, i) = 1.0;
  model.bias = Parameter("bias", 1, 1);
  return model;
}

double nll_loss(double p, int flag) {
  if (flag != 0 && flag != 1)
    throw ValidationError("flag must be 0 or 1, got " + std::to_string(flag));
  const double clipped = std::clamp(p, kProbClipLo, kProbClipHi);
  return flag == 1 ? -std::log(clipped) : -std::log(1.0 - clipped);
}

namespace {

// s_k = c_k . (M r_k) + b
std::vector<double> bilinear_logits(const Matrix& ctx_out, const Matrix& resp_out,
                                    const Matrix& m, double b) {
  if (ctx_out.cols != m.rows || resp_out.cols != m.cols)
    throw ValidationError("scorer dimension mismatch: encoders give " +
                          std::to_string(ctx_out.cols) + "/" + std::to_string(resp_out.cols) +
                          ", M is " + std::to_string(m.rows) + "x" + std::to_string(m.cols));
  std::vector<double> logits(static_cast<std::size_t>(ctx_out.rows));
  for (int k = 0; k < ctx_out.rows; ++k) {
    const double* c = ctx_out.row_ptr(k);
    const double* r = resp_out.row_ptr(k);
    double s = b;
    for (int i = 0; i < m.rows; ++i) {
      const double* mrow = m.row_ptr(i);
      double acc = 0.0;
      for (int j = 0; j < m.cols; ++j) acc += mrow[j] * r[j];
      s += c[i] * acc;
    }
    logits[k] = s;
  }
  return logits;
}

}  // namespace

std::vector<double> score_batch(const SequenceBatch& contexts, const SequenceBatch& responses,
                                const DualEncoderModel& model) {
  if (contexts.count != responses.count)
    throw ValidationError("score_batch: context/response batch sizes differ");
  const Matrix ctx_out = encode_batch(contexts, model.embeddings.value, model.context_encoder);
  const Matrix resp_out = encode_batch(responses, model.embeddings.value, model.response_params());
  auto logits = bilinear_logits(ctx_out, resp_out, model.bilinear.value, model.bias.value(0, 0));
  std::vector<double> probs(logits.size());
  std::transform(logits.begin(), logits.end(), probs.begin(), sigmoid);
  return probs;
}

double score_pair(const TokenSeq& context, const TokenSeq& response,
                  const DualEncoderModel& model) {
  const TokenSeq* ctx[] = {&context};
  const TokenSeq* resp[] = {&response};
  return score_batch(SequenceBatch::from(std::span<const TokenSeq* const>(ctx)),
                     SequenceBatch::from(std::span<const TokenSeq* const>(resp)), model)[0];
}

std::vector<double> predict_response_embedding(std::span<const double> c, const Matrix& m) {
  if (static_cast<int>(c.size()) != m.rows)
    throw ValidationError("predict_response_embedding: dim(c) = " + std::to_string(c.size()) +
                          " but M has " + std::to_string(m.rows) + " rows");
  std::vector<double> out(static_cast<std::size_t>(m.cols), 0.0);
  for (int i = 0; i < m.rows; ++i) {
    const double ci = c[i];
    if (ci == 0.0) continue;
    const double* row = m.row_ptr(i);
    for (int j = 0; j < m.cols; ++j) out[j] += ci * row[j];
  }
  return out;
}

double model_backward(const SequenceBatch& contexts, const SequenceBatch& responses,
                      std::span<const int> flags, DualEncoderModel& model) {
  const int batch = contexts.count;
  if (batch == 0) throw ValidationError("model_backward: empty batch");
  if (responses.count != batch || static_cast<int>(flags.size()) != batch)
    throw ValidationError("model_backward: batch size mismatch");

  EncoderCache ctx_cache, resp_cache;
  const Matrix ctx_out =
      encode_batch(contexts, model.embeddings.value, model.context_encoder, &ctx_cache);
  const Matrix resp_out =
      encode_batch(responses, model.embeddings.value, model.response_params(), &resp_cache);
  const Matrix& m = model.bilinear.value;
  auto logits = bilinear_logits(ctx_out, resp_out, m, model.bias.value(0, 0));

  double total_loss = 0.0;
  Matrix d_ctx(batch, ctx_out.cols);
  Matrix d_resp(batch, resp_out.cols);
  const double inv_batch = 1.0 / batch;
  for (int k = 0; k < batch; ++k) {
    const int flag = flags[k];
    const double p = sigmoid(logits[k]);
    total_loss += nll_loss(p, flag);
    // d(loss)/d(logit); zero where the probability clip is active.
    double ds = 0.0;
    if (p > kProbClipLo && p < kProbClipHi) ds = (p - flag) * inv_batch;
    if (ds == 0.0) continue;
    const double* c = ctx_out.row_ptr(k);
    const double* r = resp_out.row_ptr(k);
    double* dc = d_ctx.row_ptr(k);
    double* dr = d_resp.row_ptr(k);
    for (int i = 0; i < m.rows; ++i) {
      const double* mrow = m.row_ptr(i);
      double* grow = model.bilinear.grad.row_ptr(i);
      const double dsc = ds * c[i];
      double acc = 0.0;
      for (int j = 0; j < m.cols; ++j) {
        grow[j] += dsc * r[j];
        acc += mrow[j] * r[j];
        dr[j] += dsc * mrow[j];
      }
      dc[i] = ds * acc;
    }
    model.bias.grad(0, 0) += ds;
  }

  Matrix* d_emb = &model.embeddings.grad;
  encoder_backward(d_ctx, contexts, model.embeddings.value, model.context_encoder, ctx_cache,
                   d_emb);
  encoder_backward(d_resp, responses, model.embeddings.value, model.response_params(), resp_cache,
                   d_emb);
  // PAD is never read during the forward pass, but keep its row pinned.
  for (int j = 0; j < model.embeddings.grad.cols; ++j)
    model.embeddings.grad(Vocabulary::kPad, j) = 0.0;
  return total_loss * inv_batch;
}

}  // namespace dialogrank
