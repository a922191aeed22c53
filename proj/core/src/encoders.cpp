#include "dialogrank/encoders.hpp"

#include <algorithm>
#include <cmath>

#include "dialogrank/errors.hpp"

namespace dialogrank {

namespace {

constexpr std::int32_t kPad = Vocabulary::kPad;

double apply_act(double x, Nonlinearity act) {
  return act == Nonlinearity::relu ? (x > 0.0 ? x : 0.0) : std::tanh(x);
}

// Derivative expressed through the cached activation value.
double act_derivative(double a, Nonlinearity act) {
  return act == Nonlinearity::relu ? (a > 0.0 ? 1.0 : 0.0) : 1.0 - a * a;
}

void check_ids(const SequenceBatch& batch, const EmbeddingMatrix& emb) {
  for (std::int32_t id : batch.ids)
    if (id < 0 || id >= emb.rows)
      throw ValidationError("token id " + std::to_string(id) + " out of range (vocab size " +
                            std::to_string(emb.rows) + ")");
}

}  // namespace

SequenceBatch SequenceBatch::from(std::span<const TokenSeq> seqs) {
  std::vector<const TokenSeq*> ptrs;
  ptrs.reserve(seqs.size());
  for (const auto& s : seqs) ptrs.push_back(&s);
  return from(std::span<const TokenSeq* const>(ptrs));
}

SequenceBatch SequenceBatch::from(std::span<const TokenSeq* const> seqs) {
  SequenceBatch batch;
  batch.count = static_cast<int>(seqs.size());
  for (const TokenSeq* s : seqs) batch.max_len = std::max(batch.max_len, s->capacity());
  batch.ids.assign(static_cast<std::size_t>(batch.count) * batch.max_len, kPad);
  batch.lengths.resize(seqs.size());
  for (int i = 0; i < batch.count; ++i) {
    const TokenSeq& s = *seqs[i];
    if (s.true_length > s.capacity())
      throw ValidationError("token sequence length exceeds capacity");
    batch.lengths[i] = s.true_length;
    std::copy(s.ids.begin(), s.ids.begin() + s.true_length,
              batch.ids.begin() + static_cast<std::size_t>(i) * batch.max_len);
  }
  return batch;
}

int CnnParams::output_dim() const {
  int total = 0;
  for (const auto& g : groups) total += g.count();
  return total;
}

int CnnParams::max_width() const {
  int w = 0;
  for (const auto& g : groups) w = std::max(w, g.width);
  return w;
}

CnnParams make_cnn(int input_dim, std::span<const std::pair<int, int>> filters,
                   Nonlinearity activation) {
  if (filters.empty()) throw ValidationError("cnn needs at least one filter group");
  CnnParams params;
  params.input_dim = input_dim;
  params.activation = activation;
  for (auto [width, count] : filters) {
    if (width < 1 || width > 5)
      throw ValidationError("cnn filter width must be in 1..5, got " + std::to_string(width));
    if (count < 1) throw ValidationError("cnn filter count must be >= 1");
    CnnFilterGroup group;
    group.width = width;
    std::string tag = "cnn.w" + std::to_string(width);
    group.kernels = Parameter(tag + ".kernels", count, width * input_dim);
    group.biases = Parameter(tag + ".biases", count, 1);
    params.groups.push_back(std::move(group));
  }
  return params;
}

LstmParams make_lstm(int input_dim, int hidden) {
  if (input_dim < 1 || hidden < 1) throw ValidationError("lstm dimensions must be >= 1");
  LstmParams p;
  p.input_dim = input_dim;
  p.hidden = hidden;
  p.w_i = Parameter("lstm.w_i", hidden, input_dim);
  p.w_f = Parameter("lstm.w_f", hidden, input_dim);
  p.w_c = Parameter("lstm.w_c", hidden, input_dim);
  p.w_o = Parameter("lstm.w_o", hidden, input_dim);
  p.u_i = Parameter("lstm.u_i", hidden, hidden);
  p.u_f = Parameter("lstm.u_f", hidden, hidden);
  p.u_c = Parameter("lstm.u_c", hidden, hidden);
  p.u_o = Parameter("lstm.u_o", hidden, hidden);
  p.b_i = Parameter("lstm.b_i", hidden, 1);
  p.b_f = Parameter("lstm.b_f", hidden, 1);
  p.b_c = Parameter("lstm.b_c", hidden, 1);
  p.b_o = Parameter("lstm.b_o", hidden, 1);
  return p;
}

namespace {

std::vector<Parameter*> lstm_parameters(LstmParams& p) {
  return {&p.w_i, &p.w_f, &p.w_c, &p.w_o, &p.u_i, &p.u_f, &p.u_c, &p.u_o,
          &p.b_i, &p.b_f, &p.b_c, &p.b_o};
}

void fill_uniform(Matrix& m, double scale, Rng& rng) {
  for (double& v : m.data) v = uniform_real(rng, -scale, scale);
}

}  // namespace

BiLstmParams make_bilstm(int input_dim, int hidden) {
  BiLstmParams p{make_lstm(input_dim, hidden), make_lstm(input_dim, hidden)};
  for (Parameter* param : lstm_parameters(p.forward)) param->name = "fwd." + param->name;
  for (Parameter* param : lstm_parameters(p.backward)) param->name = "bwd." + param->name;
  return p;
}

void init_encoder(CnnParams& params, Rng& rng) {
  for (auto& g : params.groups) {
    fill_uniform(g.kernels.value, 1.0 / std::sqrt(static_cast<double>(g.width) * params.input_dim),
                 rng);
    g.biases.value.fill(0.0);
  }
}

void init_encoder(LstmParams& params, Rng& rng) {
  const double ws = 1.0 / std::sqrt(static_cast<double>(params.input_dim));
  const double us = 1.0 / std::sqrt(static_cast<double>(params.hidden));
  fill_uniform(params.w_i.value, ws, rng);
  fill_uniform(params.w_f.value, ws, rng);
  fill_uniform(params.w_c.value, ws, rng);
  fill_uniform(params.w_o.value, ws, rng);
  fill_uniform(params.u_i.value, us, rng);
  fill_uniform(params.u_f.value, us, rng);
  fill_uniform(params.u_c.value, us, rng);
  fill_uniform(params.u_o.value, us, rng);
  params.b_i.value.fill(0.0);
  params.b_f.value.fill(1.0);  // open forget gate at the start of training
  params.b_c.value.fill(0.0);
  params.b_o.value.fill(0.0);
}

void init_encoder(BiLstmParams& params, Rng& rng) {
  init_encoder(params.forward, rng);
  init_encoder(params.backward, rng);
}

void init_encoder(EncoderParams& params, Rng& rng) {
  std::visit([&rng](auto& p) { init_encoder(p, rng); }, params);
}

int encoder_output_dim(const EncoderParams& params) {
  return std::visit(
      [](const auto& p) -> int {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, CnnParams>)
          return p.output_dim();
        else if constexpr (std::is_same_v<T, LstmParams>)
          return p.hidden;
        else
          return p.output_dim();
      },
      params);
}

std::vector<Parameter*> encoder_parameters(EncoderParams& params) {
  return std::visit(
      [](auto& p) -> std::vector<Parameter*> {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, CnnParams>) {
          std::vector<Parameter*> out;
          for (auto& g : p.groups) {
            out.push_back(&g.kernels);
            out.push_back(&g.biases);
          }
          return out;
        } else if constexpr (std::is_same_v<T, LstmParams>) {
          return lstm_parameters(p);
        } else {
          auto out = lstm_parameters(p.forward);
          auto bwd = lstm_parameters(p.backward);
          out.insert(out.end(), bwd.begin(), bwd.end());
          return out;
        }
      },
      params);
}

Matrix embed(const TokenSeq& seq, const EmbeddingMatrix& emb) {
  Matrix out(emb.cols, seq.capacity());
  for (int t = 0; t < seq.capacity(); ++t) {
    const std::int32_t id = seq.ids[t];
    if (id < 0 || id >= emb.rows)
      throw ValidationError("token id " + std::to_string(id) + " out of range (vocab size " +
                            std::to_string(emb.rows) + ")");
    if (id == kPad) continue;  // PAD columns stay zero
    for (int d = 0; d < emb.cols; ++d) out(d, t) = emb(id, d);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CNN

Matrix cnn_encode(const SequenceBatch& batch, const EmbeddingMatrix& emb, const CnnParams& params,
                  CnnCache* cache) {
  if (params.groups.empty()) throw ValidationError("cnn has zero filters");
  check_ids(batch, emb);
  const int e = params.input_dim;
  if (e != emb.cols) throw ValidationError("cnn input_dim does not match embedding dim");
  const int total = params.output_dim();
  Matrix out(batch.count, total);
  if (cache) {
    cache->filters = total;
    cache->argmax.assign(static_cast<std::size_t>(batch.count) * total, 0);
    cache->act.assign(static_cast<std::size_t>(batch.count) * total, 0.0);
  }

  for (int item = 0; item < batch.count; ++item) {
    const int len = batch.lengths[item];
    int filter_base = 0;
    for (const auto& group : params.groups) {
      const int w = group.width;
      const int count = group.count();
      // Sequences shorter than the filter are treated as right-padded with
      // zero embeddings up to the filter width: exactly one window.
      const int positions = std::max(1, len - w + 1);
      for (int j = 0; j < count; ++j) {
        const double* kernel = group.kernels.value.row_ptr(j);
        const double bias = group.biases.value(j, 0);
        double best = 0.0;
        int best_pos = 0;
        for (int p = 0; p < positions; ++p) {
          double z = bias;
          for (int u = 0; u < w; ++u) {
            const int pos = p + u;
            if (pos >= len) break;  // zero embedding, contributes nothing
            const std::int32_t id = batch.id_at(item, pos);
            if (id == kPad) continue;
            const double* x = emb.row_ptr(id);
            const double* krow = kernel + static_cast<std::size_t>(u) * e;
            double dot = 0.0;
            for (int d = 0; d < e; ++d) dot += krow[d] * x[d];
            z += dot;
          }
          const double a = apply_act(z, params.activation);
          if (p == 0 || a > best) {
            best = a;
            best_pos = p;
          }
        }
        out(item, filter_base + j) = best;
        if (cache) {
          const std::size_t q = static_cast<std::size_t>(item) * total + filter_base + j;
          cache->argmax[q] = best_pos;
          cache->act[q] = best;
        }
      }
      filter_base += count;
    }
  }
  return out;
}

namespace {

void cnn_backward(const Matrix& d_out, const SequenceBatch& batch, const EmbeddingMatrix& emb,
                  CnnParams& params, const CnnCache& cache, Matrix* d_embeddings) {
  const int e = params.input_dim;
  const int total = params.output_dim();
  if (d_out.rows != batch.count || d_out.cols != total)
    throw ValidationError("cnn backward: upstream gradient shape mismatch");
  if (cache.filters != total || cache.argmax.size() !=
                                    static_cast<std::size_t>(batch.count) * total)
    throw ValidationError("cnn backward: missing or mismatched forward cache");

  for (int item = 0; item < batch.count; ++item) {
    const int len = batch.lengths[item];
    int filter_base = 0;
    for (auto& group : params.groups) {
      const int w = group.width;
      const int count = group.count();
      for (int j = 0; j < count; ++j) {
        const std::size_t q = static_cast<std::size_t>(item) * total + filter_base + j;
        const double upstream = d_out(item, filter_base + j);
        if (upstream == 0.0) continue;
        const double dz = upstream * act_derivative(cache.act[q], params.activation);
        if (dz == 0.0) continue;
        group.biases.grad(j, 0) += dz;
        const int p = cache.argmax[q];
        const double* kernel = group.kernels.value.row_ptr(j);
        double* kernel_grad = group.kernels.grad.row_ptr(j);
        for (int u = 0; u < w; ++u) {
          const int pos = p + u;
          if (pos >= len) break;
          const std::int32_t id = batch.id_at(item, pos);
          if (id == kPad) continue;
          const double* x = emb.row_ptr(id);
          double* kg = kernel_grad + static_cast<std::size_t>(u) * e;
          for (int d = 0; d < e; ++d) kg[d] += dz * x[d];
          if (d_embeddings) {
            double* eg = d_embeddings->row_ptr(id);
            const double* krow = kernel + static_cast<std::size_t>(u) * e;
            for (int d = 0; d < e; ++d) eg[d] += dz * krow[d];
          }
        }
      }
      filter_base += count;
    }
  }
}

// ---------------------------------------------------------------------------
// LSTM
//
// Gate order in cache buffers matches the i, f, g(candidate), o recurrence:
//   i = sigmoid(W_i x + U_i h + b_i)      f = sigmoid(W_f x + U_f h + b_f)
//   g = tanh(W_c x + U_c h + b_c)         o = sigmoid(W_o x + U_o h + b_o)
//   c_t = f*c_{t-1} + i*g                 h_t = o*tanh(c_t)

// out = W x + U h_prev + b; x may be null (zero embedding).
void gate_preact(const Matrix& w, const double* x, const Matrix& u, const double* h_prev,
                 const Matrix& b, double* out) {
  const int hidden = w.rows;
  for (int i = 0; i < hidden; ++i) out[i] = b(i, 0);
  if (x) {
    for (int i = 0; i < hidden; ++i) {
      const double* wrow = w.row_ptr(i);
      double acc = 0.0;
      for (int d = 0; d < w.cols; ++d) acc += wrow[d] * x[d];
      out[i] += acc;
    }
  }
  if (h_prev) {
    for (int i = 0; i < hidden; ++i) {
      const double* urow = u.row_ptr(i);
      double acc = 0.0;
      for (int d = 0; d < u.cols; ++d) acc += urow[d] * h_prev[d];
      out[i] += acc;
    }
  }
}

// Runs one item through the recurrence. `pos_of(t)` maps logical time to the
// batch position, which lets the same code run the reversed direction.
template <typename PosFn>
void lstm_forward_item(const SequenceBatch& batch, int item, const EmbeddingMatrix& emb,
                       const LstmParams& p, PosFn pos_of, LstmItemCache& cache,
                       double* out_last_h) {
  const int len = batch.lengths[item];
  const int h = p.hidden;
  cache.len = len;
  const std::size_t n = static_cast<std::size_t>(len) * h;
  cache.gate_i.resize(n);
  cache.gate_f.resize(n);
  cache.gate_g.resize(n);
  cache.gate_o.resize(n);
  cache.cell.resize(n);
  cache.hidden.resize(n);

  std::vector<double> pre_i(h), pre_f(h), pre_g(h), pre_o(h);
  const double* h_prev = nullptr;
  const double* c_prev = nullptr;
  for (int t = 0; t < len; ++t) {
    const std::int32_t id = batch.id_at(item, pos_of(t));
    const double* x = id == kPad ? nullptr : emb.row_ptr(id);
    gate_preact(p.w_i.value, x, p.u_i.value, h_prev, p.b_i.value, pre_i.data());
    gate_preact(p.w_f.value, x, p.u_f.value, h_prev, p.b_f.value, pre_f.data());
    gate_preact(p.w_c.value, x, p.u_c.value, h_prev, p.b_c.value, pre_g.data());
    gate_preact(p.w_o.value, x, p.u_o.value, h_prev, p.b_o.value, pre_o.data());
    double* gi = cache.gate_i.data() + static_cast<std::size_t>(t) * h;
    double* gf = cache.gate_f.data() + static_cast<std::size_t>(t) * h;
    double* gg = cache.gate_g.data() + static_cast<std::size_t>(t) * h;
    double* go = cache.gate_o.data() + static_cast<std::size_t>(t) * h;
    double* ct = cache.cell.data() + static_cast<std::size_t>(t) * h;
    double* ht = cache.hidden.data() + static_cast<std::size_t>(t) * h;
    for (int k = 0; k < h; ++k) {
      gi[k] = sigmoid(pre_i[k]);
      gf[k] = sigmoid(pre_f[k]);
      gg[k] = std::tanh(pre_g[k]);
      go[k] = sigmoid(pre_o[k]);
      ct[k] = gi[k] * gg[k] + (c_prev ? gf[k] * c_prev[k] : 0.0);
      ht[k] = go[k] * std::tanh(ct[k]);
    }
    h_prev = ht;
    c_prev = ct;
  }
  std::copy(h_prev, h_prev + h, out_last_h);
}

// y += M^T v, for the dx / dh_prev terms.
void add_transposed_matvec(const Matrix& m, const double* v, double* y) {
  for (int i = 0; i < m.rows; ++i) {
    const double vi = v[i];
    if (vi == 0.0) continue;
    const double* row = m.row_ptr(i);
    for (int j = 0; j < m.cols; ++j) y[j] += vi * row[j];
  }
}

// grad += outer(v, x)
void add_outer(Matrix& grad, const double* v, const double* x, int cols) {
  for (int i = 0; i < grad.rows; ++i) {
    const double vi = v[i];
    if (vi == 0.0) continue;
    double* row = grad.row_ptr(i);
    for (int j = 0; j < cols; ++j) row[j] += vi * x[j];
  }
}

template <typename PosFn>
void lstm_backward_item(const Matrix& d_out, int d_col_offset, const SequenceBatch& batch,
                        int item, const EmbeddingMatrix& emb, LstmParams& p, PosFn pos_of,
                        const LstmItemCache& cache, Matrix* d_embeddings) {
  const int len = cache.len;
  const int h = p.hidden;
  const int e = p.input_dim;
  std::vector<double> dh(h), dc(h, 0.0);
  for (int k = 0; k < h; ++k) dh[k] = d_out(item, d_col_offset + k);

  std::vector<double> da_i(h), da_f(h), da_g(h), da_o(h), dh_prev(h), dx(e);
  for (int t = len - 1; t >= 0; --t) {
    const double* gi = cache.gate_i.data() + static_cast<std::size_t>(t) * h;
    const double* gf = cache.gate_f.data() + static_cast<std::size_t>(t) * h;
    const double* gg = cache.gate_g.data() + static_cast<std::size_t>(t) * h;
    const double* go = cache.gate_o.data() + static_cast<std::size_t>(t) * h;
    const double* ct = cache.cell.data() + static_cast<std::size_t>(t) * h;
    const double* c_prev = t > 0 ? cache.cell.data() + static_cast<std::size_t>(t - 1) * h : nullptr;
    const double* h_prev =
        t > 0 ? cache.hidden.data() + static_cast<std::size_t>(t - 1) * h : nullptr;

    for (int k = 0; k < h; ++k) {
      const double tc = std::tanh(ct[k]);
      da_o[k] = dh[k] * tc * go[k] * (1.0 - go[k]);
      dc[k] += dh[k] * go[k] * (1.0 - tc * tc);
      da_f[k] = c_prev ? dc[k] * c_prev[k] * gf[k] * (1.0 - gf[k]) : 0.0;
      da_i[k] = dc[k] * gg[k] * gi[k] * (1.0 - gi[k]);
      da_g[k] = dc[k] * gi[k] * (1.0 - gg[k] * gg[k]);
    }

    const std::int32_t id = batch.id_at(item, pos_of(t));
    const double* x = id == kPad ? nullptr : emb.row_ptr(id);
    if (x) {
      add_outer(p.w_i.grad, da_i.data(), x, e);
      add_outer(p.w_f.grad, da_f.data(), x, e);
      add_outer(p.w_c.grad, da_g.data(), x, e);
      add_outer(p.w_o.grad, da_o.data(), x, e);
    }
    if (h_prev) {
      add_outer(p.u_i.grad, da_i.data(), h_prev, h);
      add_outer(p.u_f.grad, da_f.data(), h_prev, h);
      add_outer(p.u_c.grad, da_g.data(), h_prev, h);
      add_outer(p.u_o.grad, da_o.data(), h_prev, h);
    }
    for (int k = 0; k < h; ++k) {
      p.b_i.grad(k, 0) += da_i[k];
      p.b_f.grad(k, 0) += da_f[k];
      p.b_c.grad(k, 0) += da_g[k];
      p.b_o.grad(k, 0) += da_o[k];
    }
    if (x && d_embeddings) {
      std::fill(dx.begin(), dx.end(), 0.0);
      add_transposed_matvec(p.w_i.value, da_i.data(), dx.data());
      add_transposed_matvec(p.w_f.value, da_f.data(), dx.data());
      add_transposed_matvec(p.w_c.value, da_g.data(), dx.data());
      add_transposed_matvec(p.w_o.value, da_o.data(), dx.data());
      double* eg = d_embeddings->row_ptr(id);
      for (int d = 0; d < e; ++d) eg[d] += dx[d];
    }

    if (t > 0) {
      std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
      add_transposed_matvec(p.u_i.value, da_i.data(), dh_prev.data());
      add_transposed_matvec(p.u_f.value, da_f.data(), dh_prev.data());
      add_transposed_matvec(p.u_c.value, da_g.data(), dh_prev.data());
      add_transposed_matvec(p.u_o.value, da_o.data(), dh_prev.data());
      for (int k = 0; k < h; ++k) {
        dh[k] = dh_prev[k];
        dc[k] *= gf[k];
      }
    }
  }
}

void check_nonempty(const SequenceBatch& batch, const char* what) {
  for (int i = 0; i < batch.count; ++i)
    if (batch.lengths[i] < 1)
      throw ValidationError(std::string(what) + ": zero-length sequence at batch item " +
                            std::to_string(i));
}

}  // namespace

Matrix lstm_encode(const SequenceBatch& batch, const EmbeddingMatrix& emb,
                   const LstmParams& params, LstmCache* cache) {
  check_ids(batch, emb);
  check_nonempty(batch, "lstm_encode");
  if (params.input_dim != emb.cols)
    throw ValidationError("lstm input_dim does not match embedding dim");
  Matrix out(batch.count, params.hidden);
  LstmCache local;
  LstmCache& c = cache ? *cache : local;
  c.items.assign(static_cast<std::size_t>(batch.count), LstmItemCache{});
  for (int item = 0; item < batch.count; ++item)
    lstm_forward_item(
        batch, item, emb, params, [](int t) { return t; }, c.items[item], out.row_ptr(item));
  return out;
}

Matrix bilstm_encode(const SequenceBatch& batch, const EmbeddingMatrix& emb,
                     const BiLstmParams& params, BiLstmCache* cache) {
  check_ids(batch, emb);
  check_nonempty(batch, "bilstm_encode");
  if (params.forward.input_dim != emb.cols)
    throw ValidationError("bilstm input_dim does not match embedding dim");
  Matrix out(batch.count, params.output_dim());
  BiLstmCache local;
  BiLstmCache& c = cache ? *cache : local;
  c.fwd.items.assign(static_cast<std::size_t>(batch.count), LstmItemCache{});
  c.bwd.items.assign(static_cast<std::size_t>(batch.count), LstmItemCache{});
  for (int item = 0; item < batch.count; ++item) {
    const int len = batch.lengths[item];
    lstm_forward_item(
        batch, item, emb, params.forward, [](int t) { return t; }, c.fwd.items[item],
        out.row_ptr(item));
    lstm_forward_item(
        batch, item, emb, params.backward, [len](int t) { return len - 1 - t; },
        c.bwd.items[item], out.row_ptr(item) + params.forward.hidden);
  }
  return out;
}

Matrix encode_batch(const SequenceBatch& batch, const EmbeddingMatrix& emb,
                    const EncoderParams& params, EncoderCache* cache) {
  return std::visit(
      [&](const auto& p) -> Matrix {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, CnnParams>) {
          CnnCache* c = nullptr;
          if (cache) c = &cache->emplace<CnnCache>();
          return cnn_encode(batch, emb, p, c);
        } else if constexpr (std::is_same_v<T, LstmParams>) {
          LstmCache* c = nullptr;
          if (cache) c = &cache->emplace<LstmCache>();
          return lstm_encode(batch, emb, p, c);
        } else {
          BiLstmCache* c = nullptr;
          if (cache) c = &cache->emplace<BiLstmCache>();
          return bilstm_encode(batch, emb, p, c);
        }
      },
      params);
}

void encoder_backward(const Matrix& d_out, const SequenceBatch& batch, const EmbeddingMatrix& emb,
                      EncoderParams& params, const EncoderCache& cache, Matrix* d_embeddings) {
  if (d_embeddings && !d_embeddings->same_shape(emb))
    throw ValidationError("encoder_backward: embedding gradient shape mismatch");
  std::visit(
      [&](auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, CnnParams>) {
          const auto* c = std::get_if<CnnCache>(&cache);
          if (!c) throw ValidationError("encoder_backward: missing cnn cache");
          cnn_backward(d_out, batch, emb, p, *c, d_embeddings);
        } else if constexpr (std::is_same_v<T, LstmParams>) {
          const auto* c = std::get_if<LstmCache>(&cache);
          if (!c || c->items.size() != static_cast<std::size_t>(batch.count))
            throw ValidationError("encoder_backward: missing lstm cache");
          if (d_out.rows != batch.count || d_out.cols != p.hidden)
            throw ValidationError("lstm backward: upstream gradient shape mismatch");
          for (int item = 0; item < batch.count; ++item)
            lstm_backward_item(
                d_out, 0, batch, item, emb, p, [](int t) { return t; }, c->items[item],
                d_embeddings);
        } else {
          const auto* c = std::get_if<BiLstmCache>(&cache);
          if (!c || c->fwd.items.size() != static_cast<std::size_t>(batch.count))
            throw ValidationError("encoder_backward: missing bilstm cache");
          if (d_out.rows != batch.count || d_out.cols != p.output_dim())
            throw ValidationError("bilstm backward: upstream gradient shape mismatch");
          for (int item = 0; item < batch.count; ++item) {
            const int len = batch.lengths[item];
            lstm_backward_item(
                d_out, 0, batch, item, emb, p.forward, [](int t) { return t; },
                c->fwd.items[item], d_embeddings);
            lstm_backward_item(
                d_out, p.forward.hidden, batch, item, emb, p.backward,
                [len](int t) { return len - 1 - t; }, c->bwd.items[item], d_embeddings);
          }
        }
      },
      params);
}

}  // namespace dialogrank
