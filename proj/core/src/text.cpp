#include "dialogrank/text.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <ostream>
#include <sstream>

#include "dialogrank/errors.hpp"

namespace dialogrank {

Vocabulary::Vocabulary() {
  id_to_token_.push_back(kPadToken);
  id_to_token_.push_back(kUnkToken);
}

std::int32_t Vocabulary::add(const std::string& token) {
  if (token == kPadToken || token == kUnkToken)
    throw ValidationError("vocabulary: reserved token cannot be added: " + token);
  auto [it, inserted] =
      token_to_id_.emplace(token, static_cast<std::int32_t>(id_to_token_.size()));
  if (!inserted) throw ValidationError("vocabulary: duplicate token: " + token);
  id_to_token_.push_back(token);
  return it->second;
}

std::int32_t Vocabulary::lookup(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return token_to_id_.find(std::string(token)) != token_to_id_.end();
}

void Vocabulary::save(std::ostream& out) const {
  for (const auto& tok : id_to_token_) out << tok << '\n';
}

Vocabulary Vocabulary::load(std::istream& in) {
  Vocabulary vocab;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      if (line != kPadToken) throw ParseError("vocabulary must start with __pad__", lineno);
      continue;
    }
    if (lineno == 2) {
      if (line != kUnkToken) throw ParseError("vocabulary line 2 must be __unk__", lineno);
      continue;
    }
    if (line.empty()) throw ParseError("empty vocabulary token", lineno);
    vocab.add(line);
  }
  if (lineno < 2) throw ValidationError("vocabulary file is missing reserved tokens");
  return vocab;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) {
        tokens.push_back(std::move(cur));
        cur.clear();
      }
    } else {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

void TokenCounts::add(std::span<const std::string> tokens) {
  for (const auto& tok : tokens) ++counts[tok];
}

void TokenCounts::add_text(std::string_view text) { add(tokenize(text)); }

Vocabulary build_vocabulary(const TokenCounts& counts, long long min_count, long long max_size) {
  if (min_count < 1) throw ValidationError("build_vocabulary: min_count must be >= 1");
  std::vector<std::pair<std::string, long long>> items;
  items.reserve(counts.counts.size());
  for (const auto& [tok, n] : counts.counts) {
    if (n < min_count) continue;
    if (tok == Vocabulary::kPadToken || tok == Vocabulary::kUnkToken) continue;
    items.emplace_back(tok, n);
  }
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (max_size > 0 && static_cast<long long>(items.size()) > max_size)
    items.resize(static_cast<std::size_t>(max_size));
  Vocabulary vocab;
  for (const auto& [tok, n] : items) vocab.add(tok);
  return vocab;
}

EmbeddingMatrix load_pretrained(std::istream& in, const Vocabulary& vocab, int dim, Rng& rng) {
  if (dim < 1) throw ValidationError("load_pretrained: dimension must be >= 1");
  EmbeddingMatrix emb(static_cast<int>(vocab.size()), dim);
  // Random rows first, in id order, so the draw sequence is reproducible;
  // file rows overwrite below.
  for (int i = Vocabulary::kUnk; i < emb.rows; ++i)
    for (int j = 0; j < dim; ++j) emb(i, j) = uniform_real(rng, -0.25, 0.25);

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    std::int32_t id = -1;
    if (token == Vocabulary::kPadToken) {
      id = Vocabulary::kPad;
    } else if (token == Vocabulary::kUnkToken) {
      id = Vocabulary::kUnk;
    } else if (vocab.contains(token)) {
      id = vocab.lookup(token);
    }
    int count = 0;
    double v = 0.0;
    while (ls >> v) {
      if (count < dim && id >= 0) emb(id, count) = v;
      ++count;
    }
    if (!ls.eof())
      throw ParseError("unreadable vector component for token '" + token + "'", lineno);
    if (count != dim)
      throw ParseError("token '" + token + "' has " + std::to_string(count) +
                           " components, expected " + std::to_string(dim),
                       lineno);
  }
  for (int j = 0; j < dim; ++j) emb(Vocabulary::kPad, j) = 0.0;
  return emb;
}

EmbeddingMatrix init_embeddings(const Vocabulary& vocab, int dim, Rng& rng) {
  std::istringstream empty;
  return load_pretrained(empty, vocab, dim, rng);
}

void save_embeddings(std::ostream& out, const Vocabulary& vocab, const EmbeddingMatrix& emb) {
  if (emb.rows != static_cast<int>(vocab.size()))
    throw ValidationError("save_embeddings: row count does not match vocabulary size");
  out.precision(17);
  for (int i = 0; i < emb.rows; ++i) {
    out << vocab.token(i);
    for (int j = 0; j < emb.cols; ++j) out << ' ' << emb(i, j);
    out << '\n';
  }
}

TokenSeq encode(std::span<const std::string> tokens, const Vocabulary& vocab, int max_len,
                Keep keep) {
  if (max_len < 1) throw ValidationError("encode: max_len must be >= 1");
  TokenSeq seq;
  seq.ids.assign(static_cast<std::size_t>(max_len), Vocabulary::kPad);
  const std::size_t n = tokens.size();
  std::size_t begin = 0, count = n;
  if (n > static_cast<std::size_t>(max_len)) {
    count = static_cast<std::size_t>(max_len);
    if (keep == Keep::tail) begin = n - count;
  }
  for (std::size_t i = 0; i < count; ++i) seq.ids[i] = vocab.lookup(tokens[begin + i]);
  seq.true_length = static_cast<int>(count);
  return seq;
}

TokenSeq encode_text(std::string_view text, const Vocabulary& vocab, int max_len, Keep keep) {
  return encode(tokenize(text), vocab, max_len, keep);
}

}  // namespace dialogrank
