#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dialogrank/numerics.hpp"
#include "dialogrank/rng.hpp"

namespace dialogrank {

// Word-vector table: one row per vocabulary id, `cols` is the embedding
// dimension. The PAD row is all zeros and is never updated by training.
using EmbeddingMatrix = Matrix;

// Token-to-id mapping with two reserved ids. Ids 0 (PAD) and 1 (UNK) are
// never assigned to corpus tokens.
class Vocabulary {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;
  static constexpr const char* kPadToken = "__pad__";
  static constexpr const char* kUnkToken = "__unk__";

  Vocabulary();

  // Appends a corpus token with the next free id. Reserved token strings and
  // duplicates are rejected.
  std::int32_t add(const std::string& token);

  // Id for a token, kUnk when not in the vocabulary.
  std::int32_t lookup(std::string_view token) const;

  bool contains(std::string_view token) const;
  const std::string& token(std::int32_t id) const { return id_to_token_.at(id); }
  std::size_t size() const { return id_to_token_.size(); }

  // One token per line in id order, reserved tokens included.
  void save(std::ostream& out) const;
  static Vocabulary load(std::istream& in);

 private:
  std::unordered_map<std::string, std::int32_t> token_to_id_;
  std::vector<std::string> id_to_token_;
};

// Lowercased whitespace-split tokens. Entity tags (__url__, __path__, ...)
// and the __eou__/__eot__ separators are ordinary tokens and pass through
// unchanged.
std::vector<std::string> tokenize(std::string_view text);

struct TokenCounts {
  std::unordered_map<std::string, long long> counts;
  void add(std::span<const std::string> tokens);
  void add_text(std::string_view text);
};

// Keeps tokens with frequency >= min_count, most frequent first, ties broken
// lexicographically, capped at max_size corpus tokens (reserved ids not
// counted). max_size <= 0 means unlimited.
Vocabulary build_vocabulary(const TokenCounts& counts, long long min_count, long long max_size);

// GloVe text format: one `token v1 .. ve` line per row, space separated.
// Vocabulary tokens found in the stream copy the stored values; the rest are
// initialized uniformly in [-0.25, 0.25]. The PAD row always ends up zero.
EmbeddingMatrix load_pretrained(std::istream& in, const Vocabulary& vocab, int dim, Rng& rng);

// Random initialization only (same as load_pretrained over an empty stream).
EmbeddingMatrix init_embeddings(const Vocabulary& vocab, int dim, Rng& rng);

void save_embeddings(std::ostream& out, const Vocabulary& vocab, const EmbeddingMatrix& emb);

enum class Keep { head, tail };

// Fixed-capacity id sequence. Positions at and beyond true_length are PAD.
struct TokenSeq {
  std::vector<std::int32_t> ids;
  int true_length = 0;

  int capacity() const { return static_cast<int>(ids.size()); }
};

// Maps tokens to ids (UNK for out-of-vocabulary), truncates to max_len
// keeping the head or the tail, and pads with PAD up to max_len.
TokenSeq encode(std::span<const std::string> tokens, const Vocabulary& vocab, int max_len,
                Keep keep);

TokenSeq encode_text(std::string_view text, const Vocabulary& vocab, int max_len, Keep keep);

}  // namespace dialogrank
