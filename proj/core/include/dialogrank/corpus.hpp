#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dialogrank/rng.hpp"

namespace dialogrank {

struct Turn {
  std::string speaker;
  std::string utterance;
};

struct Dialog {
  std::string id;
  std::vector<Turn> turns;  // source order
};

// One (context, response, flag) training triple.
struct Example {
  std::string context;
  std::string response;
  int flag = 0;  // 1 = true continuation, 0 = sampled distractor
};

// A context with n candidate responses, exactly one of them the truth.
struct RankingInstance {
  std::string context;
  std::vector<std::string> candidates;
  int truth_index = 0;
};

struct SplitSpec {
  double test_fraction = 0.02;
  double valid_fraction = 0.02;
  std::uint64_t seed = 0;
};

struct DialogSplit {
  std::vector<Dialog> train;
  std::vector<Dialog> valid;
  std::vector<Dialog> test;
};

// Uniform sampler over every utterance in the corpus.
class UtterancePool {
 public:
  static UtterancePool from_dialogs(const std::vector<Dialog>& dialogs);
  explicit UtterancePool(std::vector<std::string> utterances);

  const std::string& sample(Rng& rng) const;
  std::size_t size() const { return utterances_.size(); }
  const std::vector<std::string>& utterances() const { return utterances_; }

 private:
  std::vector<std::string> utterances_;
};

// Serializes dialog turns 1..k into a context string with the public corpus
// markers: every utterance is terminated by __eou__ and every turn by __eot__.
std::string join_context(const Dialog& dialog, std::size_t turn_count);

// CSV triples with columns context,response,flag. Throws ParseError for
// malformed rows and ValidationError for flags outside {0,1} or texts that
// are empty after tokenization.
std::vector<Example> load_triples(std::istream& in, bool has_header);

void write_triples(std::ostream& out, const std::vector<Example>& examples);

// For each turn index i in [3, n]: one positive (turns 1..i-1, turn i, 1) and
// one negative with a response sampled from the pool. 2(n-2) examples total.
// Throws ValidationError ("too short") when the dialog has fewer than 3 turns.
std::vector<Example> generate_examples(const Dialog& dialog, const UtterancePool& pool,
                                       Rng& rng);

// One instance per eligible (context, true response) pair: the truth plus
// n-1 pool distractors at a random position. Dialogs shorter than 3 turns
// contribute nothing.
std::vector<RankingInstance> build_ranking_instances(const std::vector<Dialog>& dialogs, int n,
                                                     const UtterancePool& pool, Rng& rng);

// Disjoint partition by conversation, deterministic under the seed. Test
// dialogs are drawn first, then validation, remainder is train.
DialogSplit split_dialogs(const std::vector<Dialog>& dialogs, const SplitSpec& spec);

// Dialog text format: one dialog per block, `speaker<TAB>utterance` lines,
// blank line between dialogs. Ids are assigned by block index.
std::vector<Dialog> load_dialogs(std::istream& in);

std::vector<RankingInstance> load_instances(std::istream& in);
void write_instances(std::ostream& out, const std::vector<RankingInstance>& instances);

}  // namespace dialogrank
