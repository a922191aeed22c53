#include "dialogrank/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include "dialogrank/csv.hpp"
#include "dialogrank/errors.hpp"
#include "dialogrank/text.hpp"

namespace dialogrank {

UtterancePool UtterancePool::from_dialogs(const std::vector<Dialog>& dialogs) {
  std::vector<std::string> utterances;
  for (const auto& d : dialogs)
    for (const auto& t : d.turns) utterances.push_back(t.utterance);
  return UtterancePool(std::move(utterances));
}

UtterancePool::UtterancePool(std::vector<std::string> utterances)
    : utterances_(std::move(utterances)) {
  if (utterances_.empty()) throw ValidationError("utterance pool is empty");
}

const std::string& UtterancePool::sample(Rng& rng) const {
  return utterances_[uniform_index(rng, utterances_.size())];
}

std::string join_context(const Dialog& dialog, std::size_t turn_count) {
  std::string out;
  for (std::size_t i = 0; i < turn_count; ++i) {
    out += dialog.turns[i].utterance;
    out += " __eou__ __eot__";
    if (i + 1 < turn_count) out += ' ';
  }
  return out;
}

namespace {

bool empty_after_tokenization(const std::string& text) { return tokenize(text).empty(); }

int parse_flag(const std::string& raw, std::size_t line) {
  if (raw == "0") return 0;
  if (raw == "1") return 1;
  throw ValidationError("flag must be 0 or 1, got '" + raw + "' (line " +
                        std::to_string(line) + ")");
}

}  // namespace

std::vector<Example> load_triples(std::istream& in, bool has_header) {
  CsvReader reader(in);
  std::vector<std::string> fields;
  std::vector<Example> out;
  bool first = true;
  while (reader.next(fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (fields.size() != 3)
      throw ParseError("expected 3 columns (context,response,flag), got " +
                           std::to_string(fields.size()),
                       reader.line());
    if (first && has_header) {
      first = false;
      if (fields[0] != "context" || fields[1] != "response" || fields[2] != "flag")
        throw ParseError("header must be context,response,flag", reader.line());
      continue;
    }
    first = false;
    Example ex;
    ex.context = fields[0];
    ex.response = fields[1];
    ex.flag = parse_flag(fields[2], reader.line());
    if (empty_after_tokenization(ex.context))
      throw ValidationError("empty context (line " + std::to_string(reader.line()) + ")");
    if (empty_after_tokenization(ex.response))
      throw ValidationError("empty response (line " + std::to_string(reader.line()) + ")");
    out.push_back(std::move(ex));
  }
  return out;
}

void write_triples(std::ostream& out, const std::vector<Example>& examples) {
  write_csv_row(out, {"context", "response", "flag"});
  for (const auto& ex : examples)
    write_csv_row(out, {ex.context, ex.response, std::to_string(ex.flag)});
}

std::vector<Example> generate_examples(const Dialog& dialog, const UtterancePool& pool,
                                       Rng& rng) {
  const std::size_t n = dialog.turns.size();
  if (n < 3)
    throw ValidationError("dialog '" + dialog.id + "' too short: " + std::to_string(n) +
                          " turns, need at least 3");
  std::vector<Example> out;
  out.reserve(2 * (n - 2));
  for (std::size_t i = 3; i <= n; ++i) {
    std::string context = join_context(dialog, i - 1);
    const std::string& truth = dialog.turns[i - 1].utterance;
    out.push_back({context, truth, 1});
    out.push_back({std::move(context), pool.sample(rng), 0});
  }
  return out;
}

std::vector<RankingInstance> build_ranking_instances(const std::vector<Dialog>& dialogs, int n,
                                                     const UtterancePool& pool, Rng& rng) {
  if (n < 2) throw ValidationError("ranking instances need n >= 2 candidates");
  if (pool.size() == 0) throw ValidationError("empty distractor pool");
  std::vector<RankingInstance> out;
  for (const auto& dialog : dialogs) {
    const std::size_t turns = dialog.turns.size();
    if (turns < 3) continue;
    for (std::size_t i = 3; i <= turns; ++i) {
      RankingInstance inst;
      inst.context = join_context(dialog, i - 1);
      inst.candidates.resize(static_cast<std::size_t>(n));
      inst.truth_index = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(n)));
      for (int c = 0; c < n; ++c) {
        if (c == inst.truth_index)
          inst.candidates[c] = dialog.turns[i - 1].utterance;
        else
          inst.candidates[c] = pool.sample(rng);
      }
      out.push_back(std::move(inst));
    }
  }
  return out;
}

DialogSplit split_dialogs(const std::vector<Dialog>& dialogs, const SplitSpec& spec) {
  auto check_fraction = [](double f, const char* name) {
    if (!(f > 0.0 && f < 0.5))
      throw ValidationError(std::string(name) + " must lie in (0, 0.5), got " +
                            std::to_string(f));
  };
  check_fraction(spec.test_fraction, "test_fraction");
  check_fraction(spec.valid_fraction, "valid_fraction");
  if (spec.test_fraction + spec.valid_fraction >= 1.0)
    throw ValidationError("split fractions must sum to less than 1");
  const std::size_t n = dialogs.size();
  if (n < 3) throw ValidationError("need at least 3 dialogs to split");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * n));
  const auto n_valid = static_cast<std::size_t>(std::llround(spec.valid_fraction * n));
  if (n_test + n_valid >= n)
    throw ValidationError("split fractions leave no training dialogs");

  DialogSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    const Dialog& d = dialogs[order[i]];
    if (i < n_test)
      split.test.push_back(d);
    else if (i < n_test + n_valid)
      split.valid.push_back(d);
    else
      split.train.push_back(d);
  }
  return split;
}

std::vector<Dialog> load_dialogs(std::istream& in) {
  std::vector<Dialog> dialogs;
  Dialog cur;
  std::string line;
  std::size_t lineno = 0;
  auto flush = [&] {
    if (!cur.turns.empty()) {
      cur.id = std::to_string(dialogs.size());
      dialogs.push_back(std::move(cur));
      cur = Dialog{};
    }
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError("dialog line is missing the speaker<TAB>utterance separator", lineno);
    Turn turn;
    turn.speaker = line.substr(0, tab);
    turn.utterance = line.substr(tab + 1);
    if (turn.utterance.empty()) throw ParseError("empty utterance", lineno);
    cur.turns.push_back(std::move(turn));
  }
  flush();
  return dialogs;
}

std::vector<RankingInstance> load_instances(std::istream& in) {
  CsvReader reader(in);
  std::vector<std::string> fields;
  if (!reader.next(fields)) throw ValidationError("instance file is empty");
  if (fields.size() < 4 || fields[0] != "context" || fields[1] != "truth_index")
    throw ParseError("instance header must be context,truth_index,candidate_1,...", reader.line());
  const std::size_t n = fields.size() - 2;
  std::vector<RankingInstance> out;
  while (reader.next(fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != n + 2)
      throw ParseError("expected " + std::to_string(n + 2) + " columns", reader.line());
    RankingInstance inst;
    inst.context = fields[0];
    try {
      inst.truth_index = std::stoi(fields[1]);
    } catch (const std::exception&) {
      throw ParseError("truth_index is not an integer", reader.line());
    }
    if (inst.truth_index < 0 || inst.truth_index >= static_cast<int>(n))
      throw ValidationError("truth_index out of range (line " + std::to_string(reader.line()) +
                            ")");
    inst.candidates.assign(fields.begin() + 2, fields.end());
    out.push_back(std::move(inst));
  }
  return out;
}

void write_instances(std::ostream& out, const std::vector<RankingInstance>& instances) {
  if (instances.empty()) throw ValidationError("no instances to write");
  const std::size_t n = instances.front().candidates.size();
  std::vector<std::string> header = {"context", "truth_index"};
  for (std::size_t i = 1; i <= n; ++i) header.push_back("candidate_" + std::to_string(i));
  write_csv_row(out, header);
  for (const auto& inst : instances) {
    if (inst.candidates.size() != n)
      throw ValidationError("instances in one file must share the candidate count");
    std::vector<std::string> row = {inst.context, std::to_string(inst.truth_index)};
    row.insert(row.end(), inst.candidates.begin(), inst.candidates.end());
    write_csv_row(out, row);
  }
}

}  // namespace dialogrank
