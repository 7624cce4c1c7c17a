#include "l2s/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "l2s/error.hpp"

namespace l2s {

TokenMultiset::TokenMultiset(std::span<const TokenId> tokens) {
  for (TokenId t : tokens) add(t);
}

void TokenMultiset::add(TokenId t, int n) {
  if (t < 0) throw ContractError("negative token id");
  if (static_cast<std::size_t>(t) >= counts_.size()) counts_.resize(t + 1, 0);
  counts_[t] += n;
  total_ += n;
}

void TokenMultiset::remove(TokenId t) {
  if (count(t) == 0) throw ContractError("token " + std::to_string(t) + " not in multiset");
  --counts_[t];
  --total_;
}

std::vector<TokenId> TokenMultiset::distinct() const {
  std::vector<TokenId> out;
  for (std::size_t i = 0; i < counts_.size(); ++i)
    if (counts_[i] > 0) out.push_back(static_cast<TokenId>(i));
  return out;
}

bool operator==(const TokenMultiset& a, const TokenMultiset& b) {
  if (a.total_ != b.total_) return false;
  const std::size_t n = std::max(a.counts_.size(), b.counts_.size());
  for (std::size_t i = 0; i < n; ++i)
    if (a.count(static_cast<TokenId>(i)) != b.count(static_cast<TokenId>(i))) return false;
  return true;
}

bool is_multiset_permutation(std::span<const TokenId> a, std::span<const TokenId> b) {
  if (a.size() != b.size()) return false;
  return TokenMultiset(a) == TokenMultiset(b);
}

Vocabulary::Vocabulary() : string_of_{"<pad>", "<s>", "</s>", "<unk>"} {
  for (TokenId i = 0; i < kNumSpecials; ++i) id_of_.emplace(string_of_[i], i);
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : Vocabulary() {
  for (auto& tok : tokens) {
    if (tok.empty() || tok.find_first_of(" \t\r\n") != std::string::npos)
      throw InputError("invalid vocabulary token '" + tok + "'");
    const auto id = static_cast<TokenId>(string_of_.size());
    if (!id_of_.emplace(tok, id).second) throw InputError("duplicate vocabulary token '" + tok + "'");
    string_of_.push_back(std::move(tok));
  }
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = id_of_.find(token);
  return it == id_of_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return id_of_.find(token) != id_of_.end(); }

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= string_of_.size())
    throw ContractError("token id " + std::to_string(id) + " out of range");
  return string_of_[id];
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  for (const auto& tok : corpus_tokens()) out << tok << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) { return Vocabulary(read_lines(path)); }

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

Vocabulary build_vocab(std::span<const std::string> corpus, std::size_t min_freq) {
  if (corpus.empty()) throw InputError("cannot build a vocabulary from an empty corpus");
  if (min_freq == 0) throw InputError("min_freq must be >= 1");
  std::map<std::string, std::size_t> freq;
  for (const auto& line : corpus)
    for (auto& tok : split_whitespace(line)) ++freq[std::move(tok)];
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : freq)
    if (n >= min_freq) kept.emplace_back(tok, n);
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [tok, n] : kept) tokens.push_back(std::move(tok));
  return Vocabulary(std::move(tokens));
}

TokenSeq encode(const Vocabulary& vocab, std::string_view sentence) {
  TokenSeq out;
  for (const auto& tok : split_whitespace(sentence)) out.push_back(vocab.id(tok));
  if (out.empty()) throw InputError("sentence has no tokens");
  return out;
}

std::string decode(const Vocabulary& vocab, std::span<const TokenId> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += vocab.token(tokens[i]);
  }
  return out;
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "?";
}

Example make_word_ordering(const TokenSeq& target, Rng& rng) {
  if (target.empty()) throw ContractError("word ordering needs a non-empty target");
  Example ex{target, target};
  // Fisher-Yates with an explicit uniform draw so the output does not depend on
  // the standard library's std::shuffle.
  for (std::size_t i = ex.source.size() - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(ex.source[i], ex.source[pick(rng)]);
  }
  return ex;
}

Dataset parse_dataset(std::istream& in, const Vocabulary& vocab, Split split,
                      std::size_t max_length) {
  Dataset ds;
  ds.split = split;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(lineno, "expected source<TAB>target");
    if (line.find('\t', tab + 1) != std::string::npos) throw ParseError(lineno, "more than one TAB");
    Example ex;
    try {
      ex.source = encode(vocab, std::string_view(line).substr(0, tab));
      ex.target = encode(vocab, std::string_view(line).substr(tab + 1));
    } catch (const InputError& e) {
      throw ParseError(lineno, e.what());
    }
    if (ex.source.size() > max_length || ex.target.size() > max_length)
      throw ParseError(lineno, "example exceeds max_length " + std::to_string(max_length));
    ds.examples.push_back(std::move(ex));
  }
  if (ds.examples.empty()) throw InputError("dataset is empty");
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, const Vocabulary& vocab, Split split,
                     std::size_t max_length) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dataset " + path.string());
  try {
    return parse_dataset(in, vocab, split, max_length);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.what());
  }
}

void write_dataset(std::ostream& out, const Dataset& dataset, const Vocabulary& vocab) {
  for (const auto& ex : dataset.examples)
    out << decode(vocab, ex.source) << '\t' << decode(vocab, ex.target) << '\n';
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

std::vector<std::string> dataset_sentences(const std::filesystem::path& path) {
  std::vector<std::string> out;
  for (auto& line : read_lines(path)) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      out.push_back(std::move(line));
      continue;
    }
    out.push_back(line.substr(0, tab));
    out.push_back(line.substr(tab + 1));
  }
  return out;
}

std::vector<std::string> generate_synthetic_corpus(const SyntheticLanguageConfig& config,
                                                   std::size_t sentences, Rng& rng) {
  const int v = config.vocab_tokens;
  if (v < 2 || config.min_length < 1 || config.max_length < config.min_length ||
      config.successors < 1 || config.successors > v || config.start_tokens < 1 ||
      config.start_tokens > v)
    throw InputError("invalid synthetic language configuration");

  std::vector<std::string> names;
  for (int i = 0; i < v; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "w%02d", i);
    names.emplace_back(buf);
  }

  std::vector<int> order(v);
  for (int i = 0; i < v; ++i) order[i] = i;
  std::vector<std::vector<int>> next(v);
  for (int tok = 0; tok < v; ++tok) {
    for (int i = 0; i < config.successors; ++i) {
      std::uniform_int_distribution<int> pick(i, v - 1);
      std::swap(order[i], order[pick(rng)]);
    }
    next[tok].assign(order.begin(), order.begin() + config.successors);
  }
  std::vector<double> weights;
  for (int i = 0; i < config.successors; ++i) weights.push_back(std::ldexp(1.0, -i));

  std::vector<std::string> out;
  out.reserve(sentences);
  std::uniform_int_distribution<int> length(config.min_length, config.max_length);
  std::uniform_int_distribution<int> start(0, config.start_tokens - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  for (std::size_t s = 0; s < sentences; ++s) {
    const int len = length(rng);
    int tok = start(rng);
    std::string line = names[tok];
    for (int i = 1; i < len; ++i) {
      double u = unit(rng) * total;
      int pick = 0;
      while (pick + 1 < config.successors && u >= weights[pick]) u -= weights[pick++];
      tok = next[tok][pick];
      line += ' ';
      line += names[tok];
    }
    out.push_back(std::move(line));
  }
  return out;
}

WordOrderingSplits make_word_ordering_splits(std::span<const std::string> sentences,
                                             std::span<const double> fractions, std::size_t min_freq, Rng& rng) {
  if (fractions.size() != 3) throw InputError("expected three split fractions");
  if (sentences.empty()) throw InputError("empty corpus");
  const auto n = sentences.size();
  const auto take = [n](double f) {
    return std::min(n, static_cast<std::size_t>(std::floor(static_cast<double>(n) * f + 1e-9)));
  };
  const std::size_t n_train = take(fractions[0]);
  const std::size_t n_valid = std::min(n - n_train, take(fractions[1]));
  if (n_train == 0) throw InputError("training split is empty");

  WordOrderingSplits out{build_vocab(sentences.first(n_train), min_freq), {{}, Split::Train},
                         {{}, Split::Valid}, {{}, Split::Test}};
  for (std::size_t i = 0; i < n; ++i) {
    Dataset& ds = i < n_train ? out.train : i < n_train + n_valid ? out.valid : out.test;
    ds.examples.push_back(make_word_ordering(encode(out.vocab, sentences[i]), rng));
  }
  return out;
}

}  // namespace l2s
