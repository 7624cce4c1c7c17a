#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace l2s {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;
using Rng = std::mt19937_64;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr TokenId kNumSpecials = 4;

// Token id -> count. Dense storage; ids are small.
class TokenMultiset {
 public:
  TokenMultiset() = default;
  explicit TokenMultiset(std::span<const TokenId> tokens);

  int count(TokenId t) const {
    return t >= 0 && static_cast<std::size_t>(t) < counts_.size() ? counts_[t] : 0;
  }
  void add(TokenId t, int n = 1);
  // Throws ContractError if the token is absent.
  void remove(TokenId t);
  bool empty() const noexcept { return total_ == 0; }
  int total() const noexcept { return total_; }
  // Distinct tokens with non-zero count, ascending by id.
  std::vector<TokenId> distinct() const;

  friend bool operator==(const TokenMultiset& a, const TokenMultiset& b);

 private:
  std::vector<int> counts_;
  int total_ = 0;
};

bool is_multiset_permutation(std::span<const TokenId> a, std::span<const TokenId> b);

class Vocabulary {
 public:
  Vocabulary();
  // `tokens` are the corpus tokens in id order starting at kNumSpecials.
  explicit Vocabulary(std::vector<std::string> tokens);

  TokenId id(std::string_view token) const;  // kUnk when absent
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::size_t size() const noexcept { return string_of_.size(); }
  // Corpus tokens only, in id order.
  std::span<const std::string> corpus_tokens() const {
    return std::span(string_of_).subspan(kNumSpecials);
  }

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  };
  std::vector<std::string> string_of_;
  std::unordered_map<std::string, TokenId, Hash, std::equal_to<>> id_of_;
};

std::vector<std::string> split_whitespace(std::string_view text);

// Tokens with frequency >= min_freq, ordered by descending frequency, ties
// lexicographic.
Vocabulary build_vocab(std::span<const std::string> corpus, std::size_t min_freq = 1);

TokenSeq encode(const Vocabulary& vocab, std::string_view sentence);
std::string decode(const Vocabulary& vocab, std::span<const TokenId> tokens);

struct Example {
  TokenSeq source;
  TokenSeq target;
};

enum class Split { Train, Valid, Test };
std::string_view split_name(Split s);

struct Dataset {
  std::vector<Example> examples;
  Split split = Split::Train;
};

// Source is a uniformly random permutation of target.
Example make_word_ordering(const TokenSeq& target, Rng& rng);

// `source<TAB>target` per line, space-separated tokens.
Dataset parse_dataset(std::istream& in, const Vocabulary& vocab, Split split,
                      std::size_t max_length);
Dataset load_dataset(const std::filesystem::path& path, const Vocabulary& vocab, Split split,
                     std::size_t max_length);
void write_dataset(std::ostream& out, const Dataset& dataset, const Vocabulary& vocab);

// Both sides of every line, for vocabulary construction.
std::vector<std::string> dataset_sentences(const std::filesystem::path& path);
std::vector<std::string> read_lines(const std::filesystem::path& path);

// Random sparse first-order Markov language used for desk-scale word ordering
// experiments. Each content token has `successors` preferred followers with
// geometrically decaying weights; sentence lengths are uniform in
// [min_length, max_length].
struct SyntheticLanguageConfig {
  int vocab_tokens = 50;
  int min_length = 5;
  int max_length = 10;
  int successors = 3;
  int start_tokens = 10;
};

struct WordOrderingSplits {
  Vocabulary vocab;  // built from the training sentences
  Dataset train, valid, test;
};

// Consecutive train/valid/test blocks of floor(n * fraction) sentences, the
// test block taking the remainder. Each target gets a random source order.
WordOrderingSplits make_word_ordering_splits(std::span<const std::string> sentences,
                                             std::span<const double> fractions, std::size_t min_freq, Rng& rng);

std::vector<std::string> generate_synthetic_corpus(const SyntheticLanguageConfig& config,
                                                   std::size_t sentences, Rng& rng);

}  // namespace l2s
