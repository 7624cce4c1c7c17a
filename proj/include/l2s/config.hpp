#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "l2s/corpus.hpp"
#include "l2s/model.hpp"
#include "l2s/train.hpp"

namespace l2s {

// Explicitly set keys only; defaults are applied by resolve_config.
using KeyValues = std::map<std::string, std::string>;

struct SchemaEntry {
  std::string key;
  std::string default_value;
  std::string help;
};

const std::vector<SchemaEntry>& config_schema();

// `key=value` lines; blank lines and `#` comments are skipped.
KeyValues parse_config(std::istream& in);
KeyValues load_config_file(const std::filesystem::path& path);
// Applies `k=v` strings on top of `kv`.
void apply_overrides(KeyValues& kv, const std::vector<std::string>& overrides);

struct RunConfig {
  ModelConfig model;  // vocab_size is filled once the vocabulary is known
  TrainConfig train;
  std::optional<std::filesystem::path> train_path, valid_path, test_path, vocab_path, checkpoint_path, corpus_path;
  std::size_t min_freq = 1;
  std::size_t workers = 0;  // 0 keeps the OpenMP default

  SyntheticLanguageConfig synthetic;
  std::size_t synthetic_sentences = 2400;
  std::vector<double> split_fractions{0.8, 0.1, 0.1};

  std::vector<double> scales{1, 10, 100, 1000};
  std::size_t inspect_examples = 20;

  bool use_mle() const { return std::holds_alternative<MleLoss>(train.loss); }
};

// Validates every key; the InputError message lists all offending keys.
RunConfig resolve_config(const KeyValues& kv);

// Every schema key with its resolved value, one `key=value` per line.
std::string config_echo(const KeyValues& kv);

}  // namespace l2s
