#include "l2s/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "l2s/error.hpp"

namespace l2s {

const std::vector<SchemaEntry>& config_schema() {
  static const std::vector<SchemaEntry> schema = {
      {"embedding_dim", "32", "embedding size"},
      {"hidden_dim", "64", "recurrent state size"},
      {"layers", "1", "stacked GRU layers"},
      {"bidirectional", "true", "bidirectional encoder"},
      {"dropout", "0", "dropout rate during training"},
      {"share_embeddings", "true", "one embedding table for source and target"},
      {"task", "word_ordering", "word_ordering | generation"},
      {"max_length", "80", "decoding length limit"},
      {"rollin", "mixed", "reference | learned | mixed | mixed_cells"},
      {"rollout", "mixed", "reference | learned | mixed | mixed_cells"},
      {"mix_p", "0.5", "probability of the reference policy when mixing"},
      {"reference", "kendall_tau", "kendall_tau | meteor | bleu_suffix"},
      {"metric", "kendall_tau", "cost metric: kendall_tau | bleu | bleu1 | smeteor"},
      {"loss", "kl", "mle | kl | ordering_kl | listmle"},
      {"scale_alpha", "100", "kl only"},
      {"q", "0.9", "ordering_kl only"},
      {"top_k", "1", "listmle only"},
      {"max_iterations", "3000", "optimizer steps"},
      {"batch_size", "32", "examples per step"},
      {"sampling", "all_remaining", "all_remaining | neighbors_plus_top"},
      {"window", "5", "neighbors_plus_top ground-truth window"},
      {"top", "15", "neighbors_plus_top model tokens"},
      {"seed", "1", "random seed"},
      {"eval_every", "0", "evaluation interval in iterations, 0 disables"},
      {"eval_metrics", "kendall_tau,bleu", "comma-separated metrics"},
      {"meteor_alpha", "0.5", ""},
      {"meteor_beta", "2", ""},
      {"meteor_gamma", "0.5", ""},
      {"lr", "0.001", "Adam learning rate"},
      {"positions_per_example", "0", "cost-expanded positions per example, 0 means all"},
      {"mle_pretrain_iterations", "0", "MLE steps before SeaRNN training"},
      {"workers", "0", "OpenMP threads, 0 keeps the default"},
      {"train", "", "training split"},
      {"valid", "", "validation split"},
      {"test", "", "test split"},
      {"vocab", "", "vocabulary file"},
      {"checkpoint", "", "model checkpoint"},
      {"corpus", "", "target-side corpus for gen-data; empty generates a synthetic one"},
      {"min_freq", "1", "vocabulary frequency cutoff"},
      {"synthetic_sentences", "2400", "gen-data sentence count"},
      {"synthetic_vocab", "50", "content tokens in the synthetic language"},
      {"min_len", "5", "shortest synthetic sentence"},
      {"max_len", "10", "longest synthetic sentence"},
      {"successors", "3", "synthetic successors per token"},
      {"start_tokens", "10", "synthetic sentence-initial tokens"},
      {"split", "0.8,0.1,0.1", "train,valid,test fractions"},
      {"scales", "1,10,100,1000", "inspect-costs scale_alpha sweep"},
      {"inspect_examples", "20", "inspect-costs example count"},
  };
  return schema;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::pair<std::string, std::string> split_kv(std::string_view line) {
  const auto eq = line.find('=');
  if (eq == std::string_view::npos) throw InputError("expected key=value, got '" + std::string(line) + "'");
  std::string key = trim(line.substr(0, eq));
  if (key.empty()) throw InputError("empty key in '" + std::string(line) + "'");
  return {key, trim(line.substr(eq + 1))};
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& s) {
  T v{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty()) throw InputError("not a number: '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw InputError("not a boolean: '" + s + "'");
}

class Resolver {
 public:
  explicit Resolver(const KeyValues& kv) : kv_(kv) {}

  std::string get(const std::string& key) const {
    if (auto it = kv_.find(key); it != kv_.end()) return it->second;
    for (const auto& e : config_schema())
      if (e.key == key) return e.default_value;
    throw ContractError("key missing from schema: " + key);
  }
  bool explicit_key(const std::string& key) const { return kv_.count(key) > 0; }

  // Runs `fn` on the value of `key`, recording a failure against the key.
  void with(const std::string& key, const std::function<void(const std::string&)>& fn) {
    try {
      fn(get(key));
    } catch (const std::exception& e) {
      fail(key, e.what());
    }
  }
  void fail(const std::string& key, const std::string& why) { errors_.push_back(key + ": " + why); }
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  const KeyValues& kv_;
  std::vector<std::string> errors_;
};

template <typename T>
void non_negative(T v) {
  if (v < 0) throw InputError("must be >= 0");
}

}  // namespace

KeyValues parse_config(std::istream& in) {
  KeyValues kv;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    try {
      auto [k, v] = split_kv(line);
      kv[k] = v;
    } catch (const InputError& e) {
      throw ParseError(n, e.what());
    }
  }
  return kv;
}

KeyValues load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  try {
    return parse_config(in);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void apply_overrides(KeyValues& kv, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    auto [k, v] = split_kv(o);
    kv[k] = v;
  }
}

RunConfig resolve_config(const KeyValues& kv) {
  Resolver r(kv);
  std::set<std::string> known;
  for (const auto& e : config_schema()) known.insert(e.key);
  for (const auto& [k, v] : kv)
    if (!known.count(k)) r.fail(k, "unknown key");

  RunConfig rc;
  auto& m = rc.model;
  auto& t = rc.train;
  const auto positive_int = [](const std::string& s) {
    const int v = parse_number<int>(s);
    if (v <= 0) throw InputError("must be positive");
    return v;
  };
  const auto count = [](const std::string& s) { return parse_number<std::size_t>(s); };

  r.with("embedding_dim", [&](auto& s) { m.embedding_dim = positive_int(s); });
  r.with("hidden_dim", [&](auto& s) { m.hidden_dim = positive_int(s); });
  r.with("layers", [&](auto& s) { m.layers = positive_int(s); });
  r.with("bidirectional", [&](auto& s) { m.bidirectional_encoder = parse_bool(s); });
  r.with("dropout", [&](auto& s) {
    m.dropout = parse_number<double>(s);
    if (!(m.dropout >= 0.0 && m.dropout < 1.0)) throw InputError("must lie in [0, 1)");
  });
  r.with("share_embeddings", [&](auto& s) { m.share_embeddings = parse_bool(s); });

  r.with("task", [&](auto& s) {
    if (s == "word_ordering") t.task = Task::WordOrdering;
    else if (s == "generation") t.task = Task::Generation;
    else throw InputError("expected word_ordering or generation");
  });
  r.with("max_length", [&](auto& s) { t.max_length = static_cast<std::size_t>(positive_int(s)); });
  double mix_p = 0.5;
  r.with("mix_p", [&](auto& s) {
    mix_p = parse_number<double>(s);
    if (!(mix_p >= 0.0 && mix_p <= 1.0)) throw InputError("must lie in [0, 1]");
  });
  r.with("rollin", [&](auto& s) { t.rollin = parse_policy(s, mix_p); });
  r.with("rollout", [&](auto& s) { t.rollout = parse_policy(s, mix_p); });
  r.with("reference", [&](auto& s) { t.reference = parse_reference(s); });
  r.with("metric", [&](auto& s) { t.metric = parse_metric(s); });

  std::string loss = "kl";
  r.with("loss", [&](auto& s) {
    loss = s;
    if (s == "mle") t.loss = MleLoss{};
    else if (s == "kl") t.loss = KlLoss{};
    else if (s == "ordering_kl") t.loss = OrderingKlLoss{};
    else if (s == "listmle") t.loss = ListMleLoss{};
    else throw InputError("expected mle, kl, ordering_kl or listmle");
  });
  const auto loss_param = [&](const std::string& key, const std::string& owner,
                              const std::function<void(const std::string&)>& fn) {
    if (loss == owner) r.with(key, fn);
    else if (r.explicit_key(key)) r.fail(key, "only valid with loss=" + owner);
  };
  loss_param("scale_alpha", "kl", [&](auto& s) {
    KlLoss l{parse_number<double>(s)};
    validate(LossConfig{l});
    t.loss = l;
  });
  loss_param("q", "ordering_kl", [&](auto& s) {
    OrderingKlLoss l{parse_number<double>(s)};
    validate(LossConfig{l});
    t.loss = l;
  });
  loss_param("top_k", "listmle", [&](auto& s) {
    ListMleLoss l{parse_number<int>(s)};
    validate(LossConfig{l});
    t.loss = l;
  });

  r.with("max_iterations", [&](auto& s) {
    t.max_iterations = parse_number<long>(s);
    non_negative(t.max_iterations);
  });
  r.with("batch_size", [&](auto& s) { t.batch_size = static_cast<std::size_t>(positive_int(s)); });
  int window = 5, top = 15;
  r.with("window", [&](auto& s) { window = parse_number<int>(s); non_negative(window); });
  r.with("top", [&](auto& s) { top = parse_number<int>(s); non_negative(top); });
  r.with("sampling", [&](auto& s) {
    if (s == "all_remaining") t.sampling = SamplingStrategy::all_remaining();
    else if (s == "neighbors_plus_top") t.sampling = SamplingStrategy::neighbors_plus_top(window, top);
    else throw InputError("expected all_remaining or neighbors_plus_top");
  });
  r.with("seed", [&](auto& s) { t.seed = parse_number<std::uint64_t>(s); });
  r.with("eval_every", [&](auto& s) {
    t.eval_every = parse_number<long>(s);
    non_negative(t.eval_every);
  });
  r.with("eval_metrics", [&](auto& s) {
    t.eval_metrics.clear();
    for (const auto& name : split_list(s)) t.eval_metrics.push_back(parse_metric(name));
  });
  r.with("meteor_alpha", [&](auto& s) { t.meteor.alpha = parse_number<double>(s); });
  r.with("meteor_beta", [&](auto& s) { t.meteor.beta = parse_number<double>(s); });
  r.with("meteor_gamma", [&](auto& s) { t.meteor.gamma = parse_number<double>(s); });
  r.with("meteor_alpha", [&](auto&) { t.meteor.validate(); });
  r.with("lr", [&](auto& s) {
    t.adam.lr = parse_number<double>(s);
    if (!(t.adam.lr > 0.0)) throw InputError("must be positive");
  });
  r.with("positions_per_example", [&](auto& s) { t.positions_per_example = count(s); });
  r.with("mle_pretrain_iterations", [&](auto& s) {
    t.mle_pretrain_iterations = parse_number<long>(s);
    non_negative(t.mle_pretrain_iterations);
  });
  r.with("workers", [&](auto& s) { rc.workers = count(s); });

  const auto path = [&](const std::string& key, std::optional<std::filesystem::path>& out) {
    r.with(key, [&](auto& s) {
      if (!s.empty()) out = s;
    });
  };
  path("train", rc.train_path);
  path("valid", rc.valid_path);
  path("test", rc.test_path);
  path("vocab", rc.vocab_path);
  path("checkpoint", rc.checkpoint_path);
  path("corpus", rc.corpus_path);
  r.with("min_freq", [&](auto& s) { rc.min_freq = static_cast<std::size_t>(positive_int(s)); });

  r.with("synthetic_sentences", [&](auto& s) { rc.synthetic_sentences = static_cast<std::size_t>(positive_int(s)); });
  r.with("synthetic_vocab", [&](auto& s) { rc.synthetic.vocab_tokens = positive_int(s); });
  r.with("min_len", [&](auto& s) { rc.synthetic.min_length = positive_int(s); });
  r.with("max_len", [&](auto& s) {
    rc.synthetic.max_length = positive_int(s);
    if (rc.synthetic.max_length < rc.synthetic.min_length) throw InputError("must be >= min_len");
  });
  r.with("successors", [&](auto& s) { rc.synthetic.successors = positive_int(s); });
  r.with("start_tokens", [&](auto& s) { rc.synthetic.start_tokens = positive_int(s); });
  r.with("split", [&](auto& s) {
    const auto parts = split_list(s);
    if (parts.size() != 3) throw InputError("expected three fractions");
    rc.split_fractions.clear();
    double sum = 0.0;
    for (const auto& p : parts) {
      const double f = parse_number<double>(p);
      if (!(f >= 0.0)) throw InputError("fractions must be >= 0");
      rc.split_fractions.push_back(f);
      sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InputError("fractions must sum to 1");
  });
  r.with("scales", [&](auto& s) {
    rc.scales.clear();
    for (const auto& p : split_list(s)) {
      const double a = parse_number<double>(p);
      if (!(a > 0.0)) throw InputError("scales must be positive");
      rc.scales.push_back(a);
    }
    if (rc.scales.empty()) throw InputError("empty sweep");
  });
  r.with("inspect_examples", [&](auto& s) { rc.inspect_examples = static_cast<std::size_t>(positive_int(s)); });

  if (r.errors().empty()) {
    try {
      t.validate();
    } catch (const std::exception& e) {
      r.fail("task", e.what());
    }
  }
  if (!r.errors().empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : r.errors()) msg += "\n  " + e;
    throw InputError(msg);
  }
  return rc;
}

std::string config_echo(const KeyValues& kv) {
  Resolver r(kv);
  const std::string loss = r.get("loss");
  std::string out;
  for (const auto& e : config_schema()) {
    if (e.key == "scale_alpha" && loss != "kl") continue;
    if (e.key == "q" && loss != "ordering_kl") continue;
    if (e.key == "top_k" && loss != "listmle") continue;
    out += e.key + "=" + r.get(e.key) + "\n";
  }
  return out;
}

}  // namespace l2s
