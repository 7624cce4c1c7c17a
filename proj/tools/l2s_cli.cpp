#include <omp.h>

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "l2s/config.hpp"
#include "l2s/error.hpp"
#include "l2s/oracle.hpp"
#include "l2s/train.hpp"
#include "l2s/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace l2s;

namespace {

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::vector<std::string> sets;
  std::optional<std::size_t> workers;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config, "key=value config file");
  cmd->add_option("--seed", a.seed, "random seed (overrides the config)");
  cmd->add_option("--out", a.out, "output directory");
  cmd->add_option("--set", a.sets, "k=v override, repeatable")->take_all();
  cmd->add_option("--workers", a.workers, "OpenMP threads");
}

struct Run {
  KeyValues kv;
  RunConfig rc;
  fs::path out;
};

Run prepare(const CommonArgs& a) {
  Run run;
  if (!a.config.empty()) run.kv = load_config_file(a.config);
  apply_overrides(run.kv, a.sets);
  if (a.seed) run.kv["seed"] = std::to_string(*a.seed);
  if (a.workers) run.kv["workers"] = std::to_string(*a.workers);
  run.rc = resolve_config(run.kv);
  if (run.rc.workers > 0) omp_set_num_threads(static_cast<int>(run.rc.workers));
  run.rc.train.parallel = run.rc.workers != 1;
  run.out = a.out;
  fs::create_directories(run.out);
  std::ofstream(run.out / "config.resolved") << config_echo(run.kv);
  return run;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw InputError("cannot write " + p.string());
  return f;
}

Vocabulary resolve_vocab(const RunConfig& rc) {
  if (rc.vocab_path) return Vocabulary::load(*rc.vocab_path);
  if (rc.checkpoint_path) {
    const fs::path beside = rc.checkpoint_path->parent_path() / "vocab.txt";
    if (fs::exists(beside)) return Vocabulary::load(beside);
  }
  if (rc.train_path) return build_vocab(dataset_sentences(*rc.train_path), rc.min_freq);
  throw InputError("no vocabulary: set vocab, checkpoint or train");
}

Parameters resolve_checkpoint(const RunConfig& rc, const Vocabulary& vocab) {
  if (!rc.checkpoint_path) throw InputError("checkpoint is required");
  Parameters params = load_checkpoint(*rc.checkpoint_path);
  if (static_cast<std::size_t>(params.config().vocab_size) != vocab.size())
    throw InputError("checkpoint vocabulary size " + std::to_string(params.config().vocab_size) +
                     " does not match the vocabulary (" + std::to_string(vocab.size()) + ")");
  return params;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

int cmd_gen_data(const CommonArgs& a) {
  Run run = prepare(a);
  const RunConfig& rc = run.rc;
  Rng rng(rc.train.seed);
  std::vector<std::string> sentences;
  if (rc.corpus_path) {
    for (auto& line : read_lines(*rc.corpus_path))
      if (!split_whitespace(line).empty()) sentences.push_back(std::move(line));
  } else {
    sentences = generate_synthetic_corpus(rc.synthetic, rc.synthetic_sentences, rng);
  }
  if (sentences.empty()) throw InputError("empty corpus");

  const WordOrderingSplits splits = make_word_ordering_splits(sentences, rc.split_fractions, rc.min_freq, rng);
  splits.vocab.save(run.out / "vocab.txt");
  for (const Dataset* ds : {&splits.train, &splits.valid, &splits.test}) {
    const fs::path path = run.out / (std::string(split_name(ds->split)) + ".tsv");
    auto f = open_out(path);
    write_dataset(f, *ds, splits.vocab);
    std::cout << "split=" << split_name(ds->split) << " examples=" << ds->examples.size() << " path=" << path.string()
              << "\n";
    std::cout << json{{"type", "split"}, {"split", split_name(ds->split)}, {"examples", ds->examples.size()},
                      {"path", path.string()}}
                     .dump()
              << "\n";
  }
  return 0;
}

struct Splits {
  Vocabulary vocab;
  std::optional<Dataset> train, valid, test;
};

Splits load_splits(const RunConfig& rc, bool need_train) {
  Splits s{resolve_vocab(rc), {}, {}, {}};
  const std::size_t max_len = rc.train.max_length;
  if (rc.train_path) s.train = load_dataset(*rc.train_path, s.vocab, Split::Train, max_len);
  if (rc.valid_path) s.valid = load_dataset(*rc.valid_path, s.vocab, Split::Valid, max_len);
  if (rc.test_path) s.test = load_dataset(*rc.test_path, s.vocab, Split::Test, max_len);
  if (need_train && !s.train) throw InputError("train is required");
  return s;
}

void write_eval(std::ostream& human, std::ostream& records, const EvalReport& report, Split split) {
  for (const auto& [metric, score] : report.scores) {
    human << "metric=" << metric_name(metric) << " split=" << split_name(split) << " score=" << fixed(score, 2) << "\n";
    records << json{{"type", "eval"}, {"metric", metric_name(metric)}, {"split", split_name(split)}, {"score", score}}.dump()
            << "\n";
  }
}

int cmd_train(const CommonArgs& a) {
  Run run = prepare(a);
  RunConfig& rc = run.rc;
  const Splits s = load_splits(rc, true);
  rc.model.vocab_size = static_cast<int>(s.vocab.size());
  s.vocab.save(run.out / "vocab.txt");

  auto log = open_out(run.out / "log.jsonl");
  TrainHooks hooks;
  hooks.sink = [&](const json& j) {
    log << j.dump() << "\n";
    log.flush();
  };
  hooks.valid = s.valid ? &*s.valid : nullptr;
  hooks.test = s.test ? &*s.test : nullptr;
  hooks.abort_checkpoint = run.out / "checkpoint.aborted.bin";

  const TrainResult result = rc.use_mle() ? train_mle(*s.train, rc.model, rc.train, hooks)
                                          : train_searnn(*s.train, rc.model, rc.train, hooks);
  save_checkpoint(run.out / "checkpoint.bin", result.params, config_echo(run.kv));

  auto report = open_out(run.out / "report.txt");
  report << "trainer=" << (rc.use_mle() ? "mle" : "searnn") << " loss=" << loss_name(rc.train.loss)
         << " iterations=" << result.log.iterations.size() << "\n";
  if (!result.log.iterations.empty())
    report << "final_loss=" << fixed(result.log.iterations.back().loss, 6) << "\n";
  for (const Dataset* ds : {hooks.valid, hooks.test}) {
    if (!ds) continue;
    const EvalReport er = evaluate(result.params, *ds, rc.train.eval_metrics, rc.train);
    write_eval(report, log, er, ds->split);
  }
  report.close();
  std::ifstream in(run.out / "report.txt");
  std::cout << in.rdbuf();
  return 0;
}

int cmd_evaluate(const CommonArgs& a) {
  Run run = prepare(a);
  const RunConfig& rc = run.rc;
  const Splits s = load_splits(rc, false);
  const Parameters params = resolve_checkpoint(rc, s.vocab);
  if (!s.valid && !s.test) throw InputError("evaluate needs valid or test");
  auto records = open_out(run.out / "eval.jsonl");
  for (const auto* ds : {s.valid ? &*s.valid : nullptr, s.test ? &*s.test : nullptr}) {
    if (!ds) continue;
    const EvalReport er = evaluate(params, *ds, rc.train.eval_metrics, rc.train);
    write_eval(std::cout, records, er, ds->split);
    auto hyp = open_out(run.out / ("hypotheses." + std::string(split_name(ds->split)) + ".txt"));
    for (const auto& h : er.hypotheses) hyp << decode(s.vocab, h) << "\n";
  }
  return 0;
}

int cmd_inspect_costs(const CommonArgs& a) {
  Run run = prepare(a);
  const RunConfig& rc = run.rc;
  const Splits s = load_splits(rc, true);
  const Parameters params = resolve_checkpoint(rc, s.vocab);
  const auto logged = inspect_costs(params, *s.train, rc.train, rc.inspect_examples);

  auto dump = open_out(run.out / "costs.txt");
  auto records = open_out(run.out / "costs.jsonl");
  for (const auto& lc : logged) {
    for (std::size_t i = 0; i < lc.costs.tokens.size(); ++i) {
      dump << "ex=" << lc.example << " t=" << lc.costs.step << " tok=" << s.vocab.token(lc.costs.tokens[i])
           << " cost=" << fixed(lc.costs.costs[i], 4) << "\n";
    }
    records << json{{"type", "costs"}, {"ex", lc.example}, {"t", lc.costs.step}, {"tokens", lc.costs.tokens},
                    {"costs", lc.costs.costs}}
                   .dump()
            << "\n";
  }

  const auto sweep = scale_sweep(logged, rc.scales);
  for (const auto& pt : sweep) {
    std::cout << "scale_alpha=" << pt.scale_alpha << " top1=" << fixed(pt.mean_top1, 6) << " vectors=" << pt.vectors
              << "\n";
    records << json{{"type", "sweep"}, {"scale_alpha", pt.scale_alpha}, {"top1", pt.mean_top1}, {"vectors", pt.vectors}}
                   .dump()
            << "\n";
  }
  const bool monotone = monotone_non_decreasing(sweep);
  std::cout << "cost_vectors=" << logged.size() << " monotone=" << (monotone ? "yes" : "no") << "\n";
  return 0;
}

int cmd_verify_policy(const CommonArgs& a, const PolicyVerifyConfig& vcfg) {
  Run run = prepare(a);
  Rng rng(run.rc.train.seed);
  const auto groups = verify_kendall_reference(vcfg, rng);
  auto records = open_out(run.out / "verify.jsonl");
  std::size_t cases = 0, failures = 0, passed = 0;
  for (const auto& g : groups) {
    cases += g.cases;
    failures += g.failures;
    passed += g.passed();
    std::cout << (g.passed() ? "PASS " : "FAIL ") << g.name << " cases=" << g.cases << " failures=" << g.failures;
    if (!g.passed()) std::cout << " first: " << g.first_failure;
    std::cout << "\n";
    records << json{{"type", "verify"}, {"group", g.name}, {"cases", g.cases}, {"failures", g.failures}}.dump() << "\n";
  }
  std::cout << "summary: " << passed << "/" << groups.size() << " groups passed, cases=" << cases
            << " failures=" << failures << "\n";
  return failures == 0 ? 0 : 1;
}

int cmd_grad_check(const CommonArgs& a, std::size_t instances, std::size_t coords) {
  Run run = prepare(a);
  Rng rng(run.rc.train.seed);
  auto results = grad_check_losses(instances, rng);
  ModelConfig mc = run.rc.model;
  mc.vocab_size = kNumSpecials + 8;
  results.push_back(grad_check_model(mc, instances, coords, rng));

  auto records = open_out(run.out / "grad_check.jsonl");
  bool ok = true;
  double worst = 0.0;
  for (const auto& r : results) {
    ok = ok && r.passed();
    worst = std::max(worst, r.max_rel_error);
    std::cout << (r.passed() ? "PASS " : "FAIL ") << r.name << " instances=" << r.instances
              << " max_rel_error=" << r.max_rel_error << " tolerance=" << r.tolerance << "\n";
    records << json{{"type", "grad_check"}, {"check", r.name}, {"instances", r.instances},
                    {"max_rel_error", r.max_rel_error}, {"tolerance", r.tolerance}}
                   .dump()
            << "\n";
  }
  std::cout << "max_rel_error=" << worst << "\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning-to-search training for recurrent sequence models"};
  app.require_subcommand(1);
  CommonArgs common;

  auto* gen = app.add_subcommand("gen-data", "write word ordering train/valid/test splits");
  auto* train = app.add_subcommand("train", "train with MLE or SeaRNN, dispatched on the loss key");
  auto* eval = app.add_subcommand("evaluate", "greedy decoding scores for a checkpoint");
  auto* inspect = app.add_subcommand("inspect-costs", "dump cost vectors and sweep scale_alpha");
  auto* verify = app.add_subcommand("verify-policy", "check the Kendall-tau reference policy by exhaustive search");
  auto* grad = app.add_subcommand("grad-check", "finite-difference gradient checks");
  for (auto* cmd : {gen, train, eval, inspect, verify, grad}) add_common(cmd, common);

  PolicyVerifyConfig vcfg;
  vcfg.exhaustive_max_n = 6;
  verify->add_option("--max-n", vcfg.max_n, "longest ground truth");
  verify->add_option("--exhaustive-max-n", vcfg.exhaustive_max_n, "enumerate every prefix up to this length");
  verify->add_option("--random-prefixes", vcfg.random_prefixes, "prefixes per longer ground truth");
  std::size_t instances = 100, coords = 50;
  grad->add_option("--instances", instances, "random instances per check");
  grad->add_option("--coords", coords, "model coordinates per instance");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return cmd_gen_data(common);
    if (*train) return cmd_train(common);
    if (*eval) return cmd_evaluate(common);
    if (*inspect) return cmd_inspect_costs(common);
    if (*verify) return cmd_verify_policy(common, vcfg);
    if (*grad) return cmd_grad_check(common, instances, coords);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
