// Acceptance runner: one PASS/FAIL line per criterion.
//
//   acceptance --criteria 1,2,3 --work DIR
//
// Criteria 5-7 train desk-scale models and write their logs under DIR.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "l2s/config.hpp"
#include "l2s/loss.hpp"
#include "l2s/metrics.hpp"
#include "l2s/model.hpp"
#include "l2s/oracle.hpp"
#include "l2s/train.hpp"
#include "l2s/verify.hpp"

namespace fs = std::filesystem;
using namespace l2s;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------------------
// 1. Kendall-tau reference policy optimality.

Outcome criterion_1() {
  PolicyVerifyConfig cfg;
  cfg.min_n = 2;
  cfg.exhaustive_max_n = 5;
  cfg.max_n = 7;
  cfg.random_prefixes = 1000;
  Rng rng(2017);
  std::size_t cases = 0, failures = 0;
  std::string first;
  for (const auto& g : verify_kendall_reference(cfg, rng)) {
    std::cout << "  " << g.name << ": cases=" << g.cases << " failures=" << g.failures << "\n";
    cases += g.cases;
    failures += g.failures;
    if (first.empty()) first = g.first_failure;
  }
  return {failures == 0, "cases=" + std::to_string(cases) + " failures=" + std::to_string(failures) +
                             (first.empty() ? "" : " first=" + first)};
}

// ---------------------------------------------------------------------------
// 2. Minimum-chunk alignment against brute force.

Outcome criterion_2() {
  Rng rng(7);
  std::uniform_int_distribution<int> len(0, 8);
  std::uniform_int_distribution<TokenId> tok(kNumSpecials, kNumSpecials + 5);
  std::size_t failures = 0;
  std::string first;
  for (int i = 0; i < 1000; ++i) {
    TokenSeq hyp(static_cast<std::size_t>(len(rng))), ref(static_cast<std::size_t>(len(rng)));
    for (auto& t : hyp) t = tok(rng);
    for (auto& t : ref) t = tok(rng);
    const int fast = chunk_count(align_exact_min_chunks(hyp, ref));
    const int slow = oracle::min_chunks_bruteforce(hyp, ref);
    if (fast != slow) {
      if (failures++ == 0) first = "pair " + std::to_string(i) + ": " + std::to_string(fast) + " vs " + std::to_string(slow);
    }
  }
  return {failures == 0, "pairs=1000 failures=" + std::to_string(failures) + (first.empty() ? "" : " first=" + first)};
}

// ---------------------------------------------------------------------------
// 3. Finite-difference gradient checks.

Outcome criterion_3() {
  Rng rng(3);
  bool pass = true;
  std::string detail;
  for (const auto& r : grad_check_losses(100, rng, 1e-6)) {
    std::cout << "  " << r.name << ": instances=" << r.instances << " max_rel_error=" << sci(r.max_rel_error)
              << " tol=" << sci(r.tolerance) << "\n";
    pass = pass && r.passed() && r.instances >= 100;
    detail += r.name + "=" + sci(r.max_rel_error) + " ";
  }
  ModelConfig base;
  base.vocab_size = 12;
  base.embedding_dim = 6;
  base.hidden_dim = 8;
  for (int variant = 0; variant < 2; ++variant) {
    ModelConfig cfg = base;
    if (variant == 1) {
      cfg.layers = 2;
      cfg.share_embeddings = false;
    }
    const auto r = grad_check_model(cfg, 100, 50, rng, 1e-4);
    const std::string name = variant == 0 ? "model" : "model_2layer";
    std::cout << "  " << name << ": instances=" << r.instances << " max_rel_error=" << sci(r.max_rel_error)
              << " tol=" << sci(r.tolerance) << "\n";
    pass = pass && r.passed() && r.instances >= 100;
    detail += name + "=" + sci(r.max_rel_error) + " ";
  }
  detail.pop_back();
  return {pass, detail};
}

// ---------------------------------------------------------------------------
// 4. Loss identities.

// Distinct costs on a grid of step 1/45 (a Kendall-tau cost for length 10).
std::vector<double> grid_costs(Rng& rng, std::size_t k) {
  std::vector<int> pool(46);
  std::iota(pool.begin(), pool.end(), 0);
  std::shuffle(pool.begin(), pool.end(), rng);
  std::vector<double> c(k);
  for (std::size_t i = 0; i < k; ++i) c[i] = pool[i] / 45.0;
  return c;
}

std::vector<double> random_scores(Rng& rng, std::size_t k) {
  std::normal_distribution<double> g(0.0, 2.0);
  std::vector<double> s(k);
  for (auto& v : s) v = g(rng);
  return s;
}

Outcome criterion_4() {
  Rng rng(4);
  std::uniform_int_distribution<std::size_t> kdist(2, 12);
  std::uniform_real_distribution<double> cdist(0.0, 1.0), qdist(0.5, 1.0);
  double listmle_gap = 0.0, sum_gap = 0.0, okl_kl_gap = 0.0;
  std::size_t rescale_mismatch = 0;
  const std::size_t trials = 1000;
  for (std::size_t i = 0; i < trials; ++i) {
    const std::size_t k = kdist(rng);
    std::vector<double> costs(k);
    for (auto& c : costs) c = cdist(rng);
    const auto scores = random_scores(rng, k);

    // Top-1 ListMLE against cross-entropy to the first minimum-cost candidate.
    const std::size_t best = cost_order(costs)[0];
    std::vector<double> onehot(k, 0.0);
    onehot[best] = 1.0;
    const auto lm = listmle_topk_step_loss(costs, scores, 1);
    const auto ce = cross_entropy_to_target(scores, onehot);
    listmle_gap = std::max(listmle_gap, std::abs(lm.value - ce.value));
    for (std::size_t j = 0; j < k; ++j) listmle_gap = std::max(listmle_gap, std::abs(lm.grad[j] - ce.grad[j]));

    double q = qdist(rng);
    if (q == 0.5) q = 0.75;
    const auto target = ordering_kl_target(costs, q);
    sum_gap = std::max(sum_gap, std::abs(std::accumulate(target.begin(), target.end(), 0.0) - 1.0));

    const auto grid = grid_costs(rng, k);
    const auto hard = ordering_kl_target(grid, 1.0);
    const auto soft = cost_softmax(grid, 1e6);
    for (std::size_t j = 0; j < k; ++j) okl_kl_gap = std::max(okl_kl_gap, std::abs(hard[j] - soft[j]));

    std::vector<double> scaled(k);
    for (std::size_t j = 0; j < k; ++j) scaled[j] = 7.3 * costs[j];
    const int top_k = static_cast<int>(1 + i % k);
    const auto o1 = ordering_kl_step_loss(costs, scores, q), o2 = ordering_kl_step_loss(scaled, scores, q);
    const auto l1 = listmle_topk_step_loss(costs, scores, top_k), l2 = listmle_topk_step_loss(scaled, scores, top_k);
    if (o1.value != o2.value || o1.grad != o2.grad || l1.value != l2.value || l1.grad != l2.grad) ++rescale_mismatch;
  }
  std::cout << "  listmle_top1_vs_ce max_abs=" << sci(listmle_gap) << " tol=1e-12\n"
            << "  ordering_kl_target_sum max_abs=" << sci(sum_gap) << " tol=1e-12\n"
            << "  ordering_kl_q1_vs_kl_1e6 max_abs=" << sci(okl_kl_gap) << " tol=1e-6\n"
            << "  rescale_7.3 mismatches=" << rescale_mismatch << "\n";
  const bool pass = listmle_gap <= 1e-12 && sum_gap <= 1e-12 && okl_kl_gap <= 1e-6 && rescale_mismatch == 0;
  return {pass, "trials=" + std::to_string(trials) + " listmle_ce=" + sci(listmle_gap) + " target_sum=" + sci(sum_gap) +
                    " q1_vs_kl=" + sci(okl_kl_gap) + " rescale_mismatches=" + std::to_string(rescale_mismatch)};
}

// ---------------------------------------------------------------------------
// Desk-scale word ordering setup shared by criteria 5-7.

struct DeskData {
  WordOrderingSplits splits;
};

DeskData desk_data() {
  const RunConfig rc = resolve_config({});
  Rng rng(1);
  const auto sentences = generate_synthetic_corpus(rc.synthetic, 2400, rng);
  const std::vector<double> fractions{2000.0 / 2400.0, 200.0 / 2400.0, 200.0 / 2400.0};
  return {make_word_ordering_splits(sentences, fractions, 1, rng)};
}

struct RunResult {
  std::string name;
  std::uint64_t seed = 0;
  double test_kendall = 0.0;  // x100, lower is better
  double test_bleu = 0.0;     // x100
  double seconds = 0.0;
};

RunConfig desk_config(const WordOrderingSplits& data, const KeyValues& kv) {
  RunConfig rc = resolve_config(kv);
  rc.model.vocab_size = static_cast<int>(data.vocab.size());
  rc.train.eval_metrics = {MetricKind::KendallTau, MetricKind::SmoothedBleu4};
  return rc;
}

RunResult desk_run(const WordOrderingSplits& data, const std::string& name, KeyValues kv, std::uint64_t seed,
                   const fs::path& work) {
  kv["seed"] = std::to_string(seed);
  const RunConfig rc = desk_config(data, kv);
  const fs::path dir = work / (name + "_seed" + std::to_string(seed));
  fs::create_directories(dir);
  std::ofstream(dir / "config.resolved") << config_echo(kv);
  std::ofstream log(dir / "log.jsonl");
  TrainHooks hooks;
  hooks.sink = [&](const nlohmann::json& j) { log << j.dump() << "\n"; };
  const auto start = std::chrono::steady_clock::now();
  const TrainResult tr = rc.use_mle() ? train_mle(data.train, rc.model, rc.train, hooks)
                                      : train_searnn(data.train, rc.model, rc.train, hooks);
  const EvalReport er = evaluate(tr.params, data.test, rc.train.eval_metrics, rc.train);
  RunResult r{name, seed, *er.score(MetricKind::KendallTau), *er.score(MetricKind::SmoothedBleu4),
              seconds_since(start)};
  std::ofstream(dir / "result.json") << nlohmann::json{{"name", name},
                                                       {"seed", seed},
                                                       {"test_kendall_tau", r.test_kendall},
                                                       {"test_bleu", r.test_bleu},
                                                       {"seconds", r.seconds}}
                                            .dump()
                                     << "\n";
  std::cout << "  run " << name << " seed=" << seed << " test_kendall_tau=" << fmt(r.test_kendall, 2)
            << " test_bleu=" << fmt(r.test_bleu, 2) << " seconds=" << fmt(r.seconds, 1) << std::endl;
  return r;
}

// ---------------------------------------------------------------------------
// 5. Scale degeneration of the cost softmax.

Outcome criterion_5(const fs::path& work) {
  const DeskData d = desk_data();
  KeyValues kv{{"max_iterations", "300"}, {"seed", "1"}};
  const RunConfig rc = desk_config(d.splits, kv);
  const TrainResult tr = train_searnn(d.splits.train, rc.model, rc.train);
  const auto logged = inspect_costs(tr.params, d.splits.train, rc.train, 100);
  const auto sweep = scale_sweep(logged, rc.scales);

  fs::create_directories(work / "c5");
  std::ofstream out(work / "c5" / "sweep.txt");
  for (const auto& pt : sweep) {
    const std::string line = "scale_alpha=" + fmt(pt.scale_alpha, 0) + " top1=" + fmt(pt.mean_top1, 6) +
                             " vectors=" + std::to_string(pt.vectors);
    std::cout << "  " << line << "\n";
    out << line << "\n";
  }
  const bool monotone = monotone_non_decreasing(sweep);
  double at_1000 = 0.0;
  for (const auto& pt : sweep)
    if (pt.scale_alpha == 1000.0) at_1000 = pt.mean_top1;
  return {monotone && at_1000 >= 0.99 && !logged.empty(),
          "cost_vectors=" + std::to_string(logged.size()) + " monotone=" + (monotone ? "yes" : "no") +
              " top1@1000=" + fmt(at_1000, 6) + " (>= 0.99)"};
}

// ---------------------------------------------------------------------------
// 6 and 7. Desk-scale comparison and loss report.

struct DeskStudy {
  std::vector<RunResult> mle, kt, bleu;
  double seconds = 0.0;
};

const std::uint64_t kSeeds[] = {1, 2, 3};

Outcome criterion_6(const WordOrderingSplits& data, const fs::path& work, DeskStudy& study) {
  const auto start = std::chrono::steady_clock::now();
  for (std::uint64_t seed : kSeeds) {
    study.mle.push_back(desk_run(data, "mle", {{"loss", "mle"}}, seed, work));
    study.kt.push_back(desk_run(data, "searnn_kt", {{"metric", "kendall_tau"}}, seed, work));
    study.bleu.push_back(desk_run(data, "searnn_bleu", {{"metric", "bleu"}}, seed, work));
  }
  study.seconds = seconds_since(start);
  const auto col = [](const std::vector<RunResult>& v, bool kendall) {
    std::vector<double> out;
    for (const auto& r : v) out.push_back(kendall ? r.test_kendall : r.test_bleu);
    return median(out);
  };
  const double mle_kt = col(study.mle, true), mle_bleu = col(study.mle, false);
  const double kt_kt = col(study.kt, true), bleu_bleu = col(study.bleu, false);
  const bool a = kt_kt <= mle_kt, b = bleu_bleu >= mle_bleu, time_ok = study.seconds <= 45 * 60;
  std::cout << "  (a) median test kendall_tau: searnn_kt=" << fmt(kt_kt, 2) << " mle=" << fmt(mle_kt, 2)
            << (a ? " ok" : " violated") << "\n"
            << "  (b) median test bleu: searnn_bleu=" << fmt(bleu_bleu, 2) << " mle=" << fmt(mle_bleu, 2)
            << (b ? " ok" : " violated") << "\n"
            << "  runtime=" << fmt(study.seconds, 0) << "s (<= 2700s)" << (time_ok ? " ok" : " violated") << "\n";
  return {a && b && time_ok, "kt " + fmt(kt_kt, 2) + "<=" + fmt(mle_kt, 2) + ", bleu " + fmt(bleu_bleu, 2) +
                                 ">=" + fmt(mle_bleu, 2) + ", runtime " + fmt(study.seconds, 0) + "s"};
}

Outcome criterion_7(const WordOrderingSplits& data, const fs::path& work, const DeskStudy& study) {
  struct Row {
    std::string label;
    std::vector<RunResult> runs;
  };
  std::vector<Row> rows;
  rows.push_back({"kl scale_alpha=100", study.kt});
  const std::pair<std::string, KeyValues> variants[] = {
      {"ordering_kl q=0.7", {{"loss", "ordering_kl"}, {"q", "0.7"}}},
      {"ordering_kl q=0.9", {{"loss", "ordering_kl"}, {"q", "0.9"}}},
      {"listmle top_k=1", {{"loss", "listmle"}, {"top_k", "1"}}},
      {"listmle top_k=2", {{"loss", "listmle"}, {"top_k", "2"}}},
  };
  for (const auto& [label, kv] : variants) {
    Row row{label, {}};
    std::string name = label;
    std::replace(name.begin(), name.end(), ' ', '_');
    std::replace(name.begin(), name.end(), '=', '_');
    for (std::uint64_t seed : kSeeds) row.runs.push_back(desk_run(data, name, kv, seed, work));
    rows.push_back(std::move(row));
  }
  std::ostringstream table;
  table << "| loss | median test Kendall-tau (lower is better) | median test BLEU |\n|---|---|---|\n";
  for (const auto& row : rows) {
    std::vector<double> kt, bl;
    for (const auto& r : row.runs) {
      kt.push_back(r.test_kendall);
      bl.push_back(r.test_bleu);
    }
    table << "| " << row.label << " | " << fmt(median(kt), 2) << " | " << fmt(median(bl), 2) << " |\n";
  }
  std::vector<double> mk, mb;
  for (const auto& r : study.mle) {
    mk.push_back(r.test_kendall);
    mb.push_back(r.test_bleu);
  }
  table << "| mle (baseline) | " << fmt(median(mk), 2) << " | " << fmt(median(mb), 2) << " |\n";
  std::ofstream(work / "loss_comparison.md") << table.str();
  std::cout << table.str();
  return {true, "report-only, table written to " + (work / "loss_comparison.md").string()};
}

// ---------------------------------------------------------------------------
// 8. Masked greedy decoding always permutes its input.

Outcome criterion_8() {
  Rng rng(8);
  std::uniform_int_distribution<int> len(1, 12);
  std::uniform_int_distribution<TokenId> tok(kNumSpecials, 19);
  ModelConfig cfg;
  cfg.vocab_size = 20;
  cfg.embedding_dim = 8;
  cfg.hidden_dim = 12;
  std::size_t decodes = 0, failures = 0;
  for (int m = 0; m < 10; ++m) {
    const Parameters params = Parameters::random_uniform(cfg, rng, 1.0);
    for (int i = 0; i < 1000; ++i) {
      TokenSeq src(static_cast<std::size_t>(len(rng)));
      for (auto& t : src) t = tok(rng);
      const TokenSeq out = greedy_decode(params, src, true, 80);
      ++decodes;
      if (!is_multiset_permutation(out, src)) ++failures;
    }
  }
  return {failures == 0, "decodes=" + std::to_string(decodes) + " failures=" + std::to_string(failures)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria runner"};
  std::string criteria = "1,2,3,4,5,8";
  std::string work = "acceptance_work";
  app.add_option("--criteria", criteria, "comma-separated criterion numbers (1-8)");
  app.add_option("--work", work, "directory for training logs");
  CLI11_PARSE(app, argc, argv);

  std::set<int> wanted;
  std::stringstream ss(criteria);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      const int c = std::stoi(item);
      if (c < 1 || c > 8) throw std::out_of_range(item);
      wanted.insert(c);
    } catch (const std::exception&) {
      std::cerr << "error: bad criterion '" << item << "'\n";
      return 2;
    }
  }
  const fs::path dir(work);
  fs::create_directories(dir);

  bool all = true;
  const auto report = [&all](int c, const Outcome& o) {
    all = all && o.pass;
    std::cout << "criterion " << c << ": " << (o.pass ? "PASS" : "FAIL") << " " << o.detail << std::endl;
  };
  const auto timed = [&](int c, auto&& fn) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    o.detail += " [" + fmt(seconds_since(start), 1) + "s]";
    report(c, o);
  };

  if (wanted.count(1)) timed(1, criterion_1);
  if (wanted.count(2)) timed(2, criterion_2);
  if (wanted.count(3)) timed(3, criterion_3);
  if (wanted.count(4)) timed(4, criterion_4);
  if (wanted.count(5)) timed(5, [&] { return criterion_5(dir); });
  if (wanted.count(6) || wanted.count(7)) {
    const DeskData d = desk_data();
    DeskStudy study;
    // Criterion 7 reuses the KL runs of criterion 6.
    timed(6, [&] { return criterion_6(d.splits, dir / "c6", study); });
    if (wanted.count(7)) {
      if (study.kt.size() == std::size(kSeeds))
        timed(7, [&] { return criterion_7(d.splits, dir / "c7", study); });
      else
        report(7, {false, "criterion 6 runs did not complete"});
    }
  }
  if (wanted.count(8)) timed(8, criterion_8);
  return all ? 0 : 1;
}
