// Serial vs OpenMP timing of cost expansion and batch gradients on a
// desk-scale word ordering model.
//
//   bench_costexp [--repeats N] [--threads N]

#include <omp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <iostream>

#include "l2s/costexp.hpp"
#include "l2s/train.hpp"

using namespace l2s;

namespace {

template <class F>
double best_of(int repeats, F&& f) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto start = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  return best;
}

void row(const char* name, double serial, double parallel, bool same) {
  std::printf("%-16s serial=%9.3f ms  parallel=%9.3f ms  speedup=%5.2f  identical=%s\n", name, 1e3 * serial,
              1e3 * parallel, serial / parallel, same ? "yes" : "no");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs OpenMP cost expansion benchmark"};
  int repeats = 5;
  int threads = 0;
  app.add_option("--repeats", repeats, "timed repetitions, best kept");
  app.add_option("--threads", threads, "OpenMP threads (0 keeps the default)");
  CLI11_PARSE(app, argc, argv);
  if (threads > 0) omp_set_num_threads(threads);
  std::printf("omp_max_threads=%d\n", omp_get_max_threads());

  Rng rng(1);
  SyntheticLanguageConfig lang;
  const auto sentences = generate_synthetic_corpus(lang, 64, rng);
  const std::vector<double> fractions{1.0, 0.0, 0.0};
  const WordOrderingSplits data = make_word_ordering_splits(sentences, fractions, 1, rng);

  ModelConfig mc;
  mc.vocab_size = static_cast<int>(data.vocab.size());
  const Parameters params = Parameters::random_uniform(mc, rng);
  TrainConfig tc;

  // One cost expansion at the first position of a 10-token example.
  const Example* longest = &data.train.examples[0];
  for (const auto& ex : data.train.examples)
    if (ex.target.size() > longest->target.size()) longest = &ex;
  const Memory memory = encode(params, longest->source);
  const DecoderState dec = decode_step(params, initial_state(params, memory), kBos, memory).state;
  const RolloutState state(longest->target, &longest->source);
  const CandidateSet cands = sample_candidates(SamplingStrategy::all_remaining(), longest->target, 0, {}, state);
  const DecoderContext ctx{&params, &memory};
  // Learned roll-outs, so every candidate runs the decoder to the end.
  ExpansionConfig ecfg = tc.expansion();
  ecfg.rollout = PolicyKind::learned();
  CostVector cs, cp;
  const double es = best_of(repeats, [&] {
    Rng r(5);
    cs = expand_costs_serial(ctx, state, dec, cands, ecfg, longest->target, r);
  });
  const double ep = best_of(repeats, [&] {
    Rng r(5);
    cp = expand_costs(ctx, state, dec, cands, ecfg, longest->target, r);
  });
  row("expand_costs", es, ep, cs.costs == cp.costs);

  std::vector<const Example*> batch;
  for (std::size_t i = 0; i < 32; ++i) batch.push_back(&data.train.examples[i]);
  for (bool searnn : {false, true}) {
    BatchGradient gs, gp;
    const double bs = best_of(repeats, [&] { gs = batch_gradient(params, batch, tc, searnn, 1, Execution::Serial); });
    const double bp = best_of(repeats, [&] { gp = batch_gradient(params, batch, tc, searnn, 1, Execution::Parallel); });
    row(searnn ? "batch_searnn" : "batch_mle", bs, bp, gs.grads == gp.grads && gs.loss == gp.loss);
  }
  return 0;
}
