#include <doctest.h>

#include <algorithm>
#include <set>

#include "l2s/costexp.hpp"
#include "l2s/error.hpp"
#include "l2s/oracle.hpp"
#include "tokens.hpp"

using namespace l2s;
using namespace tok;

namespace {

ModelConfig tiny(int vocab = 12) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.embedding_dim = 6;
  c.hidden_dim = 8;
  return c;
}

struct Fixture {
  Parameters params;
  Example ex;
  Memory memory;

  Fixture(std::uint64_t seed, TokenSeq target, TokenSeq source)
      : params([&] {
          Rng rng(seed);
          return Parameters::random_uniform(tiny(), rng, 0.5);
        }()),
        ex{std::move(source), std::move(target)},
        memory(encode(params, ex.source)) {}

  DecoderContext ctx() const { return {&params, &memory}; }
  // Decoder after consuming BOS.
  DecoderState start() const { return decode_step(params, initial_state(params, memory), kBos, memory).state; }
};

ExpansionConfig kt_config(PolicyKind rollout) {
  ExpansionConfig cfg;
  cfg.rollout = rollout;
  cfg.reference = ReferenceKind::KendallTauAlign;
  cfg.metric = MetricKind::KendallTau;
  return cfg;
}

TokenSeq random_target(Rng& rng, int n, int alphabet) {
  std::uniform_int_distribution<TokenId> t(4, 4 + alphabet - 1);
  TokenSeq s(n);
  for (auto& v : s) v = t(rng);
  return s;
}

}  // namespace

TEST_CASE("reference roll-in reproduces the ground-truth prefix") {
  const TokenSeq gt = {a, b, c, d, e};
  Fixture f(1, gt, {c, e, a, d, b});
  for (std::size_t t = 0; t <= gt.size(); ++t) {
    Rng rng(0);
    const auto r = roll_in(f.params, f.ex, PolicyKind::reference(), t, ReferenceKind::KendallTauAlign, true, rng);
    CHECK(r.state.prefix() == TokenSeq(gt.begin(), gt.begin() + static_cast<long>(t)));
    CHECK_FALSE(r.truncated);
    CHECK(r.logits.size() == 12);
  }
}

TEST_CASE("learned roll-in follows a constant argmax") {
  Parameters p(tiny());
  const auto& L = p.layout();
  p.values()[L.out_b.offset + 9] = 5.0;
  const Example ex{{a, b}, {a, b, c}};
  Rng rng(0);
  const auto r = roll_in(p, ex, PolicyKind::learned(), 4, ReferenceKind::MeteorChunk, false, rng);
  CHECK(r.state.prefix() == TokenSeq{9, 9, 9, 9});
}

TEST_CASE("mixed roll-in is reproducible under a fixed seed") {
  Fixture f(2, {a, b, c, d, e, a}, {a, e, d, c, b, a});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng r1(seed), r2(seed);
    const auto x = roll_in(f.params, f.ex, PolicyKind::mixed_cells(0.5), 4, ReferenceKind::KendallTauAlign, true, r1);
    const auto y = roll_in(f.params, f.ex, PolicyKind::mixed_cells(0.5), 4, ReferenceKind::KendallTauAlign, true, r2);
    CHECK(x.state.prefix() == y.state.prefix());
    CHECK(x.logits == y.logits);
    CHECK(is_multiset_permutation(x.state.prefix(), x.state.prefix()));
  }
}

TEST_CASE("all-remaining candidates") {
  const TokenSeq gt = {a, b, c};
  RolloutState s(gt, &gt);
  s.emit(b, gt);
  CHECK(sample_candidates(SamplingStrategy::all_remaining(), gt, 1, {}, s).tokens == TokenSeq{a, c});
  RolloutState g(gt);
  g.emit(b, gt);
  CHECK(sample_candidates(SamplingStrategy::all_remaining(), gt, 1, {}, g).tokens == TokenSeq{a, c});
  RolloutState dup(TokenSeq{a, a, b}, nullptr);
  CHECK(sample_candidates(SamplingStrategy::all_remaining(), {a, a, b}, 0, {}, dup).tokens == TokenSeq{a, b});
}

TEST_CASE("neighbour window plus top model tokens") {
  const TokenSeq gt = {a, b, c};
  RolloutState s(gt);
  std::vector<double> probs(12, 0.0);
  probs[10] = 0.5;
  probs[11] = 0.3;
  probs[a] = 0.2;
  const auto cands = sample_candidates(SamplingStrategy::neighbors_plus_top(5, 3), gt, 2, probs, s);
  CHECK(cands.tokens == TokenSeq{a, b, c, kEos, 10, 11});

  // Top tokens overlapping the window are not repeated.
  std::vector<double> overlap(30, 0.0);
  for (TokenId t = 4; t < 30; ++t) overlap[t] = 1.0 / t;
  const TokenSeq long_gt = {4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
  RolloutState ls(long_gt);
  const auto many = sample_candidates(SamplingStrategy::neighbors_plus_top(), long_gt, 5, overlap, ls);
  CHECK(many.tokens.size() < 11 + 15);
  CHECK(std::set<TokenId>(many.tokens.begin(), many.tokens.end()).size() == many.tokens.size());
  CHECK_THROWS_AS(SamplingStrategy::neighbors_plus_top(0, 0), InputError);
}

TEST_CASE("neighbour candidates respect word ordering availability") {
  const TokenSeq gt = {a, b, c, d};
  RolloutState s(gt, &gt);
  s.emit(a, gt);
  s.emit(b, gt);
  std::vector<double> probs(12, 0.1);
  const auto cands = sample_candidates(SamplingStrategy::neighbors_plus_top(), gt, 2, probs, s);
  CHECK(cands.tokens == TokenSeq{c, d});
}

TEST_CASE("Kendall-tau costs for the first step of a three-token sentence") {
  const TokenSeq gt = {a, b, c};
  Fixture f(3, gt, {b, c, a});
  RolloutState state(gt, &f.ex.source);
  const DecoderState dec = f.start();
  const CandidateSet cands{0, {a, b, c}};
  Rng rng(1);
  const CostVector cv = expand_costs(f.ctx(), state, dec, cands, kt_config(PolicyKind::reference()), gt, rng);
  REQUIRE(cv.costs.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    const double best =
        oracle::best_completion_bruteforce({cands.tokens[i]}, gt, MetricKind::KendallTau).cost;
    CHECK(cv.costs[i] == doctest::Approx(best).epsilon(1e-15));
  }
  CHECK(cv.costs[0] == 0.0);
  CHECK(cv.costs[1] == doctest::Approx(1.0 / 3.0));
  CHECK(cv.costs[2] == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("reference rollouts are optimal for Kendall-tau after any roll-in") {
  Rng data(4);
  for (int i = 0; i < 60; ++i) {
    const TokenSeq gt = random_target(data, 6, 4);
    TokenSeq src = gt;
    std::shuffle(src.begin(), src.end(), data);
    Fixture f(5 + i, gt, src);
    std::uniform_int_distribution<std::size_t> tdist(0, gt.size() - 1);
    const std::size_t t = tdist(data);
    Rng rng(i);
    const auto r = roll_in(f.params, f.ex, PolicyKind::learned(), t, ReferenceKind::KendallTauAlign, true, rng);
    const auto cands = sample_candidates(SamplingStrategy::all_remaining(), gt, t, {}, r.state);
    const CostVector cv = expand_costs_serial(f.ctx(), r.state, r.decoder, cands,
                                              kt_config(PolicyKind::reference()), gt, rng);
    RolloutState probe = r.state;
    const TokenId ref_tok = kt_reference_step(probe, gt);
    const double lo = *std::min_element(cv.costs.begin(), cv.costs.end());
    for (std::size_t j = 0; j < cands.tokens.size(); ++j) {
      TokenSeq prefix = r.state.prefix();
      prefix.push_back(cands.tokens[j]);
      CHECK(cv.costs[j] == doctest::Approx(oracle::best_completion_bruteforce(prefix, gt, MetricKind::KendallTau).cost));
      if (cands.tokens[j] == ref_tok) CHECK(cv.costs[j] == lo);
    }
  }
}

TEST_CASE("next ground-truth token costs zero on a correct prefix") {
  Rng data(6);
  for (int i = 0; i < 40; ++i) {
    const TokenSeq gt = random_target(data, 7, 3);
    TokenSeq src = gt;
    std::shuffle(src.begin(), src.end(), data);
    Fixture f(100 + i, gt, src);
    const std::size_t t = static_cast<std::size_t>(i) % gt.size();
    Rng rng(i);
    const auto r = roll_in(f.params, f.ex, PolicyKind::reference(), t, ReferenceKind::KendallTauAlign, true, rng);
    const auto cands = sample_candidates(SamplingStrategy::all_remaining(), gt, t, {}, r.state);
    const CostVector cv = expand_costs(f.ctx(), r.state, r.decoder, cands, kt_config(PolicyKind::reference()), gt, rng);
    const auto it = std::find(cv.tokens.begin(), cv.tokens.end(), gt[t]);
    REQUIRE(it != cv.tokens.end());
    CHECK(cv.costs[it - cv.tokens.begin()] == 0.0);
  }
}

TEST_CASE("parallel and serial expansion agree bit for bit") {
  Rng data(7);
  const MetricKind metrics[] = {MetricKind::KendallTau, MetricKind::SmoothedBleu4, MetricKind::SMeteor};
  const PolicyKind rollouts[] = {PolicyKind::learned(), PolicyKind::mixed(0.5), PolicyKind::mixed_cells(0.5)};
  for (int i = 0; i < 30; ++i) {
    const TokenSeq gt = random_target(data, 7, 5);
    TokenSeq src = gt;
    std::shuffle(src.begin(), src.end(), data);
    Fixture f(200 + i, gt, src);
    Rng rng(i);
    const auto r = roll_in(f.params, f.ex, PolicyKind::mixed(0.5), 2, ReferenceKind::KendallTauAlign, true, rng);
    const auto cands = sample_candidates(SamplingStrategy::all_remaining(), gt, 2, {}, r.state);
    ExpansionConfig cfg = kt_config(rollouts[i % 3]);
    cfg.metric = metrics[i % 3];
    Rng r1(i), r2(i);
    const auto par = expand_costs(f.ctx(), r.state, r.decoder, cands, cfg, gt, r1);
    const auto ser = expand_costs_serial(f.ctx(), r.state, r.decoder, cands, cfg, gt, r2);
    CHECK(par.costs == ser.costs);
    CHECK(r1() == r2());
    for (double c : par.costs) {
      CHECK(c >= 0.0);
      CHECK(c <= 1.0);
    }
  }
}

TEST_CASE("costs do not depend on the order of the candidates") {
  const TokenSeq gt = {a, b, c, d, a};
  Fixture f(8, gt, {d, a, c, a, b});
  RolloutState state(gt, &f.ex.source);
  const DecoderState dec = f.start();
  ExpansionConfig cfg = kt_config(PolicyKind::mixed_cells(0.5));
  CandidateSet fwd{0, {a, b, c, d}}, rev{0, {d, c, b, a}};
  Rng r1(3), r2(3);
  const auto x = expand_costs(f.ctx(), state, dec, fwd, cfg, gt, r1);
  const auto y = expand_costs(f.ctx(), state, dec, rev, cfg, gt, r2);
  for (std::size_t i = 0; i < 4; ++i) CHECK(x.costs[i] == y.costs[3 - i]);
}

TEST_CASE("mixed(1) roll-outs equal reference roll-outs") {
  const TokenSeq gt = {a, b, c, d, e};
  Fixture f(9, gt, gt);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RolloutState state(gt);
    state.emit(c, gt);
    const DecoderState dec = initial_state(f.params, f.memory);
    ExpansionConfig ref_cfg = kt_config(PolicyKind::reference());
    ExpansionConfig mix_cfg = kt_config(PolicyKind::mixed(1.0));
    ExpansionConfig cell_cfg = kt_config(PolicyKind::mixed_cells(1.0));
    for (auto* cfg : {&ref_cfg, &mix_cfg, &cell_cfg}) cfg->metric = MetricKind::SmoothedBleu4;
    Rng r1(seed), r2(seed), r3(seed);
    PolicySchedule s1(ref_cfg.rollout), s2(mix_cfg.rollout), s3(cell_cfg.rollout);
    s1.begin_sequence(r1);
    s2.begin_sequence(r2);
    s3.begin_sequence(r3);
    const auto x = complete_rollout(f.ctx(), state, dec, {kBos, c}, s1, ref_cfg, gt, r1);
    const auto y = complete_rollout(f.ctx(), state, dec, {kBos, c}, s2, mix_cfg, gt, r2);
    const auto z = complete_rollout(f.ctx(), state, dec, {kBos, c}, s3, cell_cfg, gt, r3);
    CHECK(x == y);
    CHECK(x == z);
    CHECK(x == TokenSeq{c, a, b, d, e});
  }
}

TEST_CASE("learned roll-outs under word ordering stay permutations") {
  Rng data(10);
  for (int i = 0; i < 40; ++i) {
    const TokenSeq gt = random_target(data, 6, 6);
    TokenSeq src = gt;
    std::shuffle(src.begin(), src.end(), data);
    Fixture f(300 + i, gt, src);
    RolloutState state(gt, &f.ex.source);
    Rng rng(i);
    PolicySchedule s(PolicyKind::learned());
    s.begin_sequence(rng);
    const auto done = complete_rollout(f.ctx(), state, initial_state(f.params, f.memory), {kBos}, s,
                                       kt_config(PolicyKind::learned()), gt, rng);
    CHECK(is_multiset_permutation(done, src));
  }
}

TEST_CASE("an EOS candidate is scored on the truncated sequence") {
  const TokenSeq gt = {a, b};
  Fixture f(11, gt, gt);
  RolloutState state(gt);
  state.emit(a, gt);
  ExpansionConfig cfg = kt_config(PolicyKind::reference());
  cfg.metric = MetricKind::Bleu1;
  cfg.reference = ReferenceKind::BleuSuffix;
  Rng rng(0);
  const auto cv =
      expand_costs_serial(f.ctx(), state, f.start(), {1, {kEos, b}}, cfg, gt, rng);
  CHECK(cv.costs[0] == doctest::Approx(1.0 - bleu1(TokenSeq{a}, gt)));
  CHECK(cv.costs[1] == 0.0);
}

TEST_CASE("Kendall-tau costs reject non-permutation completions") {
  CHECK_THROWS_AS(completion_cost(MetricKind::KendallTau, {a, b}, {a, c}, {}), InputError);
  CHECK(completion_cost(MetricKind::SmoothedBleu4, {}, {a, c}, {}) == 1.0);
}
