#include <doctest.h>

#include "l2s/error.hpp"
#include "l2s/metrics.hpp"
#include "l2s/oracle.hpp"
#include "l2s/policy.hpp"
#include "tokens.hpp"

using namespace l2s;
using namespace tok;

namespace {

RolloutState after(const TokenSeq& ref, const TokenSeq& prefix, const TokenSeq* source = nullptr) {
  RolloutState s(ref, source);
  for (TokenId t : prefix) s.emit(t, ref);
  return s;
}

}  // namespace

TEST_CASE("Kendall-tau reference step takes the smallest unused position") {
  const TokenSeq ref = {a, b, c, d};
  RolloutState s = after(ref, {c, a});
  CHECK(kt_reference_step(s, ref) == b);
  RolloutState empty(ref);
  CHECK(kt_reference_step(empty, ref) == a);
  RolloutState full = after(ref, {a, b, c, d});
  CHECK(kt_reference_step(full, ref) == kEos);
}

TEST_CASE("Kendall-tau reference completion is optimal on small cases") {
  const TokenSeq ref = {a, b, c, d};
  const TokenSeq done = kt_reference_complete(after(ref, {c, a}), ref);
  CHECK(done == TokenSeq{c, a, b, d});
  CHECK(kendall_tau_distance(done, ref) ==
        oracle::best_completion_bruteforce({c, a}, ref, MetricKind::KendallTau).cost);
  CHECK(kt_reference_complete(RolloutState(TokenSeq{a, b, c}), TokenSeq{a, b, c}) == TokenSeq{a, b, c});
  CHECK(kt_reference_complete(after({a, b, c}, {b}), {a, b, c}) == TokenSeq{b, a, c});
}

TEST_CASE("METEOR reference policy cases") {
  const TokenSeq ref = {a, b, c, d};
  RolloutState first(TokenSeq{a, b, c});
  CHECK(meteor_reference_step(first, TokenSeq{a, b, c}) == a);

  RolloutState cont = after(ref, {c});
  CHECK(cont.chunk_cursor() == 2);
  CHECK(meteor_reference_step(cont, ref) == d);
  CHECK(meteor_reference_step(cont, ref) == a);
  CHECK(meteor_reference_step(cont, ref) == b);
  CHECK(chunk_count(align_exact_min_chunks(cont.prefix(), ref)) == oracle::min_chunks_bruteforce(cont.prefix(), ref));
  CHECK(chunk_count(align_exact_min_chunks(cont.prefix(), ref)) == 2);

  RolloutState fresh = after(ref, {c, d});
  CHECK(meteor_reference_step(fresh, ref) == a);
}

TEST_CASE("METEOR reference from scratch reproduces the ground truth") {
  const TokenSeq ref = {a, b, a, c, b, d};
  RolloutState s(ref);
  while (!s.finished()) meteor_reference_step(s, ref);
  CHECK(s.prefix() == ref);
}

TEST_CASE("BLEU suffix reference") {
  CHECK(bleu_suffix_reference_complete(TokenSeq{}, {a, b, c}) == TokenSeq{a, b, c});
  CHECK(bleu_suffix_reference_complete(TokenSeq{a, b}, {a, b, c}) == TokenSeq{a, b, c});
  CHECK(bleu_suffix_reference_complete(TokenSeq{x}, {a}) == TokenSeq{x, a});
}

TEST_CASE("BLEU suffix completion never lowers BLEU-1 of the prefix") {
  Rng rng(9);
  std::uniform_int_distribution<TokenId> t(4, 8);
  std::uniform_int_distribution<int> len(1, 7);
  for (int i = 0; i < 300; ++i) {
    TokenSeq ref(len(rng)), prefix(len(rng));
    for (auto& v : ref) v = t(rng);
    for (auto& v : prefix) v = t(rng);
    const TokenSeq done = bleu_suffix_reference_complete(prefix, ref);
    CHECK(std::equal(prefix.begin(), prefix.end(), done.begin()));
    CHECK(bleu1(done, ref) >= bleu1(prefix, ref));
  }
}

TEST_CASE("learned step is argmax with smallest-id ties") {
  std::vector<double> one_hot(10, 0.0);
  one_hot[7] = 1.0;
  CHECK(learned_step(one_hot) == 7);
  CHECK(learned_step(std::vector<double>{0, 0, 0, 0, 0.2, 0.5, 0.3}) == 5);
  std::vector<double> tie(10, 0.0);
  tie[4] = tie[9] = 0.5;
  CHECK(learned_step(tie) == 4);
  CHECK_THROWS(learned_step(std::vector<double>(5, 0.0)));
}

TEST_CASE("mix decisions") {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    CHECK(mix_decision(rng, PolicyKind::mixed(1.0), MixScope::Sequence) == Choice::Reference);
    CHECK(mix_decision(rng, PolicyKind::mixed(0.0), MixScope::Sequence) == Choice::Learned);
  }
  int ref = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ref += mix_decision(rng, PolicyKind::mixed_cells(0.5), MixScope::Step) == Choice::Reference;
  CHECK(std::abs(ref / double(draws) - 0.5) <= 0.02);
  CHECK_THROWS_AS(mix_decision(rng, PolicyKind::mixed(0.5), MixScope::Step), ContractError);
  CHECK_THROWS_AS(mix_decision(rng, PolicyKind::reference(), MixScope::Step), ContractError);
  CHECK_THROWS_AS(PolicyKind::mixed(1.5), InputError);
}

TEST_CASE("policy schedules") {
  Rng rng(2);
  PolicySchedule seq(PolicyKind::mixed(0.5));
  for (int s = 0; s < 50; ++s) {
    seq.begin_sequence(rng);
    const Choice first = seq.next_step(rng);
    for (int t = 0; t < 5; ++t) CHECK(seq.next_step(rng) == first);
  }
  PolicySchedule always(PolicyKind::mixed_cells(1.0));
  always.begin_sequence(rng);
  CHECK(always.reference_only());
  for (int t = 0; t < 20; ++t) CHECK(always.next_step(rng) == Choice::Reference);
  PolicySchedule learned(PolicyKind::learned());
  learned.begin_sequence(rng);
  CHECK(learned.next_step(rng) == Choice::Learned);
}

TEST_CASE("rollout state bookkeeping") {
  const TokenSeq ref = {a, b, a, c};
  const TokenSeq src = {c, a, a, b};
  RolloutState s(ref, &src);
  s.emit(a, ref);
  CHECK(s.used_ref()[0]);
  CHECK(s.chunk_cursor() == 0);
  s.emit(a, ref);
  CHECK(s.used_ref()[2]);
  CHECK(s.aligned() == 2);
  CHECK(s.remaining().count(a) == 0);
  CHECK_THROWS_AS(s.emit(kEos, ref), ContractError);
  CHECK(kt_reference_step(s, ref) == b);
  CHECK(kt_reference_step(s, ref) == c);
  CHECK(s.remaining().empty());
  CHECK(kt_reference_step(s, ref) == kEos);
  CHECK(s.finished());

  RolloutState gen(ref);
  gen.emit(x, ref);
  CHECK_FALSE(gen.chunk_cursor().has_value());
  CHECK(gen.aligned() == 0);
}

TEST_CASE("reference steps only emit available tokens under word ordering") {
  Rng rng(4);
  std::uniform_int_distribution<TokenId> t(4, 7);
  for (int i = 0; i < 300; ++i) {
    TokenSeq ref(6);
    for (auto& v : ref) v = t(rng);
    TokenSeq src = ref;
    std::shuffle(src.begin(), src.end(), rng);
    for (ReferenceKind kind : {ReferenceKind::KendallTauAlign, ReferenceKind::MeteorChunk}) {
      RolloutState s(ref, &src);
      // A few learned-looking steps first.
      for (int k = 0; k < 2; ++k) s.emit(s.remaining().distinct().back(), ref);
      while (!s.finished()) reference_step(kind, s, ref);
      CHECK(is_multiset_permutation(s.prefix(), src));
    }
  }
}
