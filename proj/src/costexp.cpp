#include "l2s/costexp.hpp"

#include <algorithm>
#include <exception>
#include <numeric>

#include "l2s/error.hpp"

namespace l2s {

SamplingStrategy SamplingStrategy::neighbors_plus_top(int window, int top) {
  SamplingStrategy s{Kind::NeighborsPlusTop, window, top};
  s.validate();
  return s;
}

void SamplingStrategy::validate() const {
  if (kind == Kind::NeighborsPlusTop && (window < 0 || top < 0 || (window == 0 && top == 0)))
    throw InputError("sampling window/top must be >= 0 and not both zero");
}

namespace {

Eigen::VectorXd policy_logits(const Eigen::VectorXd& logits, const RolloutState& state) {
  return state.word_ordering() ? mask_unused(logits, state.remaining()) : logits;
}

}  // namespace

RollInResult roll_in(const Parameters& params, const Example& example, PolicyKind kind, std::size_t t,
                     ReferenceKind reference, bool word_ordering, Rng& rng) {
  const TokenSeq& gt = example.target;
  const Memory memory = encode(params, example.source);
  RollInResult r{RolloutState(gt, word_ordering ? &example.source : nullptr), initial_state(params, memory),
                 {}, false};
  PolicySchedule schedule(kind);
  schedule.begin_sequence(rng);
  TokenId prev = kBos;
  for (std::size_t i = 0;; ++i) {
    StepOutput out = decode_step(params, r.decoder, prev, memory);
    r.decoder = std::move(out.state);
    r.logits = std::move(out.logits);
    if (i == t) break;
    if (word_ordering && r.state.remaining().empty()) {
      r.truncated = true;
      break;
    }
    TokenId tok;
    if (schedule.next_step(rng) == Choice::Reference) {
      tok = reference_step(reference, r.state, gt);
    } else {
      tok = argmax_token(policy_logits(r.logits, r.state));
      r.state.emit(tok, gt);
    }
    if (tok == kEos) {
      r.truncated = true;
      break;
    }
    prev = tok;
  }
  return r;
}

CandidateSet sample_candidates(const SamplingStrategy& strategy, const TokenSeq& gt, std::size_t t,
                               std::span<const double> model_probs, const RolloutState& state) {
  CandidateSet c{t, {}};
  const auto available = [&state](TokenId tok) {
    if (!state.word_ordering()) return true;
    return tok == kEos ? state.remaining().empty() : state.remaining().count(tok) > 0;
  };
  const auto push = [&c, &available](TokenId tok) {
    if (available(tok) && std::find(c.tokens.begin(), c.tokens.end(), tok) == c.tokens.end())
      c.tokens.push_back(tok);
  };

  if (strategy.kind == SamplingStrategy::Kind::AllRemaining) {
    if (state.word_ordering()) {
      c.tokens = state.remaining().distinct();
    } else {
      TokenMultiset unused;
      for (std::size_t j = 0; j < gt.size(); ++j)
        if (!state.used_ref()[j]) unused.add(gt[j]);
      c.tokens = unused.distinct();
    }
    if (c.tokens.empty()) c.tokens.push_back(kEos);
  } else {
    // Position gt.size() stands for the terminating EOS.
    const auto lo = static_cast<std::ptrdiff_t>(t) - strategy.window;
    const auto hi = static_cast<std::ptrdiff_t>(t) + strategy.window;
    for (auto p = std::max<std::ptrdiff_t>(lo, 0); p <= std::min<std::ptrdiff_t>(hi, gt.size()); ++p)
      push(static_cast<std::size_t>(p) == gt.size() ? kEos : gt[p]);
    std::vector<TokenId> by_prob(model_probs.size());
    std::iota(by_prob.begin(), by_prob.end(), 0);
    std::stable_sort(by_prob.begin(), by_prob.end(),
                     [&](TokenId a, TokenId b) { return model_probs[a] > model_probs[b]; });
    int taken = 0;
    for (TokenId tok : by_prob) {
      if (taken >= strategy.top) break;
      if (tok == kPad || tok == kBos || !available(tok)) continue;
      push(tok);
      ++taken;
    }
  }
  if (c.tokens.empty()) throw InputError("empty candidate set at step " + std::to_string(t));
  return c;
}

TokenSeq complete_rollout(const DecoderContext& ctx, RolloutState state, DecoderState decoder,
                          TokenSeq pending, PolicySchedule schedule, const ExpansionConfig& cfg,
                          const TokenSeq& gt, Rng& rng) {
  Eigen::VectorXd logits;
  while (!state.finished() && state.prefix().size() < cfg.max_length) {
    if (state.word_ordering() && state.remaining().empty()) break;
    if (schedule.next_step(rng) == Choice::Reference) {
      const TokenId tok = reference_step(cfg.reference, state, gt);
      if (tok != kEos) pending.push_back(tok);
      continue;
    }
    for (TokenId p : pending) {
      StepOutput out = decode_step(*ctx.params, decoder, p, *ctx.memory);
      decoder = std::move(out.state);
      logits = std::move(out.logits);
    }
    if (pending.empty()) throw ContractError("rollout decoder has no logits for the next position");
    pending.clear();
    const TokenId tok = argmax_token(policy_logits(logits, state));
    state.emit(tok, gt);
    if (tok != kEos) pending.push_back(tok);
  }
  return state.prefix();
}

double completion_cost(MetricKind metric, const TokenSeq& completion, const TokenSeq& gt,
                       const MeteorParams& meteor) {
  if (metric == MetricKind::KendallTau) {
    if (!is_multiset_permutation(completion, gt))
      throw InputError("kendall-tau costs need completions that permute the ground truth");
    return kendall_tau_distance(completion, gt);
  }
  if (completion.empty()) return 1.0;
  return 1.0 - sentence_metric(metric, completion, gt, meteor);
}

namespace {

double candidate_cost(const DecoderContext& ctx, const RolloutState& state, const DecoderState& decoder,
                      TokenId cand, const ExpansionConfig& cfg, const TokenSeq& gt, std::uint64_t seed) {
  // A candidate equal to the reference choice takes the reference's alignment.
  RolloutState next = state;
  TokenId ref_tok = kPad;
  if (!state.finished()) ref_tok = reference_step(cfg.reference, next, gt);
  if (cand != ref_tok) {
    next = state;
    next.emit(cand, gt);
  }
  if (cand == kEos) return completion_cost(cfg.metric, next.prefix(), gt, cfg.meteor);
  Rng rng(seed);
  PolicySchedule schedule(cfg.rollout);
  schedule.begin_sequence(rng);
  const TokenSeq completion = complete_rollout(ctx, std::move(next), decoder, TokenSeq{cand}, schedule, cfg, gt, rng);
  return completion_cost(cfg.metric, completion, gt, cfg.meteor);
}

CostVector init_costs(const CandidateSet& cands) {
  CostVector cv;
  cv.step = cands.step;
  cv.tokens = cands.tokens;
  cv.costs.assign(cands.tokens.size(), 0.0);
  return cv;
}

}  // namespace

CostVector expand_costs_serial(const DecoderContext& ctx, const RolloutState& state,
                               const DecoderState& decoder, const CandidateSet& cands,
                               const ExpansionConfig& cfg, const TokenSeq& gt, Rng& rng) {
  const std::uint64_t seed = rng();
  CostVector cv = init_costs(cands);
  for (std::size_t i = 0; i < cands.tokens.size(); ++i)
    cv.costs[i] = candidate_cost(ctx, state, decoder, cands.tokens[i], cfg, gt, seed);
  return cv;
}

CostVector expand_costs(const DecoderContext& ctx, const RolloutState& state, const DecoderState& decoder,
                        const CandidateSet& cands, const ExpansionConfig& cfg, const TokenSeq& gt,
                        Rng& rng) {
  const std::uint64_t seed = rng();
  CostVector cv = init_costs(cands);
  const auto n = static_cast<std::ptrdiff_t>(cands.tokens.size());
  std::vector<std::exception_ptr> errors(cands.tokens.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      cv.costs[i] = candidate_cost(ctx, state, decoder, cands.tokens[i], cfg, gt, seed);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return cv;
}

}  // namespace l2s
