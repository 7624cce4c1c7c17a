#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "l2s/corpus.hpp"
#include "l2s/metrics.hpp"
#include "l2s/model.hpp"
#include "l2s/policy.hpp"

namespace l2s {

struct CandidateSet {
  std::size_t step = 0;
  std::vector<TokenId> tokens;
};

struct CostVector {
  std::size_t step = 0;
  std::vector<TokenId> tokens;
  std::vector<double> costs;
};

struct SamplingStrategy {
  enum class Kind { AllRemaining, NeighborsPlusTop };

  Kind kind = Kind::AllRemaining;
  int window = 5;  // ground-truth positions t-window .. t+window
  int top = 15;    // highest-probability model tokens

  static SamplingStrategy all_remaining() { return {}; }
  static SamplingStrategy neighbors_plus_top(int window = 5, int top = 15);
  void validate() const;
};

struct ExpansionConfig {
  PolicyKind rollout = PolicyKind::mixed(0.5);
  ReferenceKind reference = ReferenceKind::KendallTauAlign;
  MetricKind metric = MetricKind::KendallTau;
  MeteorParams meteor;
  std::size_t max_length = 80;
};

// Read-only model snapshot plus the encoded source of one example.
struct DecoderContext {
  const Parameters* params = nullptr;
  const Memory* memory = nullptr;
};

struct RollInResult {
  RolloutState state;
  DecoderState decoder;    // has consumed BOS and every prefix token
  Eigen::VectorXd logits;  // prediction for position t
  bool truncated = false;  // EOS was chosen before reaching t
};

// Builds a length-t prefix with `kind`, feeding every chosen token back into
// the decoder. Reference steps follow `reference`, which reproduces the ground
// truth for ground-truth prefixes.
RollInResult roll_in(const Parameters& params, const Example& example, PolicyKind kind, std::size_t t,
                     ReferenceKind reference, bool word_ordering, Rng& rng);

// `model_probs` is only read by NeighborsPlusTop. Under word ordering the
// candidates are restricted to tokens still available.
CandidateSet sample_candidates(const SamplingStrategy& strategy, const TokenSeq& gt, std::size_t t,
                               std::span<const double> model_probs, const RolloutState& state);

// Completes `state` with the roll-out policy. `decoder` has consumed every
// prefix token except `pending`, which is fed lazily (only when a learned step
// needs logits).
TokenSeq complete_rollout(const DecoderContext& ctx, RolloutState state, DecoderState decoder,
                          TokenSeq pending, PolicySchedule schedule, const ExpansionConfig& cfg,
                          const TokenSeq& gt, Rng& rng);

// Cost of a completed sequence: 1 - score for similarity metrics, the
// normalised distance for Kendall-tau.
double completion_cost(MetricKind metric, const TokenSeq& completion, const TokenSeq& gt,
                       const MeteorParams& meteor);

// Rolls out prefix+a for every candidate a. All candidates share one seed
// drawn from `rng` (common random numbers). `decoder` must have consumed the
// whole prefix. Candidates are evaluated in an OpenMP loop.
CostVector expand_costs(const DecoderContext& ctx, const RolloutState& state, const DecoderState& decoder,
                        const CandidateSet& cands, const ExpansionConfig& cfg, const TokenSeq& gt,
                        Rng& rng);

// Serial reference for expand_costs; bit-identical results.
CostVector expand_costs_serial(const DecoderContext& ctx, const RolloutState& state,
                               const DecoderState& decoder, const CandidateSet& cands,
                               const ExpansionConfig& cfg, const TokenSeq& gt, Rng& rng);

}  // namespace l2s
