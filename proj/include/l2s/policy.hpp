#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "l2s/corpus.hpp"

namespace l2s {

enum class ReferenceKind { BleuSuffix, KendallTauAlign, MeteorChunk };

std::string_view reference_name(ReferenceKind kind);
ReferenceKind parse_reference(std::string_view name);

struct PolicyKind {
  enum class Mode { Reference, Learned, Mixed, MixedCells };

  Mode mode = Mode::Reference;
  double p = 1.0;  // probability of the reference policy (Mixed, MixedCells)

  static PolicyKind reference() { return {Mode::Reference, 1.0}; }
  static PolicyKind learned() { return {Mode::Learned, 0.0}; }
  static PolicyKind mixed(double p);
  static PolicyKind mixed_cells(double p);

  bool mixing() const { return mode == Mode::Mixed || mode == Mode::MixedCells; }
};

std::string_view policy_name(PolicyKind::Mode mode);
PolicyKind parse_policy(std::string_view name, double p);

enum class Choice { Reference, Learned };
enum class MixScope { Sequence, Step };

// Ground-truth alignment state of a partially generated sequence.
//
// `used_ref[j]` marks ground-truth positions already aligned to some emitted
// token. `chunk_cursor` is the ground-truth position aligned to the most
// recently emitted token. `remaining` is only tracked for word ordering, where
// it holds the source tokens not yet emitted.
class RolloutState {
 public:
  RolloutState() = default;
  // Pass the source for word ordering; omit it for free generation.
  explicit RolloutState(const TokenSeq& ground_truth, const TokenSeq* word_ordering_source = nullptr);

  const TokenSeq& prefix() const noexcept { return prefix_; }
  const std::vector<bool>& used_ref() const noexcept { return used_ref_; }
  std::optional<int> chunk_cursor() const noexcept { return chunk_cursor_; }
  bool word_ordering() const noexcept { return word_ordering_; }
  const TokenMultiset& remaining() const noexcept { return remaining_; }
  int aligned() const noexcept { return aligned_; }
  bool finished() const noexcept { return finished_; }
  std::optional<int> smallest_unused() const;

  // Append a token aligned to ground-truth position `ref_pos`.
  void emit_at(TokenId token, int ref_pos, const TokenSeq& ref);
  // Append a token, aligning it to the smallest unused ground-truth position
  // holding the same token; when none exists the alignment is left unchanged
  // and the chunk cursor is cleared. EOS marks the state finished.
  void emit(TokenId token, const TokenSeq& ref);

 private:
  TokenSeq prefix_;
  std::vector<bool> used_ref_;
  std::optional<int> chunk_cursor_;
  TokenMultiset remaining_;
  bool word_ordering_ = false;
  bool finished_ = false;
  int aligned_ = 0;
};

// Reference steps update `state` and return the emitted token (kEos once every
// ground-truth position is used).
TokenId kt_reference_step(RolloutState& state, const TokenSeq& ref);
TokenSeq kt_reference_complete(RolloutState state, const TokenSeq& ref);
TokenId meteor_reference_step(RolloutState& state, const TokenSeq& ref);

// prefix + the ground-truth suffix maximising BLEU-1 (longest suffix on ties).
TokenSeq bleu_suffix_reference_complete(std::span<const TokenId> prefix, const TokenSeq& ref);
TokenId bleu_suffix_reference_step(RolloutState& state, const TokenSeq& ref);

TokenId reference_step(ReferenceKind kind, RolloutState& state, const TokenSeq& ref);

// Argmax over a probability (or score) vector, ties to the smallest id.
TokenId learned_step(std::span<const double> dist);

Choice mix_decision(Rng& rng, PolicyKind kind, MixScope scope);

// Per-sequence policy schedule: Mixed decides once in begin_sequence(),
// MixedCells decides at every step.
class PolicySchedule {
 public:
  explicit PolicySchedule(PolicyKind kind) : kind_(kind) {}

  void begin_sequence(Rng& rng);
  Choice next_step(Rng& rng);
  // True when no learned step can occur in the current sequence.
  bool reference_only() const;

 private:
  PolicyKind kind_;
  Choice sequence_choice_ = Choice::Reference;
};

}  // namespace l2s
