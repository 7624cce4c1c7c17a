#include "l2s/policy.hpp"

#include <string>

#include "l2s/error.hpp"
#include "l2s/metrics.hpp"

namespace l2s {

std::string_view reference_name(ReferenceKind kind) {
  switch (kind) {
    case ReferenceKind::BleuSuffix: return "bleu_suffix";
    case ReferenceKind::KendallTauAlign: return "kendall_tau";
    case ReferenceKind::MeteorChunk: return "meteor";
  }
  return "?";
}

ReferenceKind parse_reference(std::string_view name) {
  if (name == "bleu_suffix" || name == "bleu") return ReferenceKind::BleuSuffix;
  if (name == "kendall_tau" || name == "alignment") return ReferenceKind::KendallTauAlign;
  if (name == "meteor" || name == "meteor_chunk") return ReferenceKind::MeteorChunk;
  throw InputError("unknown reference policy '" + std::string(name) + "'");
}

PolicyKind PolicyKind::mixed(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("mixing probability must lie in [0,1]");
  return {Mode::Mixed, p};
}

PolicyKind PolicyKind::mixed_cells(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("mixing probability must lie in [0,1]");
  return {Mode::MixedCells, p};
}

std::string_view policy_name(PolicyKind::Mode mode) {
  switch (mode) {
    case PolicyKind::Mode::Reference: return "reference";
    case PolicyKind::Mode::Learned: return "learned";
    case PolicyKind::Mode::Mixed: return "mixed";
    case PolicyKind::Mode::MixedCells: return "mixed_cells";
  }
  return "?";
}

PolicyKind parse_policy(std::string_view name, double p) {
  if (name == "reference") return PolicyKind::reference();
  if (name == "learned") return PolicyKind::learned();
  if (name == "mixed") return PolicyKind::mixed(p);
  if (name == "mixed_cells" || name == "mixed-cells") return PolicyKind::mixed_cells(p);
  throw InputError("unknown policy '" + std::string(name) + "'");
}

RolloutState::RolloutState(const TokenSeq& ground_truth, const TokenSeq* word_ordering_source)
    : used_ref_(ground_truth.size(), false), word_ordering_(word_ordering_source != nullptr) {
  if (word_ordering_) {
    if (!is_multiset_permutation(*word_ordering_source, ground_truth))
      throw InputError("word ordering source is not a permutation of the target");
    remaining_ = TokenMultiset(*word_ordering_source);
  }
}

std::optional<int> RolloutState::smallest_unused() const {
  for (std::size_t j = 0; j < used_ref_.size(); ++j)
    if (!used_ref_[j]) return static_cast<int>(j);
  return std::nullopt;
}

void RolloutState::emit_at(TokenId token, int ref_pos, const TokenSeq& ref) {
  if (finished_) throw ContractError("emit after end of sequence");
  if (ref_pos < 0 || static_cast<std::size_t>(ref_pos) >= ref.size() || ref[ref_pos] != token ||
      used_ref_[ref_pos])
    throw ContractError("invalid alignment position " + std::to_string(ref_pos));
  if (word_ordering_) remaining_.remove(token);
  used_ref_[ref_pos] = true;
  chunk_cursor_ = ref_pos;
  prefix_.push_back(token);
  ++aligned_;
}

void RolloutState::emit(TokenId token, const TokenSeq& ref) {
  if (finished_) throw ContractError("emit after end of sequence");
  if (token == kEos) {
    if (word_ordering_ && !remaining_.empty())
      throw ContractError("end of sequence before every source token was emitted");
    finished_ = true;
    return;
  }
  for (std::size_t j = 0; j < ref.size(); ++j) {
    if (!used_ref_[j] && ref[j] == token) {
      emit_at(token, static_cast<int>(j), ref);
      return;
    }
  }
  if (word_ordering_) remaining_.remove(token);
  chunk_cursor_.reset();
  prefix_.push_back(token);
}

TokenId kt_reference_step(RolloutState& state, const TokenSeq& ref) {
  const auto j = state.smallest_unused();
  if (!j) {
    state.emit(kEos, ref);
    return kEos;
  }
  state.emit_at(ref[*j], *j, ref);
  return ref[*j];
}

TokenSeq kt_reference_complete(RolloutState state, const TokenSeq& ref) {
  while (!state.finished()) kt_reference_step(state, ref);
  return state.prefix();
}

TokenId meteor_reference_step(RolloutState& state, const TokenSeq& ref) {
  const auto& used = state.used_ref();
  std::optional<int> pos;
  if (state.prefix().empty() && !ref.empty() && !used[0]) {
    pos = 0;
  } else if (const auto c = state.chunk_cursor();
             c && static_cast<std::size_t>(*c + 1) < ref.size() && !used[*c + 1]) {
    pos = *c + 1;
  } else {
    pos = state.smallest_unused();
  }
  if (!pos) {
    state.emit(kEos, ref);
    return kEos;
  }
  state.emit_at(ref[*pos], *pos, ref);
  return ref[*pos];
}

namespace {

// Index i of the best suffix ref[i..]; ref.size() means the empty suffix.
std::size_t best_bleu_suffix(std::span<const TokenId> prefix, const TokenSeq& ref) {
  std::size_t best = ref.size();
  double best_score = -1.0;
  TokenSeq candidate(prefix.begin(), prefix.end());
  for (std::size_t i = 0; i <= ref.size(); ++i) {
    candidate.resize(prefix.size());
    candidate.insert(candidate.end(), ref.begin() + static_cast<std::ptrdiff_t>(i), ref.end());
    if (candidate.empty()) continue;
    const double score = bleu1(candidate, ref);
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

}  // namespace

TokenSeq bleu_suffix_reference_complete(std::span<const TokenId> prefix, const TokenSeq& ref) {
  if (ref.empty()) throw InputError("bleu suffix policy needs a non-empty reference");
  const std::size_t i = best_bleu_suffix(prefix, ref);
  TokenSeq out(prefix.begin(), prefix.end());
  out.insert(out.end(), ref.begin() + static_cast<std::ptrdiff_t>(i), ref.end());
  return out;
}

TokenId bleu_suffix_reference_step(RolloutState& state, const TokenSeq& ref) {
  if (ref.empty()) throw InputError("bleu suffix policy needs a non-empty reference");
  const std::size_t i = best_bleu_suffix(state.prefix(), ref);
  if (i == ref.size()) {
    state.emit(kEos, ref);
    return kEos;
  }
  if (!state.used_ref()[i])
    state.emit_at(ref[i], static_cast<int>(i), ref);
  else
    state.emit(ref[i], ref);
  return ref[i];
}

TokenId reference_step(ReferenceKind kind, RolloutState& state, const TokenSeq& ref) {
  switch (kind) {
    case ReferenceKind::BleuSuffix: return bleu_suffix_reference_step(state, ref);
    case ReferenceKind::KendallTauAlign: return kt_reference_step(state, ref);
    case ReferenceKind::MeteorChunk: return meteor_reference_step(state, ref);
  }
  throw ContractError("unknown reference kind");
}

TokenId learned_step(std::span<const double> dist) {
  if (dist.empty()) throw ContractError("empty distribution");
  std::size_t best = 0;
  bool any = dist[0] != 0.0;
  for (std::size_t i = 1; i < dist.size(); ++i) {
    any = any || dist[i] != 0.0;
    if (dist[i] > dist[best]) best = i;
  }
  if (!any) throw ContractError("all-zero distribution");
  return static_cast<TokenId>(best);
}

Choice mix_decision(Rng& rng, PolicyKind kind, MixScope scope) {
  const bool ok = (kind.mode == PolicyKind::Mode::Mixed && scope == MixScope::Sequence) ||
                  (kind.mode == PolicyKind::Mode::MixedCells && scope == MixScope::Step);
  if (!ok) throw ContractError("mix scope does not match policy kind");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  return unit(rng) < kind.p ? Choice::Reference : Choice::Learned;
}

void PolicySchedule::begin_sequence(Rng& rng) {
  switch (kind_.mode) {
    case PolicyKind::Mode::Reference: sequence_choice_ = Choice::Reference; break;
    case PolicyKind::Mode::Learned: sequence_choice_ = Choice::Learned; break;
    case PolicyKind::Mode::Mixed: sequence_choice_ = mix_decision(rng, kind_, MixScope::Sequence); break;
    case PolicyKind::Mode::MixedCells: break;
  }
}

Choice PolicySchedule::next_step(Rng& rng) {
  if (kind_.mode == PolicyKind::Mode::MixedCells) return mix_decision(rng, kind_, MixScope::Step);
  return sequence_choice_;
}

bool PolicySchedule::reference_only() const {
  if (kind_.mode == PolicyKind::Mode::MixedCells) return kind_.p >= 1.0;
  return sequence_choice_ == Choice::Reference;
}

}  // namespace l2s
