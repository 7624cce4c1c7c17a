#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "l2s/corpus.hpp"

namespace l2s {

// One-based bijection on [1..n]; the ground truth is the identity.
struct Permutation {
  std::vector<int> sigma;

  std::size_t size() const noexcept { return sigma.size(); }
  bool valid() const;
};

// Zero-based positions.
struct AlignedPair {
  int hyp;
  int ref;
  friend bool operator==(const AlignedPair&, const AlignedPair&) = default;
};

struct Alignment {
  std::vector<AlignedPair> pairs;  // sorted by hyp position
  std::vector<bool> covered_hyp;
  std::vector<bool> covered_ref;

  std::size_t matches() const noexcept { return pairs.size(); }
};

struct MeteorParams {
  double alpha = 0.5;  // precision/recall balance
  double beta = 2.0;   // fragmentation exponent
  double gamma = 0.5;  // fragmentation weight

  void validate() const;
};

enum class MetricKind { SmoothedBleu4, Bleu1, KendallTau, SMeteor };

std::string_view metric_name(MetricKind kind);
MetricKind parse_metric(std::string_view name);
// KendallTau is a distance; the others are similarities.
constexpr bool is_distance(MetricKind kind) { return kind == MetricKind::KendallTau; }

// Add-one smoothing on n-gram precisions for n >= 2, brevity penalty
// exp(min(0, 1 - |ref|/|hyp|)).
double bleu_smoothed(std::span<const TokenId> hyp, std::span<const TokenId> ref, int max_n = 4);
double bleu1(std::span<const TokenId> hyp, std::span<const TokenId> ref);

std::int64_t count_inversions(std::span<const int> values);
double kendall_tau(const Permutation& p);

// Maps each hyp token to the ref position holding the same token, duplicates
// matched leftmost-unused first.
Permutation as_permutation(std::span<const TokenId> hyp, std::span<const TokenId> ref);

// kendall_tau(as_permutation(hyp, ref)); defined as 0 when n < 2.
double kendall_tau_distance(std::span<const TokenId> hyp, std::span<const TokenId> ref);

// Sequences up to this length get an exact minimum-chunk search.
inline constexpr std::size_t kExactAlignmentMaxLength = 64;

// Maximum-coverage exact-match alignment with the fewest chunks. Falls back to
// greedy longest-common-run matching beyond kExactAlignmentMaxLength or when
// the exact search exceeds its state budget.
Alignment align_exact_min_chunks(std::span<const TokenId> hyp, std::span<const TokenId> ref);
Alignment align_greedy_longest_run(std::span<const TokenId> hyp, std::span<const TokenId> ref);
Alignment make_alignment(std::vector<AlignedPair> pairs, std::size_t hyp_len, std::size_t ref_len);

int chunk_count(const Alignment& a);

double smeteor(std::span<const TokenId> hyp, std::span<const TokenId> ref,
               const MeteorParams& params = {});

// Sentence-level value in [0,1]: similarity, or distance for KendallTau.
double sentence_metric(MetricKind kind, std::span<const TokenId> hyp, std::span<const TokenId> ref,
                       const MeteorParams& params = {});

// Mean sentence-level value x100.
double corpus_eval(std::span<const TokenSeq> hyps, std::span<const TokenSeq> refs, MetricKind kind,
                   const MeteorParams& params = {});

}  // namespace l2s
