#include "l2s/metrics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>

#include "l2s/error.hpp"

namespace l2s {

bool Permutation::valid() const {
  std::vector<bool> seen(sigma.size() + 1, false);
  for (int v : sigma) {
    if (v < 1 || static_cast<std::size_t>(v) > sigma.size() || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

void MeteorParams::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InputError("meteor alpha must lie in [0,1]");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw InputError("meteor beta must be >= 0");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw InputError("meteor gamma must lie in [0,1]");
}

std::string_view metric_name(MetricKind kind) {
  switch (kind) {
    case MetricKind::SmoothedBleu4: return "bleu";
    case MetricKind::Bleu1: return "bleu1";
    case MetricKind::KendallTau: return "kendall_tau";
    case MetricKind::SMeteor: return "smeteor";
  }
  return "?";
}

MetricKind parse_metric(std::string_view name) {
  if (name == "bleu" || name == "bleu4") return MetricKind::SmoothedBleu4;
  if (name == "bleu1") return MetricKind::Bleu1;
  if (name == "kendall_tau" || name == "kendall") return MetricKind::KendallTau;
  if (name == "smeteor" || name == "meteor") return MetricKind::SMeteor;
  throw InputError("unknown metric '" + std::string(name) + "'");
}

namespace {

// Clipped n-gram matches: sum over distinct n-grams of min(count_hyp, count_ref).
std::int64_t clipped_matches(std::span<const TokenId> hyp, std::span<const TokenId> ref, int n) {
  if (hyp.size() < static_cast<std::size_t>(n) || ref.size() < static_cast<std::size_t>(n)) return 0;
  const auto packable = [](std::span<const TokenId> s) {
    return std::all_of(s.begin(), s.end(), [](TokenId t) { return t >= 0 && t < (1 << 16); });
  };
  if (n <= 4 && packable(hyp) && packable(ref)) {
    const auto grams = [n](std::span<const TokenId> s) {
      std::vector<std::uint64_t> keys;
      keys.reserve(s.size() - n + 1);
      for (std::size_t i = 0; i + n <= s.size(); ++i) {
        std::uint64_t k = 0;
        for (int d = 0; d < n; ++d) k = (k << 16) | static_cast<std::uint64_t>(s[i + d]);
        keys.push_back(k);
      }
      std::sort(keys.begin(), keys.end());
      return keys;
    };
    const auto h = grams(hyp);
    const auto r = grams(ref);
    std::int64_t matches = 0;
    std::size_t i = 0, j = 0;
    while (i < h.size() && j < r.size()) {
      if (h[i] < r[j]) {
        ++i;
      } else if (r[j] < h[i]) {
        ++j;
      } else {
        ++matches;
        ++i;
        ++j;
      }
    }
    return matches;
  }
  std::map<std::vector<TokenId>, std::int64_t> counts;
  for (std::size_t i = 0; i + n <= ref.size(); ++i) ++counts[{ref.begin() + i, ref.begin() + i + n}];
  std::int64_t matches = 0;
  for (std::size_t i = 0; i + n <= hyp.size(); ++i) {
    auto it = counts.find({hyp.begin() + i, hyp.begin() + i + n});
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++matches;
    }
  }
  return matches;
}

double brevity_penalty(std::size_t hyp_len, std::size_t ref_len) {
  return std::exp(std::min(0.0, 1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len)));
}

}  // namespace

double bleu_smoothed(std::span<const TokenId> hyp, std::span<const TokenId> ref, int max_n) {
  if (hyp.empty() || ref.empty()) throw InputError("bleu needs non-empty sequences");
  if (max_n < 1) throw InputError("bleu max_n must be >= 1");
  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const auto matches = static_cast<double>(clipped_matches(hyp, ref, n));
    const double total = static_cast<double>(hyp.size() >= static_cast<std::size_t>(n) ? hyp.size() - n + 1 : 0);
    const double p = n == 1 ? matches / total : (matches + 1.0) / (total + 1.0);
    if (p <= 0.0) return 0.0;
    log_sum += std::log(p);
  }
  return brevity_penalty(hyp.size(), ref.size()) * std::exp(log_sum / max_n);
}

double bleu1(std::span<const TokenId> hyp, std::span<const TokenId> ref) {
  if (hyp.empty()) throw InputError("bleu1 needs a non-empty hypothesis");
  if (ref.empty()) return 0.0;
  const auto matches = static_cast<double>(clipped_matches(hyp, ref, 1));
  return brevity_penalty(hyp.size(), ref.size()) * matches / static_cast<double>(hyp.size());
}

std::int64_t count_inversions(std::span<const int> values) {
  std::vector<int> a(values.begin(), values.end());
  std::vector<int> buf(a.size());
  std::int64_t inv = 0;
  for (std::size_t width = 1; width < a.size(); width *= 2) {
    for (std::size_t lo = 0; lo < a.size(); lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, a.size());
      const std::size_t hi = std::min(lo + 2 * width, a.size());
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (a[j] < a[i]) {
          inv += static_cast<std::int64_t>(mid - i);
          buf[k++] = a[j++];
        } else {
          buf[k++] = a[i++];
        }
      }
      while (i < mid) buf[k++] = a[i++];
      while (j < hi) buf[k++] = a[j++];
    }
    a.swap(buf);
  }
  return inv;
}

double kendall_tau(const Permutation& p) {
  const auto n = static_cast<double>(p.size());
  if (p.size() < 2) throw InputError("kendall tau needs n >= 2");
  if (!p.valid()) throw InputError("not a permutation of [1..n]");
  return 2.0 * static_cast<double>(count_inversions(p.sigma)) / (n * (n - 1.0));
}

Permutation as_permutation(std::span<const TokenId> hyp, std::span<const TokenId> ref) {
  if (!is_multiset_permutation(hyp, ref))
    throw InputError("hypothesis is not a permutation of the reference");
  std::unordered_map<TokenId, std::deque<int>> positions;
  for (std::size_t j = 0; j < ref.size(); ++j) positions[ref[j]].push_back(static_cast<int>(j) + 1);
  Permutation p;
  p.sigma.reserve(hyp.size());
  for (TokenId t : hyp) {
    auto& q = positions[t];
    p.sigma.push_back(q.front());
    q.pop_front();
  }
  return p;
}

double kendall_tau_distance(std::span<const TokenId> hyp, std::span<const TokenId> ref) {
  const Permutation p = as_permutation(hyp, ref);
  return p.size() < 2 ? 0.0 : kendall_tau(p);
}

Alignment make_alignment(std::vector<AlignedPair> pairs, std::size_t hyp_len, std::size_t ref_len) {
  Alignment a;
  std::sort(pairs.begin(), pairs.end(), [](const auto& x, const auto& y) { return x.hyp < y.hyp; });
  a.pairs = std::move(pairs);
  a.covered_hyp.assign(hyp_len, false);
  a.covered_ref.assign(ref_len, false);
  for (const auto& p : a.pairs) {
    if (p.hyp < 0 || static_cast<std::size_t>(p.hyp) >= hyp_len || p.ref < 0 ||
        static_cast<std::size_t>(p.ref) >= ref_len)
      throw ContractError("alignment pair out of range");
    if (a.covered_hyp[p.hyp] || a.covered_ref[p.ref]) throw ContractError("alignment is not injective");
    a.covered_hyp[p.hyp] = true;
    a.covered_ref[p.ref] = true;
  }
  return a;
}

int chunk_count(const Alignment& a) {
  int chunks = 0;
  for (std::size_t i = 0; i < a.pairs.size(); ++i) {
    const bool continues = i > 0 && a.pairs[i].hyp == a.pairs[i - 1].hyp + 1 &&
                           a.pairs[i].ref == a.pairs[i - 1].ref + 1;
    if (!continues) ++chunks;
  }
  return chunks;
}

Alignment align_greedy_longest_run(std::span<const TokenId> hyp, std::span<const TokenId> ref) {
  std::vector<bool> used_h(hyp.size(), false), used_r(ref.size(), false);
  std::vector<AlignedPair> pairs;
  for (;;) {
    std::size_t best_len = 0, best_i = 0, best_j = 0;
    for (std::size_t i = 0; i < hyp.size(); ++i) {
      if (used_h[i]) continue;
      for (std::size_t j = 0; j < ref.size(); ++j) {
        std::size_t len = 0;
        while (i + len < hyp.size() && j + len < ref.size() && !used_h[i + len] && !used_r[j + len] &&
               hyp[i + len] == ref[j + len])
          ++len;
        if (len > best_len) {
          best_len = len;
          best_i = i;
          best_j = j;
        }
      }
    }
    if (best_len == 0) break;
    for (std::size_t d = 0; d < best_len; ++d) {
      used_h[best_i + d] = used_r[best_j + d] = true;
      pairs.push_back({static_cast<int>(best_i + d), static_cast<int>(best_j + d)});
    }
  }
  return make_alignment(std::move(pairs), hyp.size(), ref.size());
}

namespace {

// Memoised search over (hyp position, ref position aligned to the previous hyp
// token, used-ref mask). Every token type must be aligned exactly
// min(count_hyp, count_ref) times, which is what maximum coverage means under
// exact matching.
class MinChunkSearch {
 public:
  static constexpr std::size_t kStateBudget = 1'000'000;

  MinChunkSearch(std::span<const TokenId> hyp, std::span<const TokenId> ref) : hyp_(hyp), ref_(ref) {
    TokenMultiset ch(hyp), cr(ref);
    seen_before_.resize(hyp.size());
    candidates_.resize(hyp.size());
    std::unordered_map<TokenId, int> seen;
    for (std::size_t i = 0; i < hyp.size(); ++i) {
      const TokenId w = hyp[i];
      seen_before_[i] = seen[w]++;
      for (std::size_t j = 0; j < ref.size(); ++j)
        if (ref[j] == w) candidates_[i].push_back(static_cast<int>(j));
    }
    for (std::size_t j = 0; j < ref.size(); ++j) ref_mask_[ref[j]] |= std::uint64_t{1} << j;
    for (std::size_t i = 0; i < hyp.size(); ++i) {
      const TokenId w = hyp[i];
      quota_[w] = std::min(ch.count(w), cr.count(w));
      hyp_count_[w] = ch.count(w);
    }
  }

  // Returns false when the state budget was exhausted.
  bool run(Alignment& out) {
    try {
      solve(0, -1, 0);
    } catch (const BudgetError&) {
      return false;
    }
    std::vector<AlignedPair> pairs;
    int prev = -1;
    std::uint64_t mask = 0;
    for (std::size_t i = 0; i < hyp_.size(); ++i) {
      const int choice = memo_.at(key(i, prev, mask)).choice;
      if (choice >= 0) {
        pairs.push_back({static_cast<int>(i), choice});
        mask |= std::uint64_t{1} << choice;
      }
      prev = choice;
    }
    out = make_alignment(std::move(pairs), hyp_.size(), ref_.size());
    return true;
  }

 private:
  struct Entry {
    int value;
    int choice;  // aligned ref position, or -1 for unaligned
  };
  struct Key {
    std::uint64_t mask;
    std::uint32_t pos;
    friend bool operator==(const Key&, const Key&) = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      return std::hash<std::uint64_t>{}(k.mask * 0x9E3779B97F4A7C15ULL ^ k.pos);
    }
  };

  static Key key(std::size_t i, int prev, std::uint64_t mask) {
    return {mask, static_cast<std::uint32_t>(i) << 8 | static_cast<std::uint32_t>(prev + 1)};
  }

  int solve(std::size_t i, int prev, std::uint64_t mask) {
    if (i == hyp_.size()) return 0;
    const Key k = key(i, prev, mask);
    if (auto it = memo_.find(k); it != memo_.end()) return it->second.value;
    if (memo_.size() >= kStateBudget) throw BudgetError("chunk search state budget exhausted");

    const TokenId w = hyp_[i];
    const int used = std::popcount(mask & ref_mask_[w]);
    const int need = quota_[w] - used;
    const int remaining_hyp = hyp_count_[w] - seen_before_[i];
    Entry best{std::numeric_limits<int>::max(), -1};
    if (remaining_hyp - 1 >= need) best = {solve(i + 1, -1, mask), -1};
    if (need > 0) {
      for (int j : candidates_[i]) {
        const std::uint64_t bit = std::uint64_t{1} << j;
        if (mask & bit) continue;
        const int cost = (prev >= 0 && j == prev + 1) ? 0 : 1;
        if (cost >= best.value) continue;
        const int v = cost + solve(i + 1, j, mask | bit);
        if (v < best.value) best = {v, j};
      }
    }
    memo_.emplace(k, best);
    return best.value;
  }

  std::span<const TokenId> hyp_, ref_;
  std::vector<int> seen_before_;
  std::vector<std::vector<int>> candidates_;
  std::unordered_map<TokenId, std::uint64_t> ref_mask_;
  std::unordered_map<TokenId, int> quota_, hyp_count_;
  std::unordered_map<Key, Entry, KeyHash> memo_;
};

}  // namespace

Alignment align_exact_min_chunks(std::span<const TokenId> hyp, std::span<const TokenId> ref) {
  if (hyp.size() <= kExactAlignmentMaxLength && ref.size() <= kExactAlignmentMaxLength) {
    MinChunkSearch search(hyp, ref);
    Alignment a;
    if (search.run(a)) return a;
  }
  return align_greedy_longest_run(hyp, ref);
}

double smeteor(std::span<const TokenId> hyp, std::span<const TokenId> ref, const MeteorParams& params) {
  if (hyp.empty() || ref.empty()) throw InputError("smeteor needs non-empty sequences");
  const Alignment a = align_exact_min_chunks(hyp, ref);
  const auto m = static_cast<double>(a.matches());
  if (m == 0.0) return 0.0;
  const double p = m / static_cast<double>(hyp.size());
  const double r = m / static_cast<double>(ref.size());
  const double fmean = p * r / (params.alpha * p + (1.0 - params.alpha) * r);
  const double penalty = params.gamma * std::pow(chunk_count(a) / m, params.beta);
  return fmean * (1.0 - penalty);
}

double sentence_metric(MetricKind kind, std::span<const TokenId> hyp, std::span<const TokenId> ref,
                       const MeteorParams& params) {
  switch (kind) {
    case MetricKind::SmoothedBleu4: return bleu_smoothed(hyp, ref);
    case MetricKind::Bleu1: return bleu1(hyp, ref);
    case MetricKind::KendallTau: return kendall_tau_distance(hyp, ref);
    case MetricKind::SMeteor: return smeteor(hyp, ref, params);
  }
  throw ContractError("unknown metric");
}

double corpus_eval(std::span<const TokenSeq> hyps, std::span<const TokenSeq> refs, MetricKind kind,
                   const MeteorParams& params) {
  if (hyps.size() != refs.size())
    throw InputError("corpus_eval: " + std::to_string(hyps.size()) + " hypotheses vs " +
                     std::to_string(refs.size()) + " references");
  if (hyps.empty()) throw InputError("corpus_eval: empty corpus");
  double sum = 0.0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    // An empty hypothesis scores zero similarity.
    if (hyps[i].empty() && !is_distance(kind)) continue;
    sum += sentence_metric(kind, hyps[i], refs[i], params);
  }
  return 100.0 * sum / static_cast<double>(hyps.size());
}

}  // namespace l2s
