#include "l2s/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "l2s/error.hpp"

namespace l2s::oracle {

namespace {

double factorial(std::size_t n) {
  double f = 1.0;
  for (std::size_t i = 2; i <= n; ++i) f *= static_cast<double>(i);
  return f;
}

}  // namespace

Completion best_completion_bruteforce(const TokenSeq& prefix, const TokenSeq& ref, MetricKind metric,
                                      const OracleBudget& budget, const MeteorParams& meteor) {
  TokenMultiset rest(ref);
  for (TokenId t : prefix) {
    if (rest.count(t) == 0) {
      if (metric == MetricKind::KendallTau) throw InputError("prefix is not a sub-multiset of the reference");
      continue;
    }
    rest.remove(t);
  }
  TokenSeq pool;
  for (TokenId t : rest.distinct())
    for (int i = 0; i < rest.count(t); ++i) pool.push_back(t);

  const double bound = metric == MetricKind::KendallTau ? factorial(pool.size())
                                                         : std::exp2(static_cast<double>(pool.size())) *
                                                               factorial(pool.size());
  if (bound > static_cast<double>(budget.max_enumeration))
    throw BudgetError("completion enumeration exceeds budget (" + std::to_string(pool.size()) +
                      " remaining tokens)");

  const auto cost_of = [&](const TokenSeq& seq) {
    if (metric == MetricKind::KendallTau) return kendall_tau_distance(seq, ref);
    if (seq.empty()) return 1.0;
    return 1.0 - sentence_metric(metric, seq, ref, meteor);
  };

  Completion best{{}, std::numeric_limits<double>::infinity(), 0};
  const auto try_all_orders = [&](TokenSeq subset) {
    std::sort(subset.begin(), subset.end());
    do {
      TokenSeq seq = prefix;
      seq.insert(seq.end(), subset.begin(), subset.end());
      const double c = cost_of(seq);
      ++best.enumerated;
      if (c < best.cost) {
        best.cost = c;
        best.sequence = std::move(seq);
      }
    } while (std::next_permutation(subset.begin(), subset.end()));
  };

  if (metric == MetricKind::KendallTau) {
    try_all_orders(pool);
  } else {
    const std::size_t n = pool.size();
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
      TokenSeq subset;
      for (std::size_t i = 0; i < n; ++i)
        if (mask >> i & 1) subset.push_back(pool[i]);
      try_all_orders(std::move(subset));
    }
  }
  return best;
}

namespace {

void enumerate_alignments(const TokenSeq& hyp, const TokenSeq& ref, std::size_t i,
                          std::vector<AlignedPair>& pairs, std::vector<bool>& used,
                          std::size_t target, int& best) {
  if (i == hyp.size()) {
    if (pairs.size() == target)
      best = std::min(best, chunk_count(make_alignment(pairs, hyp.size(), ref.size())));
    return;
  }
  enumerate_alignments(hyp, ref, i + 1, pairs, used, target, best);
  for (std::size_t j = 0; j < ref.size(); ++j) {
    if (used[j] || ref[j] != hyp[i]) continue;
    used[j] = true;
    pairs.push_back({static_cast<int>(i), static_cast<int>(j)});
    enumerate_alignments(hyp, ref, i + 1, pairs, used, target, best);
    pairs.pop_back();
    used[j] = false;
  }
}

}  // namespace

int min_chunks_bruteforce(const TokenSeq& hyp, const TokenSeq& ref) {
  if (hyp.size() > 8 || ref.size() > 8) throw BudgetError("min_chunks_bruteforce is limited to length 8");
  TokenMultiset h(hyp), r(ref);
  std::size_t target = 0;
  for (TokenId t : h.distinct()) target += static_cast<std::size_t>(std::min(h.count(t), r.count(t)));
  std::vector<AlignedPair> pairs;
  std::vector<bool> used(ref.size(), false);
  int best = std::numeric_limits<int>::max();
  enumerate_alignments(hyp, ref, 0, pairs, used, target, best);
  return best;
}

std::int64_t inversions_by_pairs(std::span<const int> sigma) {
  std::int64_t inv = 0;
  for (std::size_t i = 0; i < sigma.size(); ++i)
    for (std::size_t j = i + 1; j < sigma.size(); ++j)
      if (sigma[i] > sigma[j]) ++inv;
  return inv;
}

namespace {

void assign_positions(const TokenSeq& hyp, const TokenSeq& ref, std::size_t i, std::vector<int>& sigma,
                      std::vector<bool>& used, std::int64_t& best) {
  if (i == hyp.size()) {
    best = std::min(best, inversions_by_pairs(sigma));
    return;
  }
  for (std::size_t j = 0; j < ref.size(); ++j) {
    if (used[j] || ref[j] != hyp[i]) continue;
    used[j] = true;
    sigma.push_back(static_cast<int>(j) + 1);
    assign_positions(hyp, ref, i + 1, sigma, used, best);
    sigma.pop_back();
    used[j] = false;
  }
}

}  // namespace

double min_kendall_over_assignments(const TokenSeq& hyp, const TokenSeq& ref) {
  if (!is_multiset_permutation(hyp, ref)) throw InputError("hypothesis is not a permutation of the reference");
  const auto n = static_cast<double>(hyp.size());
  if (hyp.size() < 2) return 0.0;
  std::vector<int> sigma;
  std::vector<bool> used(ref.size(), false);
  std::int64_t best = std::numeric_limits<std::int64_t>::max();
  assign_positions(hyp, ref, 0, sigma, used, best);
  return 2.0 * static_cast<double>(best) / (n * (n - 1.0));
}

std::vector<double> finite_diff_grad(const ScalarFunction& f, std::span<const double> point,
                                     std::span<const std::size_t> coords, double eps) {
  std::vector<double> x(point.begin(), point.end());
  std::vector<double> g;
  g.reserve(coords.size());
  for (std::size_t c : coords) {
    const double orig = x[c];
    x[c] = orig + eps;
    const double up = f(x);
    x[c] = orig - eps;
    const double down = f(x);
    x[c] = orig;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NumericError("non-finite function value at coordinate " + std::to_string(c));
    g.push_back((up - down) / (2.0 * eps));
  }
  return g;
}

std::vector<double> finite_diff_grad(const ScalarFunction& f, std::span<const double> point, double eps) {
  std::vector<std::size_t> coords(point.size());
  for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
  return finite_diff_grad(f, point, coords, eps);
}

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

double max_relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  if (a.size() != b.size()) throw ContractError("max_relative_error: size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, relative_error(a[i], b[i], floor));
  return worst;
}

}  // namespace l2s::oracle
