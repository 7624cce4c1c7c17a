#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "l2s/corpus.hpp"
#include "l2s/metrics.hpp"

namespace l2s::oracle {

struct OracleBudget {
  std::uint64_t max_enumeration = 10'000'000;
};

struct Completion {
  TokenSeq sequence;
  double cost = 0.0;
  std::uint64_t enumerated = 0;
};

// Exhaustive minimum-cost completion of `prefix`. Kendall-tau enumerates every
// ordering of the ground-truth tokens not yet in the prefix; the similarity
// metrics also try every sub-multiset of them. The first minimiser in
// lexicographic enumeration order is returned.
Completion best_completion_bruteforce(const TokenSeq& prefix, const TokenSeq& ref, MetricKind metric,
                                      const OracleBudget& budget = {}, const MeteorParams& meteor = {});

// Minimum chunk count over every maximum-coverage exact-match alignment,
// enumerated without memoisation. Both lengths must be <= 8.
int min_chunks_bruteforce(const TokenSeq& hyp, const TokenSeq& ref);

// Kendall-tau distance minimised over every assignment of duplicate tokens to
// reference positions.
double min_kendall_over_assignments(const TokenSeq& hyp, const TokenSeq& ref);

// Inversion count by enumerating all pairs.
std::int64_t inversions_by_pairs(std::span<const int> sigma);

using ScalarFunction = std::function<double(std::span<const double>)>;

std::vector<double> finite_diff_grad(const ScalarFunction& f, std::span<const double> point,
                                     double eps = 1e-5);
// Central difference along the given coordinates only.
std::vector<double> finite_diff_grad(const ScalarFunction& f, std::span<const double> point,
                                     std::span<const std::size_t> coords, double eps = 1e-5);

// |a - b| / max(|a|, |b|, floor).
double relative_error(double a, double b, double floor = 1e-8);
double max_relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-8);

}  // namespace l2s::oracle
