#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "l2s/corpus.hpp"
#include "l2s/model.hpp"

namespace l2s {

struct CheckGroup {
  std::string name;
  std::size_t cases = 0;
  std::size_t failures = 0;
  std::string first_failure;

  bool passed() const { return failures == 0; }
};

struct PolicyVerifyConfig {
  int min_n = 2;
  int exhaustive_max_n = 5;  // every prefix of every ordering up to this length
  int max_n = 7;             // random prefixes above exhaustive_max_n
  std::size_t random_prefixes = 1000;
  // Ground truths with repeated tokens, drawn over a 3-token alphabet.
  std::size_t duplicate_cases = 1000;
};

// Compares kt_reference_complete against exhaustive search over completions.
std::vector<CheckGroup> verify_kendall_reference(const PolicyVerifyConfig& cfg, Rng& rng);

struct GradCheckResult {
  std::string name;
  std::size_t instances = 0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;

  bool passed() const { return max_rel_error <= tolerance; }
};

// Step losses (mle, kl, ordering_kl, listmle) against central differences.
std::vector<GradCheckResult> grad_check_losses(std::size_t instances, Rng& rng, double tolerance = 1e-6);

// Full encoder-decoder MLE gradient on a small random model, checked on
// `coords` random coordinates per instance.
GradCheckResult grad_check_model(const ModelConfig& base, std::size_t instances, std::size_t coords, Rng& rng,
                                 double tolerance = 1e-4);

}  // namespace l2s
