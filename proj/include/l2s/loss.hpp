#pragma once

#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "l2s/corpus.hpp"

namespace l2s {

struct MleLoss {};
struct KlLoss {
  double scale_alpha = 100.0;  // inverse temperature of the cost softmax
};
struct OrderingKlLoss {
  double q = 0.9;  // stick-breaking parameter, (0.5, 1]
};
struct ListMleLoss {
  int top_k = 1;
};

// Each loss kind carries exactly its own parameter.
using LossConfig = std::variant<MleLoss, KlLoss, OrderingKlLoss, ListMleLoss>;

std::string_view loss_name(const LossConfig& cfg);
void validate(const LossConfig& cfg);

struct StepLossResult {
  double value = 0.0;
  std::vector<double> grad;  // d value / d scores
};

// Log-arguments are clamped here so one-hot targets stay finite.
inline constexpr double kLogFloor = 1e-30;

std::vector<double> softmax(std::span<const double> scores);
std::vector<double> log_softmax(std::span<const double> scores);

// -log softmax(logits)[target]. Entries of -inf (masked tokens) are allowed.
StepLossResult mle_step_loss(std::span<const double> logits, TokenId target);

// exp(-alpha * cost) normalised over the candidates.
std::vector<double> cost_softmax(std::span<const double> costs, double scale_alpha);

// Cross-entropy of softmax(scores) against `target`; grad = p_model - target.
StepLossResult cross_entropy_to_target(std::span<const double> scores, std::span<const double> target);

StepLossResult kl_step_loss(std::span<const double> costs, std::span<const double> scores,
                            double scale_alpha);

// Candidate indices by non-decreasing cost, ties by index.
std::vector<std::size_t> cost_order(std::span<const double> costs);

// q(1-q)^(i-1) for rank i < k, (1-q)^(k-1) for the last rank.
std::vector<double> ordering_kl_target(std::span<const double> costs, double q);
StepLossResult ordering_kl_step_loss(std::span<const double> costs, std::span<const double> scores,
                                     double q);

// Plackett-Luce negative log-likelihood of the top_k prefix of the cost order.
StepLossResult listmle_topk_step_loss(std::span<const double> costs, std::span<const double> scores,
                                      int top_k);

// Dispatch for the cost-sensitive kinds; MleLoss is rejected.
StepLossResult cost_sensitive_step_loss(const LossConfig& cfg, std::span<const double> costs,
                                        std::span<const double> scores);

struct BatchLossResult {
  double value = 0.0;
  std::vector<std::vector<double>> grads;  // per step, already divided by the step count
};

BatchLossResult batch_loss(std::span<const StepLossResult> steps);

}  // namespace l2s
