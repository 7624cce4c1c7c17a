#include "l2s/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "l2s/error.hpp"

namespace l2s {

std::string_view loss_name(const LossConfig& cfg) {
  struct Name {
    std::string_view operator()(const MleLoss&) const { return "mle"; }
    std::string_view operator()(const KlLoss&) const { return "kl"; }
    std::string_view operator()(const OrderingKlLoss&) const { return "ordering_kl"; }
    std::string_view operator()(const ListMleLoss&) const { return "listmle"; }
  };
  return std::visit(Name{}, cfg);
}

void validate(const LossConfig& cfg) {
  if (const auto* kl = std::get_if<KlLoss>(&cfg); kl && !(kl->scale_alpha > 0.0 && std::isfinite(kl->scale_alpha)))
    throw InputError("scale_alpha must be a positive finite number");
  if (const auto* o = std::get_if<OrderingKlLoss>(&cfg); o && !(o->q > 0.5 && o->q <= 1.0))
    throw InputError("q must lie in (0.5, 1]");
  if (const auto* l = std::get_if<ListMleLoss>(&cfg); l && l->top_k < 1)
    throw InputError("top_k must be a positive integer");
}

std::vector<double> log_softmax(std::span<const double> scores) {
  if (scores.empty()) throw ContractError("softmax of an empty vector");
  double mx = -std::numeric_limits<double>::infinity();
  for (double s : scores) {
    if (std::isnan(s) || s == std::numeric_limits<double>::infinity())
      throw NumericError("softmax input is NaN or +inf");
    mx = std::max(mx, s);
  }
  if (!std::isfinite(mx)) throw NumericError("softmax input has no finite entry");
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] - lse;
  return out;
}

std::vector<double> softmax(std::span<const double> scores) {
  auto out = log_softmax(scores);
  for (double& v : out) v = std::exp(v);
  return out;
}

StepLossResult mle_step_loss(std::span<const double> logits, TokenId target) {
  if (target < 0 || static_cast<std::size_t>(target) >= logits.size())
    throw ContractError("target token outside the logit vector");
  const auto logp = log_softmax(logits);
  StepLossResult r;
  r.value = -std::max(logp[target], std::log(kLogFloor));
  r.grad.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) r.grad[i] = std::exp(logp[i]);
  r.grad[target] -= 1.0;
  return r;
}

std::vector<double> cost_softmax(std::span<const double> costs, double scale_alpha) {
  std::vector<double> neg(costs.size());
  for (std::size_t i = 0; i < costs.size(); ++i) {
    if (!std::isfinite(costs[i])) throw NumericError("non-finite cost");
    neg[i] = -scale_alpha * costs[i];
  }
  return softmax(neg);
}

StepLossResult cross_entropy_to_target(std::span<const double> scores, std::span<const double> target) {
  if (scores.size() != target.size())
    throw ContractError("scores and target are not index-aligned");
  const auto logp = log_softmax(scores);
  const double floor = std::log(kLogFloor);
  StepLossResult r;
  r.grad.resize(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (target[i] != 0.0) r.value -= target[i] * std::max(logp[i], floor);
    r.grad[i] = std::exp(logp[i]) - target[i];
  }
  return r;
}

StepLossResult kl_step_loss(std::span<const double> costs, std::span<const double> scores,
                            double scale_alpha) {
  if (costs.size() != scores.size()) throw ContractError("costs and scores are not index-aligned");
  return cross_entropy_to_target(scores, cost_softmax(costs, scale_alpha));
}

std::vector<std::size_t> cost_order(std::span<const double> costs) {
  std::vector<std::size_t> order(costs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return costs[a] < costs[b]; });
  return order;
}

std::vector<double> ordering_kl_target(std::span<const double> costs, double q) {
  if (costs.size() < 2) throw ContractError("ordering target needs at least two candidates");
  if (!(q > 0.5 && q <= 1.0)) throw InputError("q must lie in (0.5, 1]");
  const auto order = cost_order(costs);
  std::vector<double> target(costs.size());
  double stick = 1.0;  // (1-q)^(rank)
  for (std::size_t rank = 0; rank + 1 < order.size(); ++rank) {
    target[order[rank]] = q * stick;
    stick *= 1.0 - q;
  }
  target[order.back()] = stick;
  return target;
}

StepLossResult ordering_kl_step_loss(std::span<const double> costs, std::span<const double> scores,
                                     double q) {
  if (costs.size() != scores.size()) throw ContractError("costs and scores are not index-aligned");
  return cross_entropy_to_target(scores, ordering_kl_target(costs, q));
}

StepLossResult listmle_topk_step_loss(std::span<const double> costs, std::span<const double> scores,
                                      int top_k) {
  if (costs.size() != scores.size()) throw ContractError("costs and scores are not index-aligned");
  if (top_k < 1 || static_cast<std::size_t>(top_k) > costs.size())
    throw InputError("top_k must lie in [1, number of candidates]");
  const auto order = cost_order(costs);
  const std::size_t k = order.size();
  StepLossResult r;
  r.grad.assign(k, 0.0);
  // Suffix log-sum-exp over the ranked scores, computed back to front.
  std::vector<double> ranked(k);
  for (std::size_t i = 0; i < k; ++i) ranked[i] = scores[order[i]];
  std::vector<double> suffix_lse(k);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = k; i-- > 0;) {
    if (!std::isfinite(ranked[i])) throw NumericError("non-finite score");
    mx = std::max(mx, ranked[i]);
    double sum = 0.0;
    for (std::size_t j = i; j < k; ++j) sum += std::exp(ranked[j] - mx);
    suffix_lse[i] = mx + std::log(sum);
  }
  for (std::size_t i = 0; i < static_cast<std::size_t>(top_k); ++i) {
    r.value += suffix_lse[i] - ranked[i];
    for (std::size_t j = i; j < k; ++j) r.grad[order[j]] += std::exp(ranked[j] - suffix_lse[i]);
    r.grad[order[i]] -= 1.0;
  }
  return r;
}

StepLossResult cost_sensitive_step_loss(const LossConfig& cfg, std::span<const double> costs,
                                        std::span<const double> scores) {
  if (const auto* kl = std::get_if<KlLoss>(&cfg)) return kl_step_loss(costs, scores, kl->scale_alpha);
  if (const auto* o = std::get_if<OrderingKlLoss>(&cfg)) return ordering_kl_step_loss(costs, scores, o->q);
  if (const auto* l = std::get_if<ListMleLoss>(&cfg))
    return listmle_topk_step_loss(costs, scores, std::min<int>(l->top_k, static_cast<int>(costs.size())));
  throw ContractError("MLE is not a cost-sensitive loss");
}

BatchLossResult batch_loss(std::span<const StepLossResult> steps) {
  if (steps.empty()) throw ContractError("batch_loss of an empty step list");
  const double inv = 1.0 / static_cast<double>(steps.size());
  BatchLossResult r;
  r.grads.reserve(steps.size());
  for (const auto& s : steps) {
    r.value += s.value * inv;
    auto g = s.grad;
    for (double& x : g) x *= inv;
    r.grads.push_back(std::move(g));
  }
  return r;
}

}  // namespace l2s
