#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <optional>
#include <span>
#include <vector>

#include "l2s/corpus.hpp"
#include "l2s/costexp.hpp"
#include "l2s/loss.hpp"
#include "l2s/metrics.hpp"
#include "l2s/model.hpp"
#include "l2s/policy.hpp"

namespace l2s {

enum class Task { WordOrdering, Generation };

struct TrainConfig {
  Task task = Task::WordOrdering;
  std::size_t max_length = 80;
  PolicyKind rollin = PolicyKind::mixed(0.5);
  PolicyKind rollout = PolicyKind::mixed(0.5);
  ReferenceKind reference = ReferenceKind::KendallTauAlign;
  MetricKind metric = MetricKind::KendallTau;
  LossConfig loss = KlLoss{};
  long max_iterations = 3000;
  std::size_t batch_size = 32;
  SamplingStrategy sampling = SamplingStrategy::all_remaining();
  std::uint64_t seed = 1;
  long eval_every = 0;
  std::vector<MetricKind> eval_metrics;
  MeteorParams meteor;
  AdamConfig adam;
  // Cost-expanded positions per example; 0 means every position.
  std::size_t positions_per_example = 0;
  // MLE iterations run before SeaRNN training.
  long mle_pretrain_iterations = 0;
  bool parallel = true;

  bool word_ordering() const { return task == Task::WordOrdering; }
  ExpansionConfig expansion() const;
  void validate() const;
};

struct IterationRecord {
  long iteration = 0;
  double loss = 0.0;
  std::size_t steps = 0;
  double wall_seconds = 0.0;
};

struct EvalRecord {
  long iteration = 0;
  Split split = Split::Valid;
  MetricKind metric = MetricKind::SmoothedBleu4;
  double score = 0.0;
};

struct TrainLog {
  std::vector<IterationRecord> iterations;
  std::vector<EvalRecord> evals;
};

nlohmann::json to_json(const IterationRecord& r);
nlohmann::json to_json(const EvalRecord& r);

struct TrainHooks {
  std::function<void(const nlohmann::json&)> sink;  // one record per line of log.jsonl
  const Dataset* valid = nullptr;
  const Dataset* test = nullptr;
  // Parameters are saved here before a non-finite loss aborts training.
  std::optional<std::filesystem::path> abort_checkpoint;
};

struct TrainResult {
  Parameters params;
  TrainLog log;
};

// Per-example contribution: summed step losses and summed gradients.
struct ExampleGradient {
  double loss_sum = 0.0;
  std::size_t steps = 0;
  std::vector<double> grads;
  TokenSeq rollin;
  std::vector<CostVector> costs;
};

struct BatchGradient {
  double loss = 0.0;  // mean over steps
  std::size_t steps = 0;
  std::vector<double> grads;  // mean over steps
};

enum class Execution { Serial, Parallel };

// Teacher-forced -log p(target) at every position (masked for word ordering).
ExampleGradient mle_example(const Parameters& params, const Example& ex, const TrainConfig& cfg, Rng& rng);

// Roll-in, candidate sampling, cost expansion and the configured step loss at
// every position. Gradients flow only through the candidates' step scores.
struct SearnnOptions {
  bool keep_costs = false;
  bool backward = true;
};
ExampleGradient searnn_example(const Parameters& params, const Example& ex, const TrainConfig& cfg, Rng& rng,
                               SearnnOptions options = {});

// Each example gets its own generator seeded from (seed, iteration, index), so
// both execution modes give bit-identical results.
BatchGradient batch_gradient(const Parameters& params, std::span<const Example* const> batch,
                             const TrainConfig& cfg, bool searnn, long iteration, Execution exec);

TrainResult train_mle(const Dataset& train, const ModelConfig& model, const TrainConfig& cfg,
                      const TrainHooks& hooks = {});
TrainResult train_searnn(const Dataset& train, const ModelConfig& model, const TrainConfig& cfg,
                         const TrainHooks& hooks = {});

struct EvalReport {
  std::vector<std::pair<MetricKind, double>> scores;  // x100
  std::vector<TokenSeq> hypotheses;

  std::optional<double> score(MetricKind kind) const;
};

EvalReport evaluate(const Parameters& params, const Dataset& dataset, std::span<const MetricKind> metrics,
                    const TrainConfig& cfg);

struct LoggedCosts {
  std::size_t example = 0;
  CostVector costs;
};

// Cost vectors produced by the training-time pipeline on the first
// `max_examples` examples.
std::vector<LoggedCosts> inspect_costs(const Parameters& params, const Dataset& dataset, const TrainConfig& cfg,
                                       std::size_t max_examples);

// Largest cost-softmax probability; nullopt when the minimum cost is tied.
std::optional<double> top1_cost_probability(const CostVector& cv, double scale_alpha);

struct SweepPoint {
  double scale_alpha = 0.0;
  double mean_top1 = 0.0;
  std::size_t vectors = 0;  // cost vectors with a unique minimum
};

std::vector<SweepPoint> scale_sweep(std::span<const LoggedCosts> logged, std::span<const double> scales);
bool monotone_non_decreasing(std::span<const SweepPoint> sweep);

}  // namespace l2s
