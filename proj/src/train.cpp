#include "l2s/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>

#include "l2s/error.hpp"

namespace l2s {

ExpansionConfig TrainConfig::expansion() const { return {rollout, reference, metric, meteor, max_length}; }

void TrainConfig::validate() const {
  if (max_length == 0) throw InputError("max_length must be positive");
  if (batch_size == 0) throw InputError("batch_size must be positive");
  if (max_iterations < 0 || mle_pretrain_iterations < 0) throw InputError("iteration counts must be >= 0");
  if (eval_every < 0) throw InputError("eval_every must be >= 0");
  l2s::validate(loss);
  sampling.validate();
  meteor.validate();
  if (!word_ordering()) {
    if (metric == MetricKind::KendallTau) throw InputError("kendall_tau costs require the word ordering task");
    if (reference == ReferenceKind::KendallTauAlign)
      throw InputError("the kendall_tau reference policy requires the word ordering task");
    if (std::find(eval_metrics.begin(), eval_metrics.end(), MetricKind::KendallTau) != eval_metrics.end())
      throw InputError("kendall_tau evaluation requires the word ordering task");
  } else if (reference == ReferenceKind::BleuSuffix) {
    throw InputError("the bleu_suffix reference policy does not produce permutations");
  }
}

nlohmann::json to_json(const IterationRecord& r) {
  return {{"type", "iteration"}, {"iteration", r.iteration}, {"loss", r.loss}, {"steps", r.steps},
          {"wall_seconds", r.wall_seconds}};
}

nlohmann::json to_json(const EvalRecord& r) {
  return {{"type", "eval"}, {"iteration", r.iteration}, {"split", split_name(r.split)},
          {"metric", metric_name(r.metric)}, {"score", r.score}};
}

ExampleGradient mle_example(const Parameters& params, const Example& ex, const TrainConfig& cfg, Rng& rng) {
  const bool wo = cfg.word_ordering();
  ExampleGradient out;
  out.grads.assign(params.size(), 0.0);
  Tape tape(params, ex.source, &rng);
  TokenMultiset remaining(ex.source);
  std::vector<Eigen::VectorXd> dlogits;
  const std::size_t steps = wo ? ex.target.size() : ex.target.size() + 1;
  TokenId prev = kBos;
  for (std::size_t t = 0; t < steps; ++t) {
    const Eigen::VectorXd& logits = tape.step(prev);
    const TokenId target = t < ex.target.size() ? ex.target[t] : kEos;
    const Eigen::VectorXd scores = wo ? mask_unused(logits, remaining) : logits;
    const StepLossResult sl = mle_step_loss(std::span(scores.data(), scores.size()), target);
    dlogits.emplace_back(Eigen::Map<const Eigen::VectorXd>(sl.grad.data(), sl.grad.size()));
    out.loss_sum += sl.value;
    ++out.steps;
    if (wo) remaining.remove(target);
    prev = target;
  }
  backward(tape, dlogits, out.grads);
  out.rollin = ex.target;
  return out;
}

namespace {

std::vector<bool> choose_positions(std::size_t n, std::size_t keep, Rng& rng) {
  std::vector<bool> selected(n, keep == 0 || keep >= n);
  if (keep == 0 || keep >= n) return selected;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < keep; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
    selected[idx[i]] = true;
  }
  return selected;
}

}  // namespace

ExampleGradient searnn_example(const Parameters& params, const Example& ex, const TrainConfig& cfg, Rng& rng,
                               SearnnOptions options) {
  const bool wo = cfg.word_ordering();
  const TokenSeq& gt = ex.target;
  const ExpansionConfig ecfg = cfg.expansion();
  ExampleGradient out;
  if (options.backward) out.grads.assign(params.size(), 0.0);

  Tape tape(params, ex.source, &rng);
  RolloutState state(gt, wo ? &ex.source : nullptr);
  PolicySchedule schedule(cfg.rollin);
  schedule.begin_sequence(rng);
  const std::size_t horizon = wo ? gt.size() : std::max(gt.size() + 1, cfg.max_length);
  const std::vector<bool> selected = choose_positions(horizon, cfg.positions_per_example, rng);

  std::vector<Eigen::VectorXd> dlogits;
  TokenId prev = kBos;
  for (std::size_t t = 0;; ++t) {
    if (wo && state.remaining().empty()) break;
    if (!wo && (state.finished() || t >= cfg.max_length)) break;
    const Eigen::VectorXd& logits = tape.step(prev);
    const Eigen::VectorXd allowed = wo ? mask_unused(logits, state.remaining()) : logits;
    dlogits.emplace_back();

    if (t < selected.size() && selected[t]) {
      std::vector<double> probs;
      if (cfg.sampling.kind == SamplingStrategy::Kind::NeighborsPlusTop)
        probs = softmax(std::span(allowed.data(), allowed.size()));
      const CandidateSet cands = sample_candidates(cfg.sampling, gt, t, probs, state);
      if (cands.tokens.size() >= 2) {
        const DecoderContext ctx{&params, &tape.memory()};
        CostVector cv = cfg.parallel ? expand_costs(ctx, state, tape.state(), cands, ecfg, gt, rng)
                                     : expand_costs_serial(ctx, state, tape.state(), cands, ecfg, gt, rng);
        std::vector<double> scores(cv.tokens.size());
        for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = logits[cv.tokens[i]];
        const StepLossResult sl = cost_sensitive_step_loss(cfg.loss, cv.costs, scores);
        Eigen::VectorXd g = Eigen::VectorXd::Zero(logits.size());
        for (std::size_t i = 0; i < scores.size(); ++i) g[cv.tokens[i]] += sl.grad[i];
        dlogits.back() = std::move(g);
        out.loss_sum += sl.value;
        ++out.steps;
        if (options.keep_costs) out.costs.push_back(std::move(cv));
      }
    }

    TokenId tok;
    if (schedule.next_step(rng) == Choice::Reference) {
      tok = reference_step(cfg.reference, state, gt);
    } else {
      tok = argmax_token(allowed);
      state.emit(tok, gt);
    }
    if (tok == kEos) break;
    prev = tok;
  }
  if (options.backward && out.steps > 0) backward(tape, dlogits, out.grads);
  out.rollin = state.prefix();
  return out;
}

BatchGradient batch_gradient(const Parameters& params, std::span<const Example* const> batch,
                             const TrainConfig& cfg, bool searnn, long iteration, Execution exec) {
  TrainConfig local = cfg;
  if (exec == Execution::Serial) local.parallel = false;
  std::vector<ExampleGradient> results(batch.size());
  std::vector<std::exception_ptr> errors(batch.size());
  const auto run = [&](std::size_t i) {
    try {
      std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                        static_cast<std::uint32_t>(iteration), static_cast<std::uint32_t>(i)};
      Rng rng(seq);
      results[i] = searnn ? searnn_example(params, *batch[i], local, rng) : mle_example(params, *batch[i], local, rng);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (exec == Execution::Parallel) {
    const auto n = static_cast<std::ptrdiff_t>(batch.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) run(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < batch.size(); ++i) run(i);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  BatchGradient bg;
  bg.grads.assign(params.size(), 0.0);
  double loss_sum = 0.0;
  for (const auto& r : results) {
    bg.steps += r.steps;
    loss_sum += r.loss_sum;
    if (r.steps == 0) continue;
    for (std::size_t j = 0; j < bg.grads.size(); ++j) bg.grads[j] += r.grads[j];
  }
  if (bg.steps > 0) {
    const double inv = 1.0 / static_cast<double>(bg.steps);
    bg.loss = loss_sum * inv;
    for (double& g : bg.grads) g *= inv;
  }
  return bg;
}

namespace {

TrainResult train_impl(const Dataset& train, const ModelConfig& model, const TrainConfig& cfg,
                       const TrainHooks& hooks, bool searnn) {
  cfg.validate();
  model.validate();
  if (train.examples.empty()) throw InputError("training set is empty");
  if (searnn && std::holds_alternative<MleLoss>(cfg.loss))
    throw InputError("SeaRNN training needs a cost-sensitive loss");
  if (cfg.word_ordering())
    for (const auto& ex : train.examples)
      if (!is_multiset_permutation(ex.source, ex.target))
        throw InputError("word ordering example whose source does not permute its target");

  Rng rng(cfg.seed);
  TrainResult result{Parameters::random_uniform(model, rng), {}};
  Adam adam(result.params.size(), cfg.adam);
  std::vector<std::size_t> order(train.examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();

  const auto start = std::chrono::steady_clock::now();
  const long pretrain = searnn ? cfg.mle_pretrain_iterations : 0;
  const long total = cfg.max_iterations + pretrain;
  std::vector<const Example*> batch;
  for (long it = 1; it <= total; ++it) {
    batch.clear();
    while (batch.size() < cfg.batch_size) {
      if (cursor == order.size()) {
        for (std::size_t i = order.size() - 1; i > 0; --i) {
          std::uniform_int_distribution<std::size_t> pick(0, i);
          std::swap(order[i], order[pick(rng)]);
        }
        cursor = 0;
      }
      batch.push_back(&train.examples[order[cursor++]]);
    }
    const bool use_searnn = searnn && it > pretrain;
    const auto abort = [&](const std::string& why) {
      if (hooks.abort_checkpoint) save_checkpoint(*hooks.abort_checkpoint, result.params, "aborted");
      throw NumericError("iteration " + std::to_string(it) + ": " + why);
    };
    BatchGradient bg;
    try {
      bg = batch_gradient(result.params, batch, cfg, use_searnn, it,
                          cfg.parallel ? Execution::Parallel : Execution::Serial);
    } catch (const NumericError& e) {
      abort(e.what());
    }
    if (!std::isfinite(bg.loss)) abort("non-finite loss");
    if (bg.steps > 0) adam.step(result.params.values(), bg.grads);

    IterationRecord rec{it, bg.loss, bg.steps,
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
    result.log.iterations.push_back(rec);
    if (hooks.sink) hooks.sink(to_json(rec));

    if (cfg.eval_every > 0 && (it % cfg.eval_every == 0 || it == total) && !cfg.eval_metrics.empty()) {
      for (const Dataset* ds : {hooks.valid, hooks.test}) {
        if (ds == nullptr) continue;
        const EvalReport report = evaluate(result.params, *ds, cfg.eval_metrics, cfg);
        for (const auto& [metric, score] : report.scores) {
          EvalRecord er{it, ds->split, metric, score};
          result.log.evals.push_back(er);
          if (hooks.sink) hooks.sink(to_json(er));
        }
      }
    }
  }
  return result;
}

}  // namespace

TrainResult train_mle(const Dataset& train, const ModelConfig& model, const TrainConfig& cfg,
                      const TrainHooks& hooks) {
  return train_impl(train, model, cfg, hooks, false);
}

TrainResult train_searnn(const Dataset& train, const ModelConfig& model, const TrainConfig& cfg,
                         const TrainHooks& hooks) {
  return train_impl(train, model, cfg, hooks, true);
}

std::optional<double> EvalReport::score(MetricKind kind) const {
  for (const auto& [k, v] : scores)
    if (k == kind) return v;
  return std::nullopt;
}

EvalReport evaluate(const Parameters& params, const Dataset& dataset, std::span<const MetricKind> metrics,
                    const TrainConfig& cfg) {
  EvalReport report;
  if (metrics.empty()) return report;
  const auto n = static_cast<std::ptrdiff_t>(dataset.examples.size());
  report.hypotheses.resize(dataset.examples.size());
  std::vector<std::exception_ptr> errors(dataset.examples.size());
#pragma omp parallel for schedule(dynamic) if (cfg.parallel)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      report.hypotheses[i] =
          greedy_decode(params, dataset.examples[i].source, cfg.word_ordering(), cfg.max_length);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<TokenSeq> refs;
  refs.reserve(dataset.examples.size());
  for (const auto& ex : dataset.examples) refs.push_back(ex.target);
  for (MetricKind m : metrics) report.scores.emplace_back(m, corpus_eval(report.hypotheses, refs, m, cfg.meteor));
  return report;
}

std::vector<LoggedCosts> inspect_costs(const Parameters& params, const Dataset& dataset, const TrainConfig& cfg,
                                       std::size_t max_examples) {
  std::vector<LoggedCosts> out;
  const std::size_t n = std::min(max_examples, dataset.examples.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(i)};
    Rng rng(seq);
    ExampleGradient eg = searnn_example(params, dataset.examples[i], cfg, rng, {true, false});
    for (auto& cv : eg.costs) out.push_back({i, std::move(cv)});
  }
  return out;
}

std::optional<double> top1_cost_probability(const CostVector& cv, double scale_alpha) {
  if (cv.costs.empty()) return std::nullopt;
  const double lo = *std::min_element(cv.costs.begin(), cv.costs.end());
  if (std::count(cv.costs.begin(), cv.costs.end(), lo) > 1) return std::nullopt;
  const auto p = cost_softmax(cv.costs, scale_alpha);
  return *std::max_element(p.begin(), p.end());
}

std::vector<SweepPoint> scale_sweep(std::span<const LoggedCosts> logged, std::span<const double> scales) {
  std::vector<SweepPoint> out;
  for (double alpha : scales) {
    SweepPoint pt{alpha, 0.0, 0};
    double sum = 0.0;
    for (const auto& lc : logged) {
      if (const auto p = top1_cost_probability(lc.costs, alpha)) {
        sum += *p;
        ++pt.vectors;
      }
    }
    if (pt.vectors > 0) pt.mean_top1 = sum / static_cast<double>(pt.vectors);
    out.push_back(pt);
  }
  return out;
}

bool monotone_non_decreasing(std::span<const SweepPoint> sweep) {
  for (std::size_t i = 1; i < sweep.size(); ++i)
    if (sweep[i].mean_top1 < sweep[i - 1].mean_top1) return false;
  return true;
}

}  // namespace l2s
