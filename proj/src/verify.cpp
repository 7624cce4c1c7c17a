#include "l2s/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "l2s/loss.hpp"
#include "l2s/metrics.hpp"
#include "l2s/oracle.hpp"
#include "l2s/policy.hpp"

namespace l2s {

namespace {

std::string seq_string(const TokenSeq& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

// One case: the reference completion of `prefix` must reach the brute-force
// minimum.
void check_case(CheckGroup& g, const TokenSeq& gt, const TokenSeq& prefix) {
  ++g.cases;
  RolloutState state(gt);
  for (TokenId tok : prefix) state.emit(tok, gt);
  const TokenSeq completed = kt_reference_complete(state, gt);
  const double got = kendall_tau_distance(completed, gt);
  const double best = oracle::best_completion_bruteforce(prefix, gt, MetricKind::KendallTau).cost;
  if (std::abs(got - best) > 1e-12) {
    if (g.failures++ == 0)
      g.first_failure = "gt=" + seq_string(gt) + " prefix=" + seq_string(prefix) + " got " + std::to_string(got) +
                        " best " + std::to_string(best);
  }
}

// Every ordered selection of ground-truth positions, as token prefixes.
void all_prefixes(const TokenSeq& gt, TokenSeq& prefix, std::vector<bool>& used, CheckGroup& g) {
  check_case(g, gt, prefix);
  for (std::size_t j = 0; j < gt.size(); ++j) {
    if (used[j]) continue;
    used[j] = true;
    prefix.push_back(gt[j]);
    all_prefixes(gt, prefix, used, g);
    prefix.pop_back();
    used[j] = false;
  }
}

TokenSeq random_prefix(const TokenSeq& gt, Rng& rng) {
  TokenSeq shuffled = gt;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  std::uniform_int_distribution<std::size_t> len(0, gt.size());
  shuffled.resize(len(rng));
  return shuffled;
}

TokenSeq distinct_gt(int n) {
  TokenSeq gt(static_cast<std::size_t>(n));
  std::iota(gt.begin(), gt.end(), kNumSpecials);
  return gt;
}

}  // namespace

std::vector<CheckGroup> verify_kendall_reference(const PolicyVerifyConfig& cfg, Rng& rng) {
  std::vector<CheckGroup> groups;
  for (int n = cfg.min_n; n <= cfg.max_n; ++n) {
    const TokenSeq gt = distinct_gt(n);
    if (n <= cfg.exhaustive_max_n) {
      CheckGroup g;
      g.name = "kendall_tau n=" + std::to_string(n) + " all prefixes";
      TokenSeq prefix;
      std::vector<bool> used(gt.size(), false);
      all_prefixes(gt, prefix, used, g);
      groups.push_back(std::move(g));
    } else {
      CheckGroup g;
      g.name = "kendall_tau n=" + std::to_string(n) + " random prefixes";
      for (std::size_t i = 0; i < cfg.random_prefixes; ++i) check_case(g, gt, random_prefix(gt, rng));
      groups.push_back(std::move(g));
    }
  }
  if (cfg.duplicate_cases > 0) {
    CheckGroup g;
    g.name = "kendall_tau repeated tokens";
    std::uniform_int_distribution<int> len(cfg.min_n, cfg.max_n);
    std::uniform_int_distribution<TokenId> tok(kNumSpecials, kNumSpecials + 2);
    for (std::size_t i = 0; i < cfg.duplicate_cases; ++i) {
      TokenSeq gt(static_cast<std::size_t>(len(rng)));
      for (auto& t : gt) t = tok(rng);
      check_case(g, gt, random_prefix(gt, rng));
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

namespace {

std::vector<double> normal_vector(std::size_t n, double sd, Rng& rng) {
  std::normal_distribution<double> d(0.0, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

std::vector<double> uniform_vector(std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

constexpr double kGradFloor = 1e-8;
// Loss values near 10 make roundoff dominate below this step.
constexpr double kModelStep = 1e-4;

}  // namespace

std::vector<GradCheckResult> grad_check_losses(std::size_t instances, Rng& rng, double tolerance) {
  std::vector<GradCheckResult> out = {
      {"mle", 0, 0.0, tolerance},
      {"kl", 0, 0.0, tolerance},
      {"ordering_kl", 0, 0.0, tolerance},
      {"listmle", 0, 0.0, tolerance},
  };
  std::uniform_int_distribution<std::size_t> kdist(2, 8);
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t k = kdist(rng);
    const auto scores = normal_vector(k, 2.0, rng);
    const auto costs = uniform_vector(k, rng);

    std::uniform_int_distribution<TokenId> target(0, static_cast<TokenId>(k) - 1);
    const TokenId tgt = target(rng);
    std::uniform_real_distribution<double> alpha(0.5, 20.0);
    std::uniform_real_distribution<double> qdist(0.55, 0.99);
    std::uniform_int_distribution<int> top(1, static_cast<int>(k));
    const LossConfig configs[] = {KlLoss{alpha(rng)}, OrderingKlLoss{qdist(rng)}, ListMleLoss{top(rng)}};

    const auto check = [&](GradCheckResult& r, const std::function<StepLossResult(std::span<const double>)>& f) {
      const auto analytic = f(scores).grad;
      const auto numeric = oracle::finite_diff_grad([&](std::span<const double> x) { return f(x).value; }, scores);
      r.max_rel_error = std::max(r.max_rel_error, oracle::max_relative_error(analytic, numeric, kGradFloor));
      ++r.instances;
    };
    check(out[0], [&](std::span<const double> x) { return mle_step_loss(x, tgt); });
    for (std::size_t c = 0; c < 3; ++c)
      check(out[c + 1], [&](std::span<const double> x) { return cost_sensitive_step_loss(configs[c], costs, x); });
  }
  return out;
}

namespace {

double model_loss(const Parameters& params, const TokenSeq& src, const TokenSeq& tgt,
                  std::vector<Eigen::VectorXd>* dlogits, Tape* tape_out) {
  Tape tape(params, src);
  double loss = 0.0;
  TokenId prev = kBos;
  for (std::size_t t = 0; t <= tgt.size(); ++t) {
    const Eigen::VectorXd& logits = tape.step(prev);
    const TokenId target = t < tgt.size() ? tgt[t] : kEos;
    const auto sl = mle_step_loss(std::span(logits.data(), logits.size()), target);
    loss += sl.value;
    if (dlogits) dlogits->emplace_back(Eigen::Map<const Eigen::VectorXd>(sl.grad.data(), sl.grad.size()));
    prev = target;
  }
  if (tape_out) *tape_out = std::move(tape);
  return loss;
}

}  // namespace

GradCheckResult grad_check_model(const ModelConfig& base, std::size_t instances, std::size_t coords, Rng& rng,
                                 double tolerance) {
  GradCheckResult r{"model", 0, 0.0, tolerance};
  ModelConfig cfg = base;
  cfg.dropout = 0.0;
  cfg.validate();
  std::uniform_int_distribution<std::size_t> len(1, 5);
  std::uniform_int_distribution<TokenId> tok(kNumSpecials, static_cast<TokenId>(cfg.vocab_size) - 1);
  for (std::size_t i = 0; i < instances; ++i) {
    Parameters params = Parameters::random_uniform(cfg, rng, 0.5);
    TokenSeq src(len(rng)), tgt(len(rng));
    for (auto& t : src) t = tok(rng);
    for (auto& t : tgt) t = tok(rng);

    std::vector<Eigen::VectorXd> dlogits;
    Tape tape(params, src);
    model_loss(params, src, tgt, &dlogits, &tape);
    const std::vector<double> analytic_full = backward(tape, dlogits);

    std::uniform_int_distribution<std::size_t> coord(0, params.size() - 1);
    std::vector<std::size_t> picked(coords);
    for (auto& c : picked) c = coord(rng);
    const auto f = [&](std::span<const double> x) {
      Parameters p = params;
      std::copy(x.begin(), x.end(), p.values().begin());
      return model_loss(p, src, tgt, nullptr, nullptr);
    };
    const auto numeric = oracle::finite_diff_grad(f, params.values(), picked, kModelStep);
    std::vector<double> analytic(picked.size());
    for (std::size_t j = 0; j < picked.size(); ++j) analytic[j] = analytic_full[picked[j]];
    r.max_rel_error = std::max(r.max_rel_error, oracle::max_relative_error(analytic, numeric, kGradFloor));
    ++r.instances;
  }
  return r;
}

}  // namespace l2s
