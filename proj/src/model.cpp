#include "l2s/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "l2s/error.hpp"

namespace l2s {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void ModelConfig::validate() const {
  if (vocab_size <= kNumSpecials) throw InputError("vocab_size must exceed the special tokens");
  if (embedding_dim <= 0 || hidden_dim <= 0 || layers <= 0)
    throw InputError("model dimensions must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw InputError("dropout must lie in [0,1)");
}

ParameterLayout ParameterLayout::build(const ModelConfig& cfg) {
  cfg.validate();
  ParameterLayout L;
  const auto add = [&L](const std::string& name, int rows, int cols) {
    Slice s{L.total, rows, cols};
    L.total += s.size();
    L.named.emplace_back(name, s);
    return s;
  };
  const auto gru = [&](const std::string& name, int input, int hidden) {
    GruSlices g;
    g.input = input;
    g.hidden = hidden;
    g.wx = add(name + ".wx", 3 * hidden, input);
    g.wh = add(name + ".wh", 3 * hidden, hidden);
    g.bx = add(name + ".bx", 3 * hidden, 1);
    g.bh = add(name + ".bh", 3 * hidden, 1);
    return g;
  };
  const int E = cfg.embedding_dim, H = cfg.hidden_dim, V = cfg.vocab_size, M = cfg.memory_dim();
  L.src_embedding = add("src_embedding", E, V);
  L.tgt_embedding = cfg.share_embeddings ? L.src_embedding : add("tgt_embedding", E, V);
  for (int l = 0; l < cfg.layers; ++l) {
    const int in = l == 0 ? E : M;
    const std::string p = "enc" + std::to_string(l);
    L.enc_fwd.push_back(gru(p + ".fwd", in, H));
    if (cfg.bidirectional_encoder) L.enc_bwd.push_back(gru(p + ".bwd", in, H));
  }
  for (int l = 0; l < cfg.layers; ++l) {
    L.dec.push_back(gru("dec" + std::to_string(l), l == 0 ? E + M : H, H));
    L.init_w.push_back(add("init" + std::to_string(l) + ".w", H, M));
    L.init_b.push_back(add("init" + std::to_string(l) + ".b", H, 1));
  }
  L.att_query = add("att.query", H, H);
  L.att_key = add("att.key", H, M);
  L.att_bias = add("att.bias", H, 1);
  L.att_v = add("att.v", H, 1);
  L.out_w = add("out.w", V, H + M);
  L.out_b = add("out.b", V, 1);
  return L;
}

Parameters::Parameters(const ModelConfig& cfg)
    : config_(cfg), layout_(std::make_shared<ParameterLayout>(ParameterLayout::build(cfg))) {
  values_.assign(layout_->total, 0.0);
}

Parameters Parameters::random_uniform(const ModelConfig& cfg, Rng& rng, double scale) {
  Parameters p(cfg);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double& v : p.values_) v = u(rng);
  return p;
}

namespace detail {

// Both go through Eigen's packet exp; std::tanh does not vectorise.
template <typename D>
Eigen::ArrayXXd sigmoid(const Eigen::ArrayBase<D>& x) {
  return (1.0 + (-x).exp()).inverse();
}

template <typename D>
Eigen::ArrayXXd fast_tanh(const Eigen::ArrayBase<D>& x) {
  const Eigen::ArrayXXd e = (-2.0 * x.abs()).exp();
  return x.sign() * (1.0 - e) / (1.0 + e);
}

struct GruTrace {
  VectorXd x, h, r, z, n, hn;
};

VectorXd gru_forward(const Parameters& P, const GruSlices& g, const VectorXd& x, const VectorXd& h,
                     GruTrace* tr) {
  const int H = g.hidden;
  VectorXd gx = P.mat(g.wx) * x + P.vec(g.bx);
  VectorXd gh = P.mat(g.wh) * h + P.vec(g.bh);
  VectorXd r = sigmoid((gx.head(H) + gh.head(H)).array()).matrix();
  VectorXd z = sigmoid((gx.segment(H, H) + gh.segment(H, H)).array()).matrix();
  VectorXd hn = gh.tail(H);
  VectorXd n = fast_tanh(gx.tail(H).array() + r.array() * hn.array()).matrix();
  VectorXd out = ((1.0 - z.array()) * n.array() + z.array() * h.array()).matrix();
  if (tr) *tr = GruTrace{x, h, std::move(r), std::move(z), std::move(n), std::move(hn)};
  return out;
}

// dh_out -> grads; writes dx and adds to dh_prev.
void gru_backward(const Parameters& P, const GruSlices& g, const GruTrace& tr, const VectorXd& dh_out,
                  std::span<double> grads, VectorXd& dx, VectorXd& dh_prev) {
  const int H = g.hidden;
  const auto z = tr.z.array();
  const auto r = tr.r.array();
  const auto n = tr.n.array();
  const auto d = dh_out.array();
  const Eigen::ArrayXd dn = d * (1.0 - z);
  const Eigen::ArrayXd dz = d * (tr.h.array() - n);
  const Eigen::ArrayXd dan = dn * (1.0 - n * n);
  const Eigen::ArrayXd dr = dan * tr.hn.array();
  VectorXd dgx(3 * H), dgh(3 * H);
  dgx.head(H) = (dr * r * (1.0 - r)).matrix();
  dgx.segment(H, H) = (dz * z * (1.0 - z)).matrix();
  dgx.tail(H) = dan.matrix();
  dgh.head(2 * H) = dgx.head(2 * H);
  dgh.tail(H) = (dan * r).matrix();
  grad_mat(grads, g.wx).noalias() += dgx * tr.x.transpose();
  grad_vec(grads, g.bx) += dgx;
  grad_mat(grads, g.wh).noalias() += dgh * tr.h.transpose();
  grad_vec(grads, g.bh) += dgh;
  dx.noalias() = P.mat(g.wx).transpose() * dgx;
  dh_prev.array() += d * z;
  dh_prev.noalias() += P.mat(g.wh).transpose() * dgh;
}

VectorXd dropout_mask(int n, double rate, Rng* rng) {
  VectorXd mask = VectorXd::Ones(n);
  if (rng == nullptr || rate <= 0.0) return mask;
  std::bernoulli_distribution keep(1.0 - rate);
  for (int i = 0; i < n; ++i) mask[i] = keep(*rng) ? 1.0 / (1.0 - rate) : 0.0;
  return mask;
}

struct EncoderTrace {
  std::vector<VectorXd> embed_mask;                    // per position
  std::vector<std::vector<GruTrace>> fwd, bwd;         // [layer][position]
};

struct InitTrace {
  std::vector<VectorXd> state;  // per layer, tanh output
};

struct StepTrace {
  TokenId prev = kPad;
  VectorXd embed_mask;
  VectorXd query_state;  // top-layer hidden fed to attention
  MatrixXd att_hidden;   // tanh(keys + W_q s + b), hidden x length
  VectorXd alpha;
  VectorXd context;
  std::vector<GruTrace> gru;
  VectorXd out_in;
  VectorXd out_mask;
  VectorXd logits;
};

Memory encode_impl(const Parameters& P, std::span<const TokenId> src, EncoderTrace* tr, Rng* rng) {
  const auto& cfg = P.config();
  const auto& L = P.layout();
  const int H = cfg.hidden_dim;
  const auto T = static_cast<Eigen::Index>(src.size());
  if (T == 0) throw ContractError("cannot encode an empty source");
  const auto emb = P.mat(L.src_embedding);
  std::vector<VectorXd> inputs(T);
  if (tr) tr->embed_mask.resize(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const TokenId tok = src[t];
    if (tok < 0 || tok >= cfg.vocab_size) throw ContractError("source token out of vocabulary");
    inputs[t] = emb.col(tok);
    if (tr) {
      tr->embed_mask[t] = dropout_mask(cfg.embedding_dim, cfg.dropout, rng);
      inputs[t].array() *= tr->embed_mask[t].array();
    }
  }
  if (tr) {
    tr->fwd.assign(cfg.layers, std::vector<GruTrace>(T));
    if (cfg.bidirectional_encoder) tr->bwd.assign(cfg.layers, std::vector<GruTrace>(T));
  }
  for (int l = 0; l < cfg.layers; ++l) {
    std::vector<VectorXd> out(T);
    VectorXd h = VectorXd::Zero(H);
    for (Eigen::Index t = 0; t < T; ++t) {
      h = gru_forward(P, L.enc_fwd[l], inputs[t], h, tr ? &tr->fwd[l][t] : nullptr);
      out[t] = h;
    }
    if (cfg.bidirectional_encoder) {
      h = VectorXd::Zero(H);
      for (Eigen::Index t = T; t-- > 0;) {
        h = gru_forward(P, L.enc_bwd[l], inputs[t], h, tr ? &tr->bwd[l][t] : nullptr);
        VectorXd both(2 * H);
        both << out[t], h;
        out[t] = std::move(both);
      }
    }
    inputs = std::move(out);
  }
  Memory m;
  m.values.resize(cfg.memory_dim(), T);
  for (Eigen::Index t = 0; t < T; ++t) m.values.col(t) = inputs[t];
  m.keys.noalias() = P.mat(L.att_key) * m.values;
  m.mean = m.values.rowwise().mean();
  return m;
}

DecoderState init_impl(const Parameters& P, const Memory& m, InitTrace* tr) {
  const auto& L = P.layout();
  DecoderState s;
  for (std::size_t l = 0; l < L.dec.size(); ++l)
    s.hidden.push_back(fast_tanh((P.mat(L.init_w[l]) * m.mean + P.vec(L.init_b[l])).array()).matrix());
  if (tr) tr->state = s.hidden;
  return s;
}

StepOutput step_impl(const Parameters& P, const DecoderState& state, TokenId prev, const Memory& m,
                     StepTrace* tr, Rng* rng) {
  const auto& cfg = P.config();
  const auto& L = P.layout();
  if (prev < 0 || prev >= cfg.vocab_size) throw ContractError("decoder input out of vocabulary");
  if (static_cast<int>(state.hidden.size()) != cfg.layers) throw ContractError("decoder state mismatch");
  const int E = cfg.embedding_dim, H = cfg.hidden_dim;

  VectorXd e = P.mat(L.tgt_embedding).col(prev);
  VectorXd emask;
  if (tr) {
    emask = dropout_mask(E, cfg.dropout, rng);
    e.array() *= emask.array();
  }

  const VectorXd& s_top = state.hidden.back();
  const VectorXd q = P.mat(L.att_query) * s_top + P.vec(L.att_bias);
  MatrixXd att = fast_tanh((m.keys.colwise() + q).array()).matrix();
  VectorXd scores = att.transpose() * P.vec(L.att_v);
  const double mx = scores.maxCoeff();
  VectorXd alpha = (scores.array() - mx).exp().matrix();
  alpha /= alpha.sum();
  VectorXd ctx = m.values * alpha;

  StepOutput out;
  out.state.step = state.step + 1;
  out.state.hidden.resize(cfg.layers);
  std::vector<GruTrace> gtr(tr ? cfg.layers : 0);
  VectorXd x(E + m.width());
  x << e, ctx;
  for (int l = 0; l < cfg.layers; ++l) {
    out.state.hidden[l] = gru_forward(P, L.dec[l], x, state.hidden[l], tr ? &gtr[l] : nullptr);
    x = out.state.hidden[l];
  }
  VectorXd out_in(H + m.width());
  out_in << out.state.hidden.back(), ctx;
  VectorXd omask;
  if (tr) {
    omask = dropout_mask(static_cast<int>(out_in.size()), cfg.dropout, rng);
    out_in.array() *= omask.array();
  }
  out.logits = P.mat(L.out_w) * out_in + P.vec(L.out_b);
  if (tr) {
    tr->prev = prev;
    tr->embed_mask = std::move(emask);
    tr->query_state = s_top;
    tr->att_hidden = std::move(att);
    tr->alpha = std::move(alpha);
    tr->context = std::move(ctx);
    tr->gru = std::move(gtr);
    tr->out_in = std::move(out_in);
    tr->out_mask = std::move(omask);
    tr->logits = out.logits;
  }
  return out;
}

}  // namespace detail

Memory encode(const Parameters& params, std::span<const TokenId> src) {
  return detail::encode_impl(params, src, nullptr, nullptr);
}

DecoderState initial_state(const Parameters& params, const Memory& memory) {
  return detail::init_impl(params, memory, nullptr);
}

StepOutput decode_step(const Parameters& params, const DecoderState& state, TokenId prev,
                       const Memory& memory) {
  return detail::step_impl(params, state, prev, memory, nullptr, nullptr);
}

Eigen::VectorXd mask_unused(const Eigen::VectorXd& logits, const TokenMultiset& remaining) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  VectorXd out = logits;
  bool any = false;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const auto tok = static_cast<TokenId>(i);
    const bool allowed = tok == kEos ? remaining.empty() : remaining.count(tok) > 0;
    if (!allowed)
      out[i] = kNegInf;
    else
      any = true;
  }
  if (!any) throw ContractError("mask leaves no token available");
  return out;
}

TokenId argmax_token(const Eigen::VectorXd& logits) {
  Eigen::Index best = -1;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    if (std::isnan(logits[i]) || logits[i] == -std::numeric_limits<double>::infinity()) continue;
    if (best < 0 || logits[i] > logits[best]) best = i;
  }
  if (best < 0) throw NumericError("no finite logit to choose from");
  return static_cast<TokenId>(best);
}

TokenSeq greedy_decode(const Parameters& params, std::span<const TokenId> src, bool mask,
                       std::size_t max_length) {
  const Memory memory = encode(params, src);
  DecoderState state = initial_state(params, memory);
  TokenMultiset remaining(src);
  TokenSeq out;
  TokenId prev = kBos;
  while (out.size() < max_length) {
    StepOutput step = decode_step(params, state, prev, memory);
    const TokenId tok = argmax_token(mask ? mask_unused(step.logits, remaining) : step.logits);
    if (tok == kEos) break;
    if (mask) remaining.remove(tok);
    out.push_back(tok);
    state = std::move(step.state);
    prev = tok;
  }
  return out;
}

Tape::Tape(const Parameters& params, std::span<const TokenId> src, Rng* dropout_rng)
    : params_(&params),
      src_(src.begin(), src.end()),
      dropout_rng_(params.config().dropout > 0.0 ? dropout_rng : nullptr),
      encoder_(std::make_unique<detail::EncoderTrace>()),
      init_(std::make_unique<detail::InitTrace>()) {
  memory_ = detail::encode_impl(params, src_, encoder_.get(), dropout_rng_);
  state_ = detail::init_impl(params, memory_, init_.get());
}

Tape::~Tape() = default;
Tape::Tape(Tape&&) noexcept = default;
Tape& Tape::operator=(Tape&&) noexcept = default;

const Eigen::VectorXd& Tape::step(TokenId prev) {
  auto tr = std::make_unique<detail::StepTrace>();
  StepOutput out = detail::step_impl(*params_, state_, prev, memory_, tr.get(), dropout_rng_);
  state_ = std::move(out.state);
  steps_.push_back(std::move(tr));
  return steps_.back()->logits;
}

const Eigen::VectorXd& Tape::logits(std::size_t t) const { return steps_.at(t)->logits; }

void backward(const Tape& tape, std::span<const Eigen::VectorXd> logit_grads, std::span<double> grads) {
  const Parameters& P = tape.params();
  const auto& cfg = P.config();
  const auto& L = P.layout();
  if (logit_grads.size() != tape.steps_.size())
    throw ContractError("backward: " + std::to_string(logit_grads.size()) + " logit gradients for " +
                        std::to_string(tape.steps_.size()) + " recorded steps");
  if (grads.size() != P.size()) throw ContractError("backward: gradient buffer size mismatch");
  const int E = cfg.embedding_dim, H = cfg.hidden_dim;
  const Memory& m = tape.memory_;
  const auto T = static_cast<Eigen::Index>(m.length());

  MatrixXd d_values = MatrixXd::Zero(m.values.rows(), T);
  MatrixXd d_keys = MatrixXd::Zero(H, T);
  std::vector<VectorXd> ds(cfg.layers, VectorXd::Zero(H));
  VectorXd dx, dh_prev;

  for (std::size_t t = tape.steps_.size(); t-- > 0;) {
    const detail::StepTrace& st = *tape.steps_[t];
    std::vector<VectorXd> ds_prev(cfg.layers, VectorXd::Zero(H));
    VectorXd d_ctx = VectorXd::Zero(m.width());
    const VectorXd& dlogits = logit_grads[t];
    if (dlogits.size() != 0) {
      if (dlogits.size() != cfg.vocab_size) throw ContractError("backward: logit gradient size mismatch");
      grad_mat(grads, L.out_w).noalias() += dlogits * st.out_in.transpose();
      grad_vec(grads, L.out_b) += dlogits;
      VectorXd d_out = P.mat(L.out_w).transpose() * dlogits;
      if (st.out_mask.size()) d_out.array() *= st.out_mask.array();
      ds.back() += d_out.head(H);
      d_ctx += d_out.tail(m.width());
    }
    for (int l = cfg.layers - 1; l >= 0; --l) {
      dh_prev = VectorXd::Zero(H);
      detail::gru_backward(P, L.dec[l], st.gru[l], ds[l], grads, dx, dh_prev);
      ds_prev[l] += dh_prev;
      if (l > 0) {
        ds[l - 1] += dx;
      } else {
        VectorXd de = dx.head(E);
        if (st.embed_mask.size()) de.array() *= st.embed_mask.array();
        grad_mat(grads, L.tgt_embedding).col(st.prev) += de;
        d_ctx += dx.tail(m.width());
      }
    }
    // Attention.
    const VectorXd d_alpha = m.values.transpose() * d_ctx;
    d_values.noalias() += d_ctx * st.alpha.transpose();
    const VectorXd d_scores = (st.alpha.array() * (d_alpha.array() - st.alpha.dot(d_alpha))).matrix();
    grad_vec(grads, L.att_v).noalias() += st.att_hidden * d_scores;
    const MatrixXd d_pre =
        ((P.vec(L.att_v) * d_scores.transpose()).array() * (1.0 - st.att_hidden.array().square())).matrix();
    d_keys += d_pre;
    const VectorXd dq = d_pre.rowwise().sum();
    grad_vec(grads, L.att_bias) += dq;
    grad_mat(grads, L.att_query).noalias() += dq * st.query_state.transpose();
    ds_prev.back().noalias() += P.mat(L.att_query).transpose() * dq;
    ds = std::move(ds_prev);
  }

  // Initial decoder state.
  VectorXd d_mean = VectorXd::Zero(m.width());
  for (int l = 0; l < cfg.layers; ++l) {
    const VectorXd d_pre = (ds[l].array() * (1.0 - tape.init_->state[l].array().square())).matrix();
    grad_mat(grads, L.init_w[l]).noalias() += d_pre * m.mean.transpose();
    grad_vec(grads, L.init_b[l]) += d_pre;
    d_mean.noalias() += P.mat(L.init_w[l]).transpose() * d_pre;
  }
  d_values.colwise() += d_mean / static_cast<double>(T);
  grad_mat(grads, L.att_key).noalias() += d_keys * m.values.transpose();
  d_values.noalias() += P.mat(L.att_key).transpose() * d_keys;

  // Encoder, top layer first.
  const detail::EncoderTrace& enc = *tape.encoder_;
  std::vector<VectorXd> d_out(T);
  for (Eigen::Index t = 0; t < T; ++t) d_out[t] = d_values.col(t);
  for (int l = cfg.layers - 1; l >= 0; --l) {
    const int in = L.enc_fwd[l].input;
    std::vector<VectorXd> d_in(T, VectorXd::Zero(in));
    VectorXd carry = VectorXd::Zero(H);
    for (Eigen::Index t = T; t-- > 0;) {
      const VectorXd dh = d_out[t].head(H) + carry;
      carry = VectorXd::Zero(H);
      detail::gru_backward(P, L.enc_fwd[l], enc.fwd[l][t], dh, grads, dx, carry);
      d_in[t] += dx;
    }
    if (cfg.bidirectional_encoder) {
      carry = VectorXd::Zero(H);
      for (Eigen::Index t = 0; t < T; ++t) {
        const VectorXd dh = d_out[t].tail(H) + carry;
        carry = VectorXd::Zero(H);
        detail::gru_backward(P, L.enc_bwd[l], enc.bwd[l][t], dh, grads, dx, carry);
        d_in[t] += dx;
      }
    }
    d_out = std::move(d_in);
  }
  for (Eigen::Index t = 0; t < T; ++t) {
    VectorXd de = d_out[t];
    if (enc.embed_mask.size() && enc.embed_mask[t].size()) de.array() *= enc.embed_mask[t].array();
    grad_mat(grads, L.src_embedding).col(tape.src_[t]) += de;
  }
}

std::vector<double> backward(const Tape& tape, std::span<const Eigen::VectorXd> logit_grads) {
  std::vector<double> grads(tape.params().size(), 0.0);
  backward(tape, logit_grads, grads);
  return grads;
}

Adam::Adam(std::size_t n, AdamConfig cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw ContractError("adam: parameter/gradient size mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (!std::isfinite(grads[i]))
      throw NumericError("adam: non-finite gradient " + std::to_string(grads[i]) + " at index " +
                         std::to_string(i));
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i] * grads[i];
    const double mhat = m_[i] / c1;
    const double vhat = v_[i] / c2;
    params[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
  }
}

namespace {

constexpr char kMagic[8] = {'L', '2', 'S', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw InputError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }
double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Parameters& params, const std::string& echo) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint " + path.string());
  const auto& c = params.config();
  out.write(kMagic, sizeof kMagic);
  put_u64(out, kVersion);
  put_u64(out, static_cast<std::uint64_t>(c.vocab_size));
  put_u64(out, static_cast<std::uint64_t>(c.embedding_dim));
  put_u64(out, static_cast<std::uint64_t>(c.hidden_dim));
  put_u64(out, static_cast<std::uint64_t>(c.layers));
  put_u64(out, c.bidirectional_encoder ? 1 : 0);
  put_f64(out, c.dropout);
  put_u64(out, c.share_embeddings ? 1 : 0);
  put_u64(out, echo.size());
  out.write(echo.data(), static_cast<std::streamsize>(echo.size()));
  put_u64(out, params.size());
  for (double v : params.values()) put_f64(out, v);
  if (!out) throw InputError("failed writing checkpoint " + path.string());
}

Parameters load_checkpoint(const std::filesystem::path& path, std::string* echo) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw InputError(path.string() + " is not a checkpoint");
  if (get_u64(in) != kVersion) throw InputError("unsupported checkpoint version");
  ModelConfig c;
  c.vocab_size = static_cast<int>(get_u64(in));
  c.embedding_dim = static_cast<int>(get_u64(in));
  c.hidden_dim = static_cast<int>(get_u64(in));
  c.layers = static_cast<int>(get_u64(in));
  c.bidirectional_encoder = get_u64(in) != 0;
  c.dropout = get_f64(in);
  c.share_embeddings = get_u64(in) != 0;
  const auto echo_len = get_u64(in);
  if (echo_len > (1u << 24)) throw InputError("checkpoint header corrupt");
  std::string text(echo_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(echo_len))) throw InputError("checkpoint truncated");
  if (echo) *echo = std::move(text);
  Parameters p(c);
  if (get_u64(in) != p.size()) throw InputError("checkpoint parameter count does not match its config");
  for (double& v : p.values()) v = get_f64(in);
  return p;
}

}  // namespace l2s
