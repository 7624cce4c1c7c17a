#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "l2s/corpus.hpp"

namespace l2s {

struct ModelConfig {
  int vocab_size = 0;
  int embedding_dim = 32;
  int hidden_dim = 64;
  int layers = 1;
  bool bidirectional_encoder = true;
  double dropout = 0.0;
  bool share_embeddings = true;

  void validate() const;
  int memory_dim() const { return bidirectional_encoder ? 2 * hidden_dim : hidden_dim; }
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// A column-major rows x cols block of the flat parameter vector.
struct Slice {
  std::size_t offset = 0;
  int rows = 0;
  int cols = 1;
  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

// Gates are stacked [reset; update; candidate].
struct GruSlices {
  Slice wx, wh, bx, bh;
  int input = 0;
  int hidden = 0;
};

struct ParameterLayout {
  Slice src_embedding;  // embedding_dim x vocab, one column per token
  Slice tgt_embedding;  // same slice as src_embedding when shared
  std::vector<GruSlices> enc_fwd, enc_bwd, dec;
  std::vector<Slice> init_w, init_b;  // decoder initial state, per layer
  Slice att_query, att_key, att_bias, att_v;
  Slice out_w, out_b;
  std::size_t total = 0;
  std::vector<std::pair<std::string, Slice>> named;

  static ParameterLayout build(const ModelConfig& cfg);
};

class Parameters {
 public:
  explicit Parameters(const ModelConfig& cfg);
  static Parameters random_uniform(const ModelConfig& cfg, Rng& rng, double scale = 0.08);

  const ModelConfig& config() const noexcept { return config_; }
  const ParameterLayout& layout() const noexcept { return *layout_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  Eigen::Map<const Eigen::MatrixXd> mat(const Slice& s) const {
    return {values_.data() + s.offset, s.rows, s.cols};
  }
  Eigen::Map<const Eigen::VectorXd> vec(const Slice& s) const {
    return {values_.data() + s.offset, static_cast<Eigen::Index>(s.size())};
  }

 private:
  ModelConfig config_;
  std::shared_ptr<const ParameterLayout> layout_;
  std::vector<double> values_;
};

inline Eigen::Map<Eigen::MatrixXd> grad_mat(std::span<double> g, const Slice& s) {
  return {g.data() + s.offset, s.rows, s.cols};
}
inline Eigen::Map<Eigen::VectorXd> grad_vec(std::span<double> g, const Slice& s) {
  return {g.data() + s.offset, static_cast<Eigen::Index>(s.size())};
}

// Encoder output: one column per source position.
struct Memory {
  Eigen::MatrixXd values;  // memory_dim x length
  Eigen::MatrixXd keys;    // hidden x length, attention projection of values
  Eigen::VectorXd mean;

  std::size_t length() const { return static_cast<std::size_t>(values.cols()); }
  std::size_t width() const { return static_cast<std::size_t>(values.rows()); }
};

struct DecoderState {
  std::vector<Eigen::VectorXd> hidden;  // per layer
  int step = 0;
};

struct StepOutput {
  Eigen::VectorXd logits;
  DecoderState state;
};

Memory encode(const Parameters& params, std::span<const TokenId> src);
DecoderState initial_state(const Parameters& params, const Memory& memory);
StepOutput decode_step(const Parameters& params, const DecoderState& state, TokenId prev,
                       const Memory& memory);

// Logits of tokens absent from `remaining` become -inf; EOS stays only when
// `remaining` is empty.
Eigen::VectorXd mask_unused(const Eigen::VectorXd& logits, const TokenMultiset& remaining);
// Index of the largest finite entry, ties to the smallest index.
TokenId argmax_token(const Eigen::VectorXd& logits);

// Greedy decoding until EOS or max_length. With `mask` the output is a
// permutation of `src`.
TokenSeq greedy_decode(const Parameters& params, std::span<const TokenId> src, bool mask,
                       std::size_t max_length);

namespace detail {
struct EncoderTrace;
struct StepTrace;
struct InitTrace;
}  // namespace detail

// Records one forward pass (encoder, initial state, decoder steps) so that
// backward() can replay it in reverse.
class Tape {
 public:
  // With a dropout rng, dropout is applied at the configured rate.
  Tape(const Parameters& params, std::span<const TokenId> src, Rng* dropout_rng = nullptr);
  ~Tape();
  Tape(Tape&&) noexcept;
  Tape& operator=(Tape&&) noexcept;

  // Feeds `prev` and returns this step's logits.
  const Eigen::VectorXd& step(TokenId prev);

  const Parameters& params() const noexcept { return *params_; }
  const DecoderState& state() const noexcept { return state_; }
  const Memory& memory() const noexcept { return memory_; }
  std::size_t num_steps() const noexcept { return steps_.size(); }
  const Eigen::VectorXd& logits(std::size_t t) const;

 private:
  friend void backward(const Tape&, std::span<const Eigen::VectorXd>, std::span<double>);

  const Parameters* params_;
  TokenSeq src_;
  Rng* dropout_rng_;
  Memory memory_;
  DecoderState state_;
  std::unique_ptr<detail::EncoderTrace> encoder_;
  std::unique_ptr<detail::InitTrace> init_;
  std::vector<std::unique_ptr<detail::StepTrace>> steps_;
};

// Accumulates d loss / d params into `grads` given d loss / d logits for every
// recorded step. An empty vector stands for a zero gradient.
void backward(const Tape& tape, std::span<const Eigen::VectorXd> logit_grads, std::span<double> grads);
std::vector<double> backward(const Tape& tape, std::span<const Eigen::VectorXd> logit_grads);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::size_t n, AdamConfig cfg = {});
  // Throws NumericError on non-finite gradients; params are left untouched.
  void step(std::span<double> params, std::span<const double> grads);
  long iteration() const noexcept { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

// Magic, version, model config, a free-form text echo, then little-endian
// doubles in layout order.
void save_checkpoint(const std::filesystem::path& path, const Parameters& params,
                     const std::string& echo = {});
Parameters load_checkpoint(const std::filesystem::path& path, std::string* echo = nullptr);

}  // namespace l2s
