#pragma once

// Tabular autoregressive softmax policy. A row of V logits is keyed by
// (prompt bucket, last W tokens); untouched rows read as all-zero logits.
// An optional GrammarPrior adds a fixed, non-trainable bias per step.

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "funrl/callspec.hpp"
#include "funrl/rlcore.hpp"
#include "funrl/rng.hpp"
#include "funrl/rollout.hpp"
#include "funrl/vocab.hpp"

namespace funrl::policy {

struct PolicyConfig {
  int vocab_size = 0;
  int context_window = 3;        // 1..4
  std::uint32_t buckets = 64;
  double temperature = 1.0;      // distribution = softmax((logits + bias) / temperature)

  friend bool operator==(const PolicyConfig&, const PolicyConfig&) = default;
};

using RowKey = std::uint64_t;
using GradientTable = std::map<RowKey, std::vector<double>>;

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PolicyParams {
 public:
  explicit PolicyParams(PolicyConfig config);

  const PolicyConfig& config() const { return config_; }
  int vocab_size() const { return config_.vocab_size; }

  std::uint32_t bucket_of(std::string_view prompt) const;
  /// `context` holds exactly context_window token ids.
  RowKey key(std::uint32_t bucket, std::span<const int> context) const;
  /// Context window ending just before position `t` of `tokens`, left-padded
  /// with the begin token.
  RowKey key_at(std::uint32_t bucket, std::span<const int> tokens, std::size_t t) const;

  /// nullptr for untouched rows.
  const std::vector<double>* row(RowKey key) const;
  std::vector<double>& touch(RowKey key);
  const std::unordered_map<RowKey, std::vector<double>>& rows() const { return rows_; }
  std::size_t row_count() const { return rows_.size(); }

  friend bool operator==(const PolicyParams& a, const PolicyParams& b) {
    return a.config_ == b.config_ && a.rows_ == b.rows_;
  }

 private:
  PolicyConfig config_;
  std::unordered_map<RowKey, std::vector<double>> rows_;
};

/// Fixed bias toward grammatical, schema-typed continuations of a response:
/// `<think> words </think> <answer> [ tool ( param = value , ... ) ] </answer> </s>`
/// or free text in the answer. Once a step leaves the grammar the bias is off.
class GrammarPrior {
 public:
  enum class Phase {
    Start, Think, AfterThink, AnswerStart, FreeText, ExpectTool, ExpectOpen, AfterOpen, AfterArgComma,
    ExpectEquals, ExpectValue, AfterValue, AfterCall, AfterList, AfterAnswer, Done, Off
  };

  struct State {
    Phase phase = Phase::Start;
    int tool = -1;
    int param = -1;
    std::uint64_t used = 0;
  };

  GrammarPrior(const TokenVocab& vocab, const std::vector<callspec::ToolSchema>& tools,
               std::span<const int> word_tokens, double strength);

  State initial() const { return {}; }
  State advance(const State& state, int token) const;
  std::vector<int> allowed(const State& state) const;
  /// Writes `strength` for allowed tokens and 0 elsewhere.
  void bias(const State& state, std::span<double> out) const;
  double strength() const { return strength_; }

 private:
  struct ToolInfo {
    int token = -1;
    std::vector<int> param_tokens;
    std::vector<std::vector<int>> value_tokens;
    std::uint64_t required = 0;
  };

  bool all_required(const State& s) const;
  bool unused_left(const State& s) const;
  int param_index(int tool, int token) const;

  int vocab_size_;
  int open_bracket_, close_bracket_, open_paren_, close_paren_, comma_, equals_;
  std::vector<int> words_;
  std::vector<ToolInfo> tools_;
  double strength_;
};

/// Softmax with the max-subtraction; `out` may alias `logits`.
void softmax(std::span<const double> logits, std::span<double> out);

/// softmax((row + bias) / temperature) at one step. `bias` may be empty.
std::vector<double> step_distribution(const PolicyParams& params, RowKey key, std::span<const double> bias);

/// pi(. | prompt, context) without any prior.
std::vector<double> distribution(const PolicyParams& params, std::string_view prompt, std::span<const int> context);

struct SampleOptions {
  int max_len = 48;
  const GrammarPrior* prior = nullptr;
  std::string prompt_id;
};

/// Locates the CoT and answer spans from the four tag tokens; both spans are
/// empty unless each tag occurs exactly once in the right order.
void assign_spans(Rollout& rollout);

Rollout sample_rollout(const PolicyParams& params, std::string_view prompt, Rng& rng, const SampleOptions& options);
/// Argmax decoding (lowest id wins ties).
Rollout greedy_rollout(const PolicyParams& params, std::string_view prompt, const SampleOptions& options);

/// Exact log pi(token_t | prompt, prefix) for every position.
std::vector<double> logprob_trace(const PolicyParams& params, std::string_view prompt, std::span<const int> tokens,
                                  const GrammarPrior* prior = nullptr);

struct ScoredRollout {
  const Rollout* rollout = nullptr;
  std::vector<double> advantages;  // one per token
  const GrammarPrior* prior = nullptr;
};

struct SurrogateResult {
  GradientTable gradient;
  double objective = 0.0;
  std::size_t tokens = 0;
  std::size_t clipped_tokens = 0;
  double mean_kl = 0.0;  // mean over tokens of KL(pi || pi_ref)
};

/// Analytic gradient of the token-mean clipped surrogate with the -beta*KL
/// penalty; pi_old probabilities come from the rollouts.
SurrogateResult surrogate_gradient(const PolicyParams& params, std::span<const ScoredRollout> batch, double epsilon,
                                   double beta, const PolicyParams& ref_params);

/// logit += learning_rate * gradient on the gradient's rows. Throws
/// NonFiniteGradient (params untouched) if any entry is not finite.
void apply_update(PolicyParams& params, const GradientTable& gradient, double learning_rate);

}  // namespace funrl::policy
