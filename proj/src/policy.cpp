#include "funrl/policy.hpp"

#include <algorithm>
#include <cmath>

namespace funrl::policy {

PolicyParams::PolicyParams(PolicyConfig config) : config_(config) {
  if (config_.vocab_size < 2 || config_.vocab_size > TokenVocab::kMaxSize)
    throw std::invalid_argument("vocab size must be in [2, 256]");
  if (config_.context_window < 1 || config_.context_window > 4)
    throw std::invalid_argument("context window must be in [1, 4]");
  if (config_.buckets == 0) throw std::invalid_argument("bucket count must be positive");
  if (!(config_.temperature > 0.0) || !std::isfinite(config_.temperature))
    throw std::invalid_argument("temperature must be positive");
}

std::uint32_t PolicyParams::bucket_of(std::string_view prompt) const {
  return static_cast<std::uint32_t>(fnv1a64(prompt) % config_.buckets);
}

RowKey PolicyParams::key(std::uint32_t bucket, std::span<const int> context) const {
  if (static_cast<int>(context.size()) != config_.context_window)
    throw std::invalid_argument("context length must equal the context window");
  RowKey k = static_cast<RowKey>(bucket) << 32;
  for (std::size_t i = 0; i < context.size(); ++i) k |= static_cast<RowKey>(context[i] & 0xff) << (8 * i);
  return k;
}

RowKey PolicyParams::key_at(std::uint32_t bucket, std::span<const int> tokens, std::size_t t) const {
  RowKey k = static_cast<RowKey>(bucket) << 32;
  const auto w = static_cast<std::size_t>(config_.context_window);
  for (std::size_t i = 0; i < w; ++i) {
    // slot i holds the token at position t - w + i
    const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t) - static_cast<std::ptrdiff_t>(w) + static_cast<std::ptrdiff_t>(i);
    const int id = pos < 0 ? TokenVocab::kBegin : tokens[static_cast<std::size_t>(pos)];
    k |= static_cast<RowKey>(id & 0xff) << (8 * i);
  }
  return k;
}

const std::vector<double>* PolicyParams::row(RowKey key) const {
  auto it = rows_.find(key);
  return it == rows_.end() ? nullptr : &it->second;
}

std::vector<double>& PolicyParams::touch(RowKey key) {
  auto it = rows_.find(key);
  if (it == rows_.end()) it = rows_.emplace(key, std::vector<double>(static_cast<std::size_t>(config_.vocab_size), 0.0)).first;
  return it->second;
}

void softmax(std::span<const double> logits, std::span<double> out) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    total += out[i];
  }
  for (auto& p : out) p /= total;
}

namespace {

/// Scaled logits (row + bias) / temperature.
std::vector<double> scaled_logits(const PolicyParams& params, RowKey key, std::span<const double> bias) {
  const auto v = static_cast<std::size_t>(params.vocab_size());
  std::vector<double> z(v, 0.0);
  if (const auto* row = params.row(key)) z = *row;
  if (!bias.empty())
    for (std::size_t i = 0; i < v; ++i) z[i] += bias[i];
  const double inv_t = 1.0 / params.config().temperature;
  if (inv_t != 1.0)
    for (auto& x : z) x *= inv_t;
  return z;
}

/// Log-softmax, numerically stable.
std::vector<double> log_softmax(std::vector<double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double x : z) total += std::exp(x - mx);
  const double lse = mx + std::log(total);
  for (auto& x : z) x -= lse;
  return z;
}

std::size_t draw(std::span<const double> probs, double u) {
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last_positive = i;
    cumulative += probs[i];
    if (u < cumulative) return i;
  }
  return last_positive;
}

template <typename Choose>
Rollout decode(const PolicyParams& params, std::string_view prompt, const SampleOptions& options, Choose choose) {
  if (options.max_len < 1) throw std::invalid_argument("max_len must be at least 1");
  Rollout out;
  out.prompt_id = options.prompt_id;
  out.prompt_bucket = params.bucket_of(prompt);
  const auto v = static_cast<std::size_t>(params.vocab_size());
  std::vector<double> bias;
  GrammarPrior::State state;
  if (options.prior) {
    bias.assign(v, 0.0);
    state = options.prior->initial();
  }
  for (int t = 0; t < options.max_len; ++t) {
    if (options.prior) options.prior->bias(state, bias);
    const RowKey key = params.key_at(out.prompt_bucket, out.tokens, out.tokens.size());
    auto dist = step_distribution(params, key, bias);
    const auto k = static_cast<int>(choose(dist));
    out.tokens.push_back(k);
    out.chosen_prob.push_back(dist[static_cast<std::size_t>(k)]);
    out.step_dists.push_back(std::move(dist));
    if (options.prior) state = options.prior->advance(state, k);
    if (k == TokenVocab::kEnd) {
      out.terminal = true;
      break;
    }
  }
  assign_spans(out);
  return out;
}

}  // namespace

std::vector<double> step_distribution(const PolicyParams& params, RowKey key, std::span<const double> bias) {
  auto z = scaled_logits(params, key, bias);
  softmax(z, z);
  return z;
}

std::vector<double> distribution(const PolicyParams& params, std::string_view prompt, std::span<const int> context) {
  return step_distribution(params, params.key(params.bucket_of(prompt), context), {});
}

void assign_spans(Rollout& rollout) {
  rollout.cot = {};
  rollout.answer = {};
  const auto& tokens = rollout.tokens;
  auto position = [&](int tag) -> std::ptrdiff_t {
    if (std::count(tokens.begin(), tokens.end(), tag) != 1) return -1;
    return std::find(tokens.begin(), tokens.end(), tag) - tokens.begin();
  };
  const auto think_open = position(TokenVocab::kThinkOpen);
  const auto think_close = position(TokenVocab::kThinkClose);
  const auto answer_open = position(TokenVocab::kAnswerOpen);
  const auto answer_close = position(TokenVocab::kAnswerClose);
  if (think_open < 0 || think_close < 0 || answer_open < 0 || answer_close < 0) return;
  if (!(think_open < think_close && think_close < answer_open && answer_open < answer_close)) return;
  rollout.cot = {static_cast<std::size_t>(think_open + 1), static_cast<std::size_t>(think_close)};
  rollout.answer = {static_cast<std::size_t>(answer_open + 1), static_cast<std::size_t>(answer_close)};
}

Rollout sample_rollout(const PolicyParams& params, std::string_view prompt, Rng& rng, const SampleOptions& options) {
  return decode(params, prompt, options, [&](const std::vector<double>& dist) { return draw(dist, rng.uniform()); });
}

Rollout greedy_rollout(const PolicyParams& params, std::string_view prompt, const SampleOptions& options) {
  return decode(params, prompt, options, [](const std::vector<double>& dist) {
    return static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
  });
}

std::vector<double> logprob_trace(const PolicyParams& params, std::string_view prompt, std::span<const int> tokens,
                                  const GrammarPrior* prior) {
  const auto bucket = params.bucket_of(prompt);
  std::vector<double> bias;
  GrammarPrior::State state;
  if (prior) {
    bias.assign(static_cast<std::size_t>(params.vocab_size()), 0.0);
    state = prior->initial();
  }
  std::vector<double> out;
  out.reserve(tokens.size());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (prior) prior->bias(state, bias);
    auto logp = log_softmax(scaled_logits(params, params.key_at(bucket, tokens, t), bias));
    out.push_back(logp[static_cast<std::size_t>(tokens[t])]);
    if (prior) state = prior->advance(state, tokens[t]);
  }
  return out;
}

SurrogateResult surrogate_gradient(const PolicyParams& params, std::span<const ScoredRollout> batch, double epsilon,
                                   double beta, const PolicyParams& ref_params) {
  SurrogateResult result;
  for (const auto& item : batch) result.tokens += item.rollout->tokens.size();
  if (result.tokens == 0) return result;
  const double inv_n = 1.0 / static_cast<double>(result.tokens);
  const double inv_t = 1.0 / params.config().temperature;
  const auto v = static_cast<std::size_t>(params.vocab_size());
  double kl_total = 0.0;

  std::vector<double> bias;
  std::vector<double> row_grad(v);
  for (const auto& item : batch) {
    const Rollout& rollout = *item.rollout;
    if (item.advantages.size() != rollout.tokens.size())
      throw std::invalid_argument("one advantage per token is required");
    GrammarPrior::State state;
    if (item.prior) {
      bias.assign(v, 0.0);
      state = item.prior->initial();
    } else {
      bias.clear();
    }
    for (std::size_t t = 0; t < rollout.tokens.size(); ++t) {
      if (item.prior) item.prior->bias(state, bias);
      const RowKey key = params.key_at(rollout.prompt_bucket, rollout.tokens, t);
      const auto logp = log_softmax(scaled_logits(params, key, bias));
      const auto logq = log_softmax(scaled_logits(ref_params, key, bias));
      const auto k = static_cast<std::size_t>(rollout.tokens[t]);

      double kl = 0.0;
      std::vector<double> p(v);
      for (std::size_t j = 0; j < v; ++j) {
        p[j] = std::exp(logp[j]);
        kl += p[j] * (logp[j] - logq[j]);
      }
      kl_total += kl;

      const double rho = std::exp(logp[k]) / rollout.chosen_prob[t];
      const double adv = item.advantages[t];
      const bool clipped = rl::surrogate_clipped(rho, adv, epsilon);
      const double clipped_rho = std::clamp(rho, 1.0 - epsilon, 1.0 + epsilon);
      result.objective += (std::min(rho * adv, clipped_rho * adv) - beta * kl) * inv_n;
      if (clipped) ++result.clipped_tokens;

      std::fill(row_grad.begin(), row_grad.end(), 0.0);
      bool nonzero = false;
      if (!clipped && adv != 0.0) {
        const double scale = adv * rho * inv_t * inv_n;
        for (std::size_t j = 0; j < v; ++j) row_grad[j] -= scale * p[j];
        row_grad[k] += scale;
        nonzero = true;
      }
      if (beta != 0.0) {
        const double scale = -beta * inv_t * inv_n;
        for (std::size_t j = 0; j < v; ++j) row_grad[j] += scale * p[j] * (logp[j] - logq[j] - kl);
        nonzero = true;
      }
      if (nonzero) {
        auto& g = result.gradient[key];
        if (g.empty()) g.assign(v, 0.0);
        for (std::size_t j = 0; j < v; ++j) g[j] += row_grad[j];
      }
      if (item.prior) state = item.prior->advance(state, rollout.tokens[t]);
    }
  }
  result.mean_kl = kl_total * inv_n;
  return result;
}

void apply_update(PolicyParams& params, const GradientTable& gradient, double learning_rate) {
  for (const auto& [key, g] : gradient) {
    if (g.size() != static_cast<std::size_t>(params.vocab_size()))
      throw std::invalid_argument("gradient row has the wrong width");
    for (double x : g)
      if (!std::isfinite(x)) throw NonFiniteGradient("non-finite gradient entry");
  }
  if (learning_rate == 0.0) return;
  for (const auto& [key, g] : gradient) {
    if (std::all_of(g.begin(), g.end(), [](double x) { return x == 0.0; })) continue;
    auto& row = params.touch(key);
    for (std::size_t j = 0; j < g.size(); ++j) row[j] += learning_rate * g[j];
  }
}

}  // namespace funrl::policy
