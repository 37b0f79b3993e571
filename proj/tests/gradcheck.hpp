#pragma once

// Finite-difference oracle for the surrogate gradient. The objective is
// recomputed from scratch here (long double softmax, explicit min/clip), so
// it shares nothing with the analytic path beyond row lookup.

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>
#include <vector>

#include "funrl/policy.hpp"
#include "funrl/rng.hpp"
#include "funrl/taskbench.hpp"

namespace gradcheck {

using namespace funrl;
using namespace funrl::policy;

struct Instance {
  PolicyParams params{PolicyConfig{2}};
  PolicyParams ref{PolicyConfig{2}};
  std::vector<Rollout> rollouts;
  std::vector<ScoredRollout> batch;
  std::unique_ptr<GrammarPrior> prior;
  double epsilon = 0.2;
  double beta = 0.0;
};

inline std::vector<long double> oracle_dist(const PolicyParams& p, RowKey key, const std::vector<double>& bias) {
  const auto v = static_cast<std::size_t>(p.vocab_size());
  std::vector<long double> z(v, 0.0L);
  if (const auto* row = p.row(key))
    for (std::size_t j = 0; j < v; ++j) z[j] = (*row)[j];
  for (std::size_t j = 0; j < bias.size(); ++j) z[j] += bias[j];
  for (auto& x : z) x /= p.config().temperature;
  const long double mx = *std::max_element(z.begin(), z.end());
  long double total = 0.0L;
  for (auto& x : z) total += (x = std::exp(x - mx));
  for (auto& x : z) x /= total;
  return z;
}

inline long double objective(const Instance& in, const PolicyParams& params) {
  long double sum = 0.0L;
  std::size_t n = 0;
  for (const auto& item : in.batch) {
    const Rollout& r = *item.rollout;
    auto state = item.prior ? item.prior->initial() : GrammarPrior::State{};
    std::vector<double> bias;
    for (std::size_t t = 0; t < r.tokens.size(); ++t, ++n) {
      if (item.prior) {
        bias.assign(static_cast<std::size_t>(params.vocab_size()), 0.0);
        item.prior->bias(state, bias);
      }
      const RowKey key = params.key_at(r.prompt_bucket, r.tokens, t);
      const auto p = oracle_dist(params, key, bias);
      const auto q = oracle_dist(in.ref, key, bias);
      long double kl = 0.0L;
      for (std::size_t j = 0; j < p.size(); ++j)
        if (p[j] > 0) kl += p[j] * std::log(p[j] / q[j]);
      const long double rho = p[static_cast<std::size_t>(r.tokens[t])] / r.chosen_prob[t];
      const long double a = item.advantages[t];
      const long double lo = 1.0L - in.epsilon, hi = 1.0L + in.epsilon;
      const long double clipped = std::min(std::max(rho, lo), hi);
      sum += std::min(rho * a, clipped * a) - in.beta * kl;
      if (item.prior) state = item.prior->advance(state, r.tokens[t]);
    }
  }
  return n ? sum / static_cast<long double>(n) : 0.0L;
}

/// Ratios of every token under `in.params`.
inline std::vector<long double> ratios(const Instance& in) {
  std::vector<long double> out;
  for (const auto& item : in.batch) {
    const Rollout& r = *item.rollout;
    auto state = item.prior ? item.prior->initial() : GrammarPrior::State{};
    std::vector<double> bias;
    for (std::size_t t = 0; t < r.tokens.size(); ++t) {
      if (item.prior) {
        bias.assign(static_cast<std::size_t>(in.params.vocab_size()), 0.0);
        item.prior->bias(state, bias);
      }
      const auto p = oracle_dist(in.params, in.params.key_at(r.prompt_bucket, r.tokens, t), bias);
      out.push_back(p[static_cast<std::size_t>(r.tokens[t])] / r.chosen_prob[t]);
      if (item.prior) state = item.prior->advance(state, r.tokens[t]);
    }
  }
  return out;
}

inline void randomize(PolicyParams& p, const std::set<RowKey>& keys, Rng& rng, double scale) {
  for (RowKey k : keys)
    for (auto& x : p.touch(k)) x = (rng.uniform() * 2 - 1) * scale;
}

/// A random instance with V <= 8 and rollouts of at most 6 tokens, or (when
/// `with_prior`) the task vocabulary with a grammar prior.
inline Instance make_instance(Rng& rng, double beta, bool with_prior) {
  Instance in;
  in.beta = beta;
  in.epsilon = 0.1 + 0.2 * rng.uniform();
  const double temperature = rng.below(2) ? 1.0 : 0.7;
  std::optional<TokenVocab> vocab;
  if (with_prior) vocab.emplace(bench::task_vocab());
  const int v = with_prior ? vocab->size() : 7 + static_cast<int>(rng.below(2));
  PolicyConfig cfg{v, 1 + static_cast<int>(rng.below(3)), 4, temperature};
  in.params = PolicyParams(cfg);
  in.ref = PolicyParams(cfg);
  PolicyParams old(cfg);

  std::vector<callspec::ToolSchema> tools;
  if (with_prior) {
    callspec::ToolSchema tool{"get_weather", "", {{"city", callspec::TypeTag::Enum, {"paris", "tokyo"}, "", true}}};
    tools.push_back(tool);
    const auto words = bench::word_tokens(*vocab);
    in.prior = std::make_unique<GrammarPrior>(*vocab, tools, words, 1.5);
  }

  const int n_rollouts = 1 + static_cast<int>(rng.below(3));
  in.rollouts.resize(static_cast<std::size_t>(n_rollouts));
  std::set<RowKey> keys;
  for (auto& r : in.rollouts) {
    r.prompt_bucket = static_cast<std::uint32_t>(rng.below(cfg.buckets));
    const auto len = 1 + rng.below(6);
    if (with_prior) {
      // Walk the grammar so the prior is active on most steps.
      auto state = in.prior->initial();
      for (std::uint64_t t = 0; t < len; ++t) {
        auto allowed = in.prior->allowed(state);
        int tok = (!allowed.empty() && rng.below(4) != 0) ? allowed[rng.below(allowed.size())]
                                                          : static_cast<int>(rng.below(static_cast<std::uint64_t>(v)));
        r.tokens.push_back(tok);
        state = in.prior->advance(state, tok);
      }
    } else {
      for (std::uint64_t t = 0; t < len; ++t) r.tokens.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(v))));
    }
    for (std::size_t t = 0; t < r.tokens.size(); ++t) keys.insert(in.params.key_at(r.prompt_bucket, r.tokens, t));
  }
  randomize(old, keys, rng, 1.0);
  randomize(in.ref, keys, rng, 1.0);
  in.params = old;
  for (RowKey k : keys)
    for (auto& x : in.params.touch(k)) x += (rng.uniform() * 2 - 1) * 0.6;

  for (auto& r : in.rollouts) {
    auto state = in.prior ? in.prior->initial() : GrammarPrior::State{};
    std::vector<double> bias;
    for (std::size_t t = 0; t < r.tokens.size(); ++t) {
      if (in.prior) {
        bias.assign(static_cast<std::size_t>(v), 0.0);
        in.prior->bias(state, bias);
      }
      auto d = step_distribution(old, old.key_at(r.prompt_bucket, r.tokens, t), bias);
      r.chosen_prob.push_back(d[static_cast<std::size_t>(r.tokens[t])]);
      if (in.prior) state = in.prior->advance(state, r.tokens[t]);
    }
    std::vector<double> adv(r.tokens.size());
    const double a = rng.uniform() * 4 - 2;
    for (auto& x : adv) x = rng.below(4) == 0 ? rng.uniform() * 4 - 2 : a;
    in.batch.push_back({&r, adv, in.prior.get()});
  }
  return in;
}

struct Comparison {
  double max_rel_error = 0.0;   // over entries with a non-negligible gradient
  double max_abs_small = 0.0;   // largest |analytic - fd| among negligible entries
  std::size_t entries = 0;
  std::size_t clipped_tokens = 0;
  bool kink_free = true;        // no ratio within the FD step of a clip boundary
};

inline Comparison compare(const Instance& in, double h = 1e-5) {
  Comparison c;
  for (long double rho : ratios(in)) {
    const long double lo = 1.0L - in.epsilon, hi = 1.0L + in.epsilon;
    if (std::fabs(rho - lo) < 1e-3L || std::fabs(rho - hi) < 1e-3L) c.kink_free = false;
  }
  auto analytic = surrogate_gradient(in.params, in.batch, in.epsilon, in.beta, in.ref);
  c.clipped_tokens = analytic.clipped_tokens;
  std::set<RowKey> keys;
  for (const auto& item : in.batch)
    for (std::size_t t = 0; t < item.rollout->tokens.size(); ++t)
      keys.insert(in.params.key_at(item.rollout->prompt_bucket, item.rollout->tokens, t));
  for (RowKey k : keys) {
    for (int j = 0; j < in.params.vocab_size(); ++j) {
      PolicyParams plus = in.params, minus = in.params;
      plus.touch(k)[static_cast<std::size_t>(j)] += h;
      minus.touch(k)[static_cast<std::size_t>(j)] -= h;
      const double fd = static_cast<double>((objective(in, plus) - objective(in, minus)) / (2.0L * h));
      double a = 0.0;
      if (auto it = analytic.gradient.find(k); it != analytic.gradient.end()) a = it->second[static_cast<std::size_t>(j)];
      const double scale = std::max(std::fabs(a), std::fabs(fd));
      if (scale > 1e-7) c.max_rel_error = std::max(c.max_rel_error, std::fabs(a - fd) / scale);
      else c.max_abs_small = std::max(c.max_abs_small, std::fabs(a - fd));
      ++c.entries;
    }
  }
  return c;
}

}  // namespace gradcheck
