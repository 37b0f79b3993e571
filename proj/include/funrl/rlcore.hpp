#pragma once

// Group-relative advantages, CoT entropy, the entropy-clipped advantage
// adjustment, exact categorical KL and the clipped surrogate objective.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "funrl/rollout.hpp"

namespace funrl::rl {

class DegenerateGroup : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};
class SupportMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};
class LengthMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// (r_i - mean) / std with the population std. A zero-variance group yields
/// all zeros. Throws DegenerateGroup for fewer than two rewards.
std::vector<double> group_advantages(std::span<const double> rewards);

enum class EntropyMode { Plugin, Full };
enum class EntropyAggregation { Sum, MeanPerToken };

std::string_view to_string(EntropyMode mode);
std::string_view to_string(EntropyAggregation aggregation);
EntropyMode entropy_mode_from_string(std::string_view name);
EntropyAggregation entropy_aggregation_from_string(std::string_view name);

/// Entropy of the CoT tokens of a group of rollouts, natural log.
///   Plugin: -sum p(c) log p(c) over the sampled CoT tokens' chosen probabilities.
///   Full:   the full categorical entropy at each CoT position.
/// MeanPerToken divides the double sum by the total CoT token count.
double cot_entropy(std::span<const Rollout> group, EntropyMode mode, EntropyAggregation aggregation);

struct AdvantageReport {
  std::vector<double> base;
  double entropy = 0.0;
  std::vector<double> adjusted;
  std::size_t clip_bound_hits = 0;
};

nlohmann::json to_json(const AdvantageReport& report);

/// A + min(lambda * E, |A| / alpha) for every entry.
std::vector<double> adjust_advantages(std::span<const double> base, double entropy, double lambda, double alpha);

/// Advantages for one group; the entropy adjustment is skipped when lambda == 0.
AdvantageReport advantage_report(std::span<const double> rewards, double entropy, double lambda, double alpha);

/// Exact sum p log(p/q). Throws SupportMismatch on size mismatch, unnormalized
/// input, or q == 0 where p > 0.
double categorical_kl(std::span<const double> p, std::span<const double> q);

/// Mean over tokens of min(rho*A, clip(rho, 1-eps, 1+eps)*A) - beta*KL_t.
double clipped_surrogate(std::span<const double> ratios, std::span<const double> advantages, double epsilon,
                         std::span<const double> kl_terms, double beta);

/// True when the min of the surrogate picks the clipped (constant) branch.
inline bool surrogate_clipped(double ratio, double advantage, double epsilon) {
  double lo = 1.0 - epsilon, hi = 1.0 + epsilon;
  double clipped = ratio < lo ? lo : (ratio > hi ? hi : ratio);
  return clipped * advantage < ratio * advantage;
}

}  // namespace funrl::rl
