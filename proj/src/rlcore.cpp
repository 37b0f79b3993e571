#include "funrl/rlcore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace funrl::rl {


std::vector<double> group_advantages(std::span<const double> rewards) {
  const std::size_t n = rewards.size();
  if (n < 2) throw DegenerateGroup("group needs at least two rewards, got " + std::to_string(n));
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(n);
  std::vector<double> out(n, 0.0);
  if (var == 0.0) return out;
  const double sd = std::sqrt(var);
  for (std::size_t i = 0; i < n; ++i) out[i] = (rewards[i] - mean) / sd;
  return out;
}

std::string_view to_string(EntropyMode mode) { return mode == EntropyMode::Plugin ? "plugin" : "full"; }
std::string_view to_string(EntropyAggregation aggregation) {
  return aggregation == EntropyAggregation::Sum ? "sum" : "mean_per_token";
}

EntropyMode entropy_mode_from_string(std::string_view name) {
  if (name == "plugin") return EntropyMode::Plugin;
  if (name == "full") return EntropyMode::Full;
  throw std::invalid_argument("unknown entropy mode: " + std::string(name));
}

EntropyAggregation entropy_aggregation_from_string(std::string_view name) {
  if (name == "sum") return EntropyAggregation::Sum;
  if (name == "mean_per_token" || name == "mean") return EntropyAggregation::MeanPerToken;
  throw std::invalid_argument("unknown entropy aggregation: " + std::string(name));
}

namespace {

double neg_p_log_p(double p) { return p > 0.0 ? -p * std::log(p) : 0.0; }

}  // namespace

double cot_entropy(std::span<const Rollout> group, EntropyMode mode, EntropyAggregation aggregation) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& rollout : group) {
    for (std::size_t t = rollout.cot.begin; t < rollout.cot.end; ++t) {
      if (mode == EntropyMode::Plugin) {
        total += neg_p_log_p(rollout.chosen_prob.at(t));
      } else {
        for (double p : rollout.step_dists.at(t)) total += neg_p_log_p(p);
      }
      ++count;
    }
  }
  if (aggregation == EntropyAggregation::MeanPerToken) return count == 0 ? 0.0 : total / static_cast<double>(count);
  return total;
}

nlohmann::json to_json(const AdvantageReport& report) {
  return {{"base", report.base},
          {"entropy", report.entropy},
          {"adjusted", report.adjusted},
          {"clip_bound_hits", report.clip_bound_hits}};
}

std::vector<double> adjust_advantages(std::span<const double> base, double entropy, double lambda, double alpha) {
  std::vector<double> out(base.size());
  const double bonus = lambda * entropy;
  for (std::size_t i = 0; i < base.size(); ++i) out[i] = base[i] + std::min(bonus, std::abs(base[i]) / alpha);
  return out;
}

AdvantageReport advantage_report(std::span<const double> rewards, double entropy, double lambda, double alpha) {
  AdvantageReport report;
  report.base = group_advantages(rewards);
  report.entropy = entropy;
  if (lambda == 0.0) {
    report.adjusted = report.base;
    return report;
  }
  report.adjusted = adjust_advantages(report.base, entropy, lambda, alpha);
  const double bonus = lambda * entropy;
  for (double a : report.base)
    if (std::abs(a) / alpha < bonus) ++report.clip_bound_hits;
  return report;
}

double categorical_kl(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size())
    throw SupportMismatch("support sizes differ: " + std::to_string(p.size()) + " vs " + std::to_string(q.size()));
  const double sp = std::accumulate(p.begin(), p.end(), 0.0);
  const double sq = std::accumulate(q.begin(), q.end(), 0.0);
  if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9) throw SupportMismatch("distribution does not sum to 1");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || q[i] < 0.0) throw SupportMismatch("negative probability");
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) throw SupportMismatch("q has zero mass where p > 0");
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(kl, 0.0);
}

double clipped_surrogate(std::span<const double> ratios, std::span<const double> advantages, double epsilon,
                         std::span<const double> kl_terms, double beta) {
  if (ratios.size() != advantages.size() || ratios.size() != kl_terms.size())
    throw LengthMismatch("ratios, advantages and kl terms must have equal lengths");
  if (ratios.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t t = 0; t < ratios.size(); ++t) {
    const double rho = ratios[t];
    const double adv = advantages[t];
    const double clipped = std::clamp(rho, 1.0 - epsilon, 1.0 + epsilon);
    total += std::min(rho * adv, clipped * adv) - beta * kl_terms[t];
  }
  return total / static_cast<double>(ratios.size());
}

}  // namespace funrl::rl

namespace funrl {

std::vector<double> Rollout::cot_chosen_probs() const {
  return {chosen_prob.begin() + static_cast<std::ptrdiff_t>(cot.begin),
          chosen_prob.begin() + static_cast<std::ptrdiff_t>(cot.end)};
}

}  // namespace funrl
