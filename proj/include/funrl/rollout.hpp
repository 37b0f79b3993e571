#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace funrl {

/// Half-open token index range [begin, end).
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool empty() const { return end <= begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
  friend bool operator==(const Span&, const Span&) = default;
};

/// One sampled response: emitted token ids (the begin token is implicit and
/// never stored), the CoT and answer spans located between the tag tokens,
/// and the sampling-time probabilities.
struct Rollout {
  std::string prompt_id;
  std::uint32_t prompt_bucket = 0;
  std::vector<int> tokens;
  Span cot;
  Span answer;
  std::vector<double> chosen_prob;               // pi_old(token_t | prefix)
  std::vector<std::vector<double>> step_dists;  // full pi_old(. | prefix) per step
  bool terminal = false;                         // ended on the end token

  /// Chosen probabilities of the CoT tokens only.
  std::vector<double> cot_chosen_probs() const;
};

}  // namespace funrl
