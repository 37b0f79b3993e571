#pragma once

// GRPO / FunRL training loop over the tabular policy.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "funrl/policy.hpp"
#include "funrl/rlcore.hpp"
#include "funrl/sample.hpp"
#include "funrl/taskbench.hpp"

namespace funrl::train {

using Json = nlohmann::ordered_json;

enum class Algorithm { Grpo, FunRl };
std::string_view to_string(Algorithm algorithm);
Algorithm algorithm_from_string(std::string_view name);

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct TrainConfig {
  Algorithm algorithm = Algorithm::FunRl;
  int group_size = 8;
  int batch_size = 16;               // queries per step
  int epochs = 8;
  int steps = 0;                     // > 0 overrides the epoch-derived step count
  double learning_rate = 1000.0;  // applied to a token-mean gradient
  double epsilon = 0.2;
  double beta = 0.001;
  double lambda = 2.0;
  double alpha = 0.1;
  rl::EntropyMode entropy_mode = rl::EntropyMode::Plugin;
  rl::EntropyAggregation entropy_aggregation = rl::EntropyAggregation::MeanPerToken;
  bool adjust_answer_tokens = true;  // false: answer tokens keep the unadjusted advantage
  int max_response_length = 48;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;

  int context_window = 3;
  std::uint32_t buckets = 65536;
  double temperature = 1.0;
  double prior_strength = 10.0;      // 0 disables the grammar prior

  int checkpoint_every = 0;          // 0: only the final checkpoint

  /// Throws ConfigError.
  void validate() const;
};

Json to_json(const TrainConfig& config);
/// Overlays the keys present in `doc` onto `base`; unknown keys are errors.
TrainConfig config_from_json(const Json& doc, TrainConfig base = {});

struct StepMetrics {
  std::size_t step = 0;
  double mean_reward = 0.0;
  double mean_kl = 0.0;              // KL(pi || pi_ref) per token at sampling time
  double mean_entropy = 0.0;         // mean over groups of the CoT entropy E
  double format_failure_rate = 0.0;
  double clip_hit_fraction = 0.0;    // rollouts where min(lambda E, |A|/alpha) took |A|/alpha
  double ratio_clip_fraction = 0.0;  // tokens on the clipped surrogate branch
  double zero_variance_fraction = 0.0;
  double mean_length = 0.0;
  double wall_clock_ms = 0.0;        // kept out of the deterministic metric files
};

/// Deterministic fields only.
Json to_json(const StepMetrics& metrics);
std::string csv_header();
std::string to_csv_row(const StepMetrics& metrics);

/// Prompt text the policy conditions on: the query plus the tool names.
std::string prompt_text(const Sample& sample);

struct Split {
  std::vector<Sample> train;
  std::vector<Sample> holdout;
};
/// Seeded holdout of floor(fraction * n) samples; both parts keep input order.
Split split_dataset(const std::vector<Sample>& dataset, double fraction, std::uint64_t seed);

struct TrainOptions {
  std::filesystem::path out_dir;     // empty: no files written
  std::filesystem::path resume_from; // a step_N checkpoint directory
  bool write_timing = true;
};

struct TrainResult {
  policy::PolicyParams params;
  std::vector<StepMetrics> metrics;  // this run only (resumed runs start after the checkpoint)
  std::vector<std::filesystem::path> checkpoints;
  bench::EvalReport holdout_report;
  std::size_t train_size = 0;
  std::size_t holdout_size = 0;
};

class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(const std::string& what, std::size_t step, std::filesystem::path diagnostics)
      : std::runtime_error(what), step_(step), diagnostics_(std::move(diagnostics)) {}
  std::size_t step() const { return step_; }
  const std::filesystem::path& diagnostics() const { return diagnostics_; }

 private:
  std::size_t step_;
  std::filesystem::path diagnostics_;
};

policy::PolicyParams initial_params(const TrainConfig& config, const policy::TokenVocab& vocab);

/// Total steps implied by the config for a training set of `train_size`.
std::size_t planned_steps(const TrainConfig& config, std::size_t train_size);

/// Throws ConfigError for invalid configs or an empty dataset, and
/// TrainingAborted when a gradient is not finite.
TrainResult train(const TrainConfig& config, const std::vector<Sample>& dataset, const TrainOptions& options = {});

/// Greedy decoding with the grammar prior; one response per sample id.
std::map<std::string, std::string> greedy_responses(const policy::PolicyParams& params, const TrainConfig& config,
                                                    const std::vector<Sample>& samples);

bench::EvalReport validate(const policy::PolicyParams& params, const TrainConfig& config,
                           const std::vector<Sample>& holdout);

}  // namespace funrl::train
