#include "funrl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "funrl/checkpoint.hpp"
#include "funrl/io.hpp"
#include "funrl/rewardkit.hpp"

namespace funrl::train {

std::string_view to_string(Algorithm algorithm) { return algorithm == Algorithm::Grpo ? "grpo" : "funrl"; }

Algorithm algorithm_from_string(std::string_view name) {
  if (name == "grpo") return Algorithm::Grpo;
  if (name == "funrl") return Algorithm::FunRl;
  throw ConfigError("unknown algorithm: " + std::string(name));
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(group_size >= 2, "group_size must be at least 2");
  require(batch_size >= 1, "batch_size must be at least 1");
  require(epochs >= 1 || steps > 0, "epochs must be at least 1 when steps is not set");
  require(steps >= 0, "steps must be non-negative");
  require(std::isfinite(learning_rate) && learning_rate >= 0.0, "learning_rate must be finite and non-negative");
  require(epsilon > 0.0 && epsilon < 1.0, "epsilon must be in (0, 1)");
  require(std::isfinite(beta) && beta >= 0.0, "beta must be non-negative");
  require(std::isfinite(lambda) && lambda >= 0.0, "lambda must be non-negative");
  require(std::isfinite(alpha) && alpha > 0.0, "alpha must be positive");
  require(max_response_length >= 1, "max_response_length must be at least 1");
  require(validation_fraction >= 0.0 && validation_fraction < 1.0, "validation_fraction must be in [0, 1)");
  require(context_window >= 1 && context_window <= 4, "context_window must be in [1, 4]");
  require(buckets >= 1, "buckets must be positive");
  require(std::isfinite(temperature) && temperature > 0.0, "temperature must be positive");
  require(std::isfinite(prior_strength) && prior_strength >= 0.0, "prior_strength must be non-negative");
  require(checkpoint_every >= 0, "checkpoint_every must be non-negative");
}

Json to_json(const TrainConfig& c) {
  return {{"algorithm", std::string(to_string(c.algorithm))},
          {"group_size", c.group_size},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"steps", c.steps},
          {"learning_rate", c.learning_rate},
          {"epsilon", c.epsilon},
          {"beta", c.beta},
          {"lambda", c.lambda},
          {"alpha", c.alpha},
          {"entropy_mode", std::string(rl::to_string(c.entropy_mode))},
          {"entropy_aggregation", std::string(rl::to_string(c.entropy_aggregation))},
          {"adjust_answer_tokens", c.adjust_answer_tokens},
          {"max_response_length", c.max_response_length},
          {"validation_fraction", c.validation_fraction},
          {"seed", c.seed},
          {"context_window", c.context_window},
          {"buckets", c.buckets},
          {"temperature", c.temperature},
          {"prior_strength", c.prior_strength},
          {"checkpoint_every", c.checkpoint_every}};
}

TrainConfig config_from_json(const Json& doc, TrainConfig c) {
  if (!doc.is_object()) throw ConfigError("training config must be a JSON object");
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "algorithm") c.algorithm = algorithm_from_string(value.get<std::string>());
      else if (key == "group_size") c.group_size = value.get<int>();
      else if (key == "batch_size") c.batch_size = value.get<int>();
      else if (key == "epochs") c.epochs = value.get<int>();
      else if (key == "steps") c.steps = value.get<int>();
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "epsilon") c.epsilon = value.get<double>();
      else if (key == "beta") c.beta = value.get<double>();
      else if (key == "lambda") c.lambda = value.get<double>();
      else if (key == "alpha") c.alpha = value.get<double>();
      else if (key == "entropy_mode") c.entropy_mode = rl::entropy_mode_from_string(value.get<std::string>());
      else if (key == "entropy_aggregation")
        c.entropy_aggregation = rl::entropy_aggregation_from_string(value.get<std::string>());
      else if (key == "adjust_answer_tokens") c.adjust_answer_tokens = value.get<bool>();
      else if (key == "max_response_length") c.max_response_length = value.get<int>();
      else if (key == "validation_fraction") c.validation_fraction = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "context_window") c.context_window = value.get<int>();
      else if (key == "buckets") c.buckets = value.get<std::uint32_t>();
      else if (key == "temperature") c.temperature = value.get<double>();
      else if (key == "prior_strength") c.prior_strength = value.get<double>();
      else if (key == "checkpoint_every") c.checkpoint_every = value.get<int>();
      else throw ConfigError("unknown training config key: " + key);
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad training config value: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

Json to_json(const StepMetrics& m) {
  return {{"step", m.step},
          {"mean_reward", m.mean_reward},
          {"mean_kl", m.mean_kl},
          {"mean_entropy", m.mean_entropy},
          {"format_failure_rate", m.format_failure_rate},
          {"clip_hit_fraction", m.clip_hit_fraction},
          {"ratio_clip_fraction", m.ratio_clip_fraction},
          {"zero_variance_fraction", m.zero_variance_fraction},
          {"mean_length", m.mean_length}};
}

std::string csv_header() {
  return "step,mean_reward,mean_kl,mean_entropy,format_failure_rate,clip_hit_fraction,ratio_clip_fraction,"
         "zero_variance_fraction,mean_length";
}

std::string to_csv_row(const StepMetrics& m) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", m.step, m.mean_reward,
                m.mean_kl, m.mean_entropy, m.format_failure_rate, m.clip_hit_fraction, m.ratio_clip_fraction,
                m.zero_variance_fraction, m.mean_length);
  return buf;
}

std::string prompt_text(const Sample& sample) {
  std::string out = sample.query;
  out += "\ntools:";
  for (const auto& tool : sample.tools) {
    out += " " + tool.name + "(";
    for (std::size_t i = 0; i < tool.params.size(); ++i) out += (i ? "," : "") + tool.params[i].name;
    out += ")";
  }
  return out;
}

Split split_dataset(const std::vector<Sample>& dataset, double fraction, std::uint64_t seed) {
  const std::size_t n = dataset.size();
  const auto n_holdout = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng::stream(seed, "split");
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<bool> held(n, false);
  for (std::size_t i = 0; i < n_holdout; ++i) held[order[i]] = true;
  Split split;
  for (std::size_t i = 0; i < n; ++i) (held[i] ? split.holdout : split.train).push_back(dataset[i]);
  return split;
}

policy::PolicyParams initial_params(const TrainConfig& config, const policy::TokenVocab& vocab) {
  return policy::PolicyParams(
      {vocab.size(), config.context_window, config.buckets, config.temperature});
}

std::size_t planned_steps(const TrainConfig& config, std::size_t train_size) {
  if (config.steps > 0) return static_cast<std::size_t>(config.steps);
  const auto per_epoch = (train_size + static_cast<std::size_t>(config.batch_size) - 1) /
                         static_cast<std::size_t>(config.batch_size);
  return static_cast<std::size_t>(config.epochs) * std::max<std::size_t>(per_epoch, 1);
}

namespace {

/// Per-sample data reused across steps.
struct Prepared {
  const Sample* sample;
  std::string prompt;
  reward::Reference reference;
  std::optional<policy::GrammarPrior> prior;
};

std::vector<Prepared> prepare(const std::vector<Sample>& samples, const TrainConfig& config,
                              const policy::TokenVocab& vocab) {
  const auto words = bench::word_tokens(vocab);
  std::vector<Prepared> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    Prepared p{&s, prompt_text(s), reward::Reference(s.reference), std::nullopt};
    if (config.prior_strength > 0.0) p.prior.emplace(vocab, s.tools, words, config.prior_strength);
    out.push_back(std::move(p));
  }
  return out;
}

std::string step_dir_name(std::size_t step) { return "step_" + std::to_string(step); }

void write_checkpoint(const std::filesystem::path& dir, const policy::PolicyParams& params,
                      const policy::TokenVocab& vocab, const TrainConfig& config, std::size_t step, const Rng& batch_rng,
                      const Rng& rollout_rng) {
  std::filesystem::create_directories(dir);
  policy::save_params(dir / "params", params, vocab);
  Json rng = {{"step", step}, {"batch", batch_rng.save()}, {"rollout", rollout_rng.save()}};
  io::write_file_atomic(dir / "rng", rng.dump() + "\n");
  io::write_file_atomic(dir / "config", to_json(config).dump(2) + "\n");
}

}  // namespace

std::map<std::string, std::string> greedy_responses(const policy::PolicyParams& params, const TrainConfig& config,
                                                    const std::vector<Sample>& samples) {
  const auto vocab = bench::task_vocab();
  const auto prepared = prepare(samples, config, vocab);
  std::map<std::string, std::string> out;
  for (const auto& p : prepared) {
    policy::SampleOptions opts{config.max_response_length, p.prior ? &*p.prior : nullptr, p.sample->id};
    auto rollout = policy::greedy_rollout(params, p.prompt, opts);
    out[p.sample->id] = vocab.render(rollout.tokens);
  }
  return out;
}

bench::EvalReport validate(const policy::PolicyParams& params, const TrainConfig& config,
                           const std::vector<Sample>& holdout) {
  return bench::evaluate(greedy_responses(params, config, holdout), holdout);
}

TrainResult train(const TrainConfig& config, const std::vector<Sample>& dataset, const TrainOptions& options) {
  config.validate();
  if (dataset.empty()) throw ConfigError("training dataset is empty");
  const auto vocab = bench::task_vocab();
  Split split = split_dataset(dataset, config.validation_fraction, config.seed);
  if (split.train.empty()) throw ConfigError("no training samples left after the validation split");
  const auto prepared = prepare(split.train, config, vocab);

  TrainResult result{initial_params(config, vocab), {}, {}, {}, split.train.size(), split.holdout.size()};
  const policy::PolicyParams ref_params = initial_params(config, vocab);
  Rng batch_rng = Rng::stream(config.seed, "batch");
  Rng rollout_rng = Rng::stream(config.seed, "rollout");
  std::size_t start_step = 0;

  if (!options.resume_from.empty()) {
    auto ckpt = policy::load_params(options.resume_from / "params");
    if (!(ckpt.vocab == vocab)) throw ConfigError("checkpoint vocabulary does not match the task vocabulary");
    if (!(ckpt.params.config() == result.params.config()))
      throw ConfigError("checkpoint policy shape does not match the config");
    auto saved = config_from_json(Json::parse(io::read_file(options.resume_from / "config")));
    if (saved.seed != config.seed) throw ConfigError("checkpoint seed differs from the config seed");
    auto rng = Json::parse(io::read_file(options.resume_from / "rng"));
    start_step = rng.at("step").get<std::size_t>();
    batch_rng.load(rng.at("batch").get<std::string>());
    rollout_rng.load(rng.at("rollout").get<std::string>());
    result.params = std::move(ckpt.params);
  }

  std::filesystem::path metrics_jsonl, metrics_csv, timing_jsonl;
  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    metrics_jsonl = options.out_dir / "metrics.jsonl";
    metrics_csv = options.out_dir / "metrics.csv";
    timing_jsonl = options.out_dir / "timing.jsonl";
    if (start_step == 0) {
      io::write_file_atomic(metrics_jsonl, "");
      io::write_file_atomic(metrics_csv, csv_header() + "\n");
      if (options.write_timing) io::write_file_atomic(timing_jsonl, "");
    }
  }

  const std::size_t total_steps = planned_steps(config, split.train.size());
  const auto group = static_cast<std::size_t>(config.group_size);
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), prepared.size());
  std::vector<std::size_t> order(prepared.size());

  for (std::size_t step = start_step; step < total_steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();

    // Batch: a fresh partial shuffle of the training indices.
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < batch; ++i) std::swap(order[i], order[i + batch_rng.below(order.size() - i)]);

    std::vector<Rollout> rollouts;
    rollouts.reserve(batch * group);
    std::vector<policy::ScoredRollout> scored;
    scored.reserve(batch * group);
    StepMetrics m;
    m.step = step;
    std::size_t format_failures = 0, zero_variance = 0, clip_hits = 0, length_total = 0;
    double reward_total = 0.0, entropy_total = 0.0;

    for (std::size_t b = 0; b < batch; ++b) {
      const Prepared& p = prepared[order[b]];
      const policy::GrammarPrior* prior = p.prior ? &*p.prior : nullptr;
      const std::size_t first = rollouts.size();
      std::vector<double> rewards;
      for (std::size_t s = 0; s < group; ++s) {
        Rng member(rollout_rng.next());
        policy::SampleOptions opts{config.max_response_length, prior, p.sample->id};
        rollouts.push_back(policy::sample_rollout(result.params, p.prompt, member, opts));
        auto breakdown = reward::compute_reward(vocab.render(rollouts.back().tokens), p.reference);
        rewards.push_back(breakdown.reward);
        if (!breakdown.format_ok) ++format_failures;
        length_total += rollouts.back().tokens.size();
      }
      std::span<const Rollout> members(rollouts.data() + first, group);
      const double entropy = rl::cot_entropy(members, config.entropy_mode, config.entropy_aggregation);
      const double lambda = config.algorithm == Algorithm::FunRl ? config.lambda : 0.0;
      auto report = rl::advantage_report(rewards, entropy, lambda, config.alpha);
      if (std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards.front(); })) ++zero_variance;
      clip_hits += report.clip_bound_hits;
      entropy_total += entropy;
      reward_total += std::accumulate(rewards.begin(), rewards.end(), 0.0);

      for (std::size_t s = 0; s < group; ++s) {
        const Rollout& r = rollouts[first + s];
        std::vector<double> adv(r.tokens.size(), report.adjusted[s]);
        if (!config.adjust_answer_tokens)
          for (std::size_t t = 0; t < adv.size(); ++t)
            if (!r.cot.contains(t)) adv[t] = report.base[s];
        scored.push_back({&r, std::move(adv), prior});
      }
    }

    auto surrogate = policy::surrogate_gradient(result.params, scored, config.epsilon, config.beta, ref_params);
    const double n_rollouts = static_cast<double>(batch * group);
    m.mean_reward = reward_total / n_rollouts;
    m.mean_kl = surrogate.mean_kl;
    m.mean_entropy = entropy_total / static_cast<double>(batch);
    m.format_failure_rate = static_cast<double>(format_failures) / n_rollouts;
    m.clip_hit_fraction = static_cast<double>(clip_hits) / n_rollouts;
    m.ratio_clip_fraction =
        surrogate.tokens ? static_cast<double>(surrogate.clipped_tokens) / static_cast<double>(surrogate.tokens) : 0.0;
    m.zero_variance_fraction = static_cast<double>(zero_variance) / static_cast<double>(batch);
    m.mean_length = static_cast<double>(length_total) / n_rollouts;

    try {
      policy::apply_update(result.params, surrogate.gradient, config.learning_rate);
    } catch (const policy::NonFiniteGradient& e) {
      std::filesystem::path diag;
      if (!options.out_dir.empty()) {
        diag = options.out_dir / ("diagnostics_step_" + std::to_string(step) + ".json");
        Json d = {{"step", step}, {"error", e.what()}, {"metrics", to_json(m)}, {"config", to_json(config)}};
        io::write_file_atomic(diag, d.dump(2) + "\n");
      }
      throw TrainingAborted(std::string(e.what()) + " at step " + std::to_string(step), step, diag);
    }

    m.wall_clock_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.metrics.push_back(m);
    if (!metrics_jsonl.empty()) {
      io::append_line(metrics_jsonl, to_json(m).dump());
      io::append_line(metrics_csv, to_csv_row(m));
      if (options.write_timing) {
        Json timing = {{"step", m.step}, {"wall_clock_ms", m.wall_clock_ms}};
        io::append_line(timing_jsonl, timing.dump());
      }
    }

    const std::size_t done = step + 1;
    const bool periodic = config.checkpoint_every > 0 && done % static_cast<std::size_t>(config.checkpoint_every) == 0;
    if (!options.out_dir.empty() && (periodic || done == total_steps)) {
      auto dir = options.out_dir / "checkpoints" / step_dir_name(done);
      write_checkpoint(dir, result.params, vocab, config, done, batch_rng, rollout_rng);
      result.checkpoints.push_back(dir);
    }
  }

  if (!split.holdout.empty()) result.holdout_report = validate(result.params, config, split.holdout);
  return result;
}

}  // namespace funrl::train
