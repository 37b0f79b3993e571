#include "funrl/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "funrl/checkpoint.hpp"
#include "funrl/datapipe.hpp"
#include "funrl/io.hpp"
#include "funrl/rewardkit.hpp"
#include "funrl/taskbench.hpp"
#include "funrl/trainer.hpp"

namespace funrl::cli {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

/// Bad config or input; maps to exit code 2.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string algorithm;
  std::string out;
  std::string dataset;
  std::string resume;
  std::string checkpoint;
  std::string responses;
  std::string input;
  std::string output;
  std::string evaluator;
  std::optional<double> lambda, alpha, beta, learning_rate;
  std::optional<int> steps;
};

/// Config file merged with flags; flags win.
struct RunConfig {
  Json doc = Json::object();
  Flags flags;

  std::string path_value(const std::string& flag, const char* key) const {
    if (!flag.empty()) return flag;
    if (doc.contains(key)) return doc.at(key).get<std::string>();
    return {};
  }
  std::optional<std::uint64_t> seed() const {
    if (flags.seed) return flags.seed;
    if (doc.contains("seed")) return doc.at("seed").get<std::uint64_t>();
    return std::nullopt;
  }
  std::uint64_t require_seed() const {
    auto s = seed();
    if (!s) throw InputError("a seed is required (set \"seed\" in the config or pass --seed)");
    return *s;
  }
  fs::path out_dir() const {
    auto out = path_value(flags.out, "out");
    if (out.empty()) throw InputError("an output directory is required (--out or \"out\")");
    return out;
  }
  fs::path existing(const std::string& flag, const char* key) const {
    auto p = path_value(flag, key);
    if (p.empty()) throw InputError(std::string("missing required path: ") + key);
    if (!fs::exists(p)) throw InputError("no such file: " + p);
    return p;
  }
  const Json& section(const char* key) const {
    static const Json empty = Json::object();
    return doc.contains(key) ? doc.at(key) : empty;
  }

  train::TrainConfig train_config() const {
    auto c = train::config_from_json(section("train"));
    if (auto s = seed()) c.seed = *s;
    if (!flags.algorithm.empty()) c.algorithm = train::algorithm_from_string(flags.algorithm);
    if (flags.lambda) c.lambda = *flags.lambda;
    if (flags.alpha) c.alpha = *flags.alpha;
    if (flags.beta) c.beta = *flags.beta;
    if (flags.learning_rate) c.learning_rate = *flags.learning_rate;
    if (flags.steps) c.steps = *flags.steps;
    c.validate();
    return c;
  }
};

RunConfig load_config(const Flags& flags) {
  RunConfig rc;
  rc.flags = flags;
  if (!flags.config.empty()) {
    if (!fs::exists(flags.config)) throw InputError("no such config file: " + flags.config);
    try {
      rc.doc = Json::parse(io::read_file(flags.config));
    } catch (const Json::parse_error& e) {
      throw InputError("config is not valid JSON: " + std::string(e.what()));
    }
    if (!rc.doc.is_object()) throw InputError("config must be a JSON object");
  }
  return rc;
}

Json breakdown_json(const reward::RewardBreakdown& b) {
  Json j = {{"reward", b.reward}, {"format_ok", b.format_ok}, {"parse_ok", b.parse_ok}, {"match_ok", b.match_ok}};
  j["failure_reason"] = b.failure_reason ? Json(std::string(reward::to_string(*b.failure_reason))) : Json(nullptr);
  j["format_error"] = b.format_error ? Json(std::string(reward::to_string(*b.format_error))) : Json(nullptr);
  return j;
}

int cmd_gen_data(const RunConfig& rc, std::ostream& out) {
  const Json& gen = rc.section("generation");
  bench::GenerationSpec spec;
  spec.seed = rc.require_seed();
  spec.difficulty = gen.value("difficulty", 1);
  const auto templates = gen.value("templates", std::string("train"));
  if (templates == "train") spec.templates = bench::TemplateSet::Train;
  else if (templates == "held_out") spec.templates = bench::TemplateSet::HeldOut;
  else throw InputError("templates must be \"train\" or \"held_out\"");
  if (!gen.contains("counts") || !gen.at("counts").is_object()) throw InputError("generation.counts is required");
  std::size_t total = 0;
  for (const auto& [name, n] : gen.at("counts").items()) {
    const auto count = n.get<std::size_t>();
    spec.counts[category_from_string(name)] = count;
    total += count;
  }
  if (total == 0) throw InputError("generation counts sum to zero");
  if (spec.difficulty < 1 || spec.difficulty > 3) throw InputError("difficulty must be 1, 2 or 3");

  const auto dataset = bench::generate_dataset(spec);
  const fs::path dir = rc.out_dir();
  fs::create_directories(dir);
  io::write_file_atomic(dir / "dataset.jsonl", bench::dataset_to_jsonl(dataset));
  Json counts = Json::object();
  for (auto cat : kAllCategories)
    if (auto it = spec.counts.find(cat); it != spec.counts.end()) counts[std::string(to_string(cat))] = it->second;
  Json manifest = {{"seed", spec.seed},        {"difficulty", spec.difficulty}, {"templates", templates},
                   {"total", dataset.size()}, {"counts", counts},             {"dataset", "dataset.jsonl"}};
  io::write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  out << "wrote " << dataset.size() << " samples to " << (dir / "dataset.jsonl").string() << "\n";
  return kOk;
}

std::unique_ptr<pipe::Evaluator> make_evaluator(const RunConfig& rc, bool& remote) {
  const Json& p = rc.section("pipeline");
  std::string kind = rc.flags.evaluator.empty() ? p.value("evaluator", std::string("mock")) : rc.flags.evaluator;
  remote = false;
  if (kind == "mock") return std::make_unique<pipe::RuleBasedEvaluator>();
  if (kind == "scripted") {
    if (!p.contains("script")) throw InputError("pipeline.script is required for the scripted evaluator");
    const fs::path script = p.at("script").get<std::string>();
    if (!fs::exists(script)) throw InputError("no such script: " + script.string());
    return std::make_unique<pipe::ScriptedEvaluator>(pipe::ScriptedEvaluator::from_json(Json::parse(io::read_file(script))));
  }
  if (kind.rfind("http://", 0) == 0 || kind.rfind("https://", 0) == 0) {
    remote = true;
    pipe::HttpEvaluatorConfig cfg;
    cfg.url = kind;
    cfg.timeout = std::chrono::milliseconds(p.value("timeout_ms", 30000));
    cfg.retries = p.value("retries", 2);
    if (const char* token = std::getenv(kAuthTokenEnv); token && *token) cfg.auth_header = std::string("Bearer ") + token;
    return std::make_unique<pipe::HttpEvaluator>(cfg);
  }
  throw InputError("unknown evaluator: " + kind + " (expected mock, scripted or an http(s) URL)");
}

int cmd_clean(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const auto input = bench::read_dataset(rc.existing(rc.flags.dataset, "dataset"));
  bool remote = false;
  auto evaluator = make_evaluator(rc, remote);
  const Json& p = rc.section("pipeline");
  pipe::PipelineOptions options;
  options.max_regenerations = p.value("max_regenerations", 3);
  options.parallelism = p.value("parallelism", std::size_t{1});
  if (options.max_regenerations < 0 || options.parallelism < 1) throw InputError("bad pipeline settings");

  const auto result = pipe::run_pipeline(input, *evaluator, options);
  const fs::path dir = rc.out_dir();
  fs::create_directories(dir);
  io::write_file_atomic(dir / "clean.jsonl", bench::dataset_to_jsonl(result.retained));
  std::string conversations;
  for (const auto& s : result.retained) conversations += pipe::conversation_record(s).dump() + "\n";
  io::write_file_atomic(dir / "conversations.jsonl", conversations);
  io::write_file_atomic(dir / "clean_stats.json", pipe::to_json(result.stats).dump(2) + "\n");
  out << pipe::format_stats(result.stats);
  if (!result.stats.deferred.empty()) {
    err << result.stats.deferred.size() << " samples deferred: evaluator unreachable\n";
    return kServiceError;
  }
  return kOk;
}

int cmd_train(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  auto config = rc.train_config();
  rc.require_seed();
  const auto dataset = bench::read_dataset(rc.existing(rc.flags.dataset, "dataset"));
  train::TrainOptions options;
  options.out_dir = rc.out_dir();
  if (auto resume = rc.path_value(rc.flags.resume, "resume"); !resume.empty()) {
    if (!fs::exists(resume)) throw InputError("no such checkpoint: " + resume);
    options.resume_from = resume;
  }
  fs::create_directories(options.out_dir);
  io::write_file_atomic(options.out_dir / "config.json", train::to_json(config).dump(2) + "\n");
  try {
    auto result = train::train(config, dataset, options);
    if (result.holdout_size > 0)
      io::write_file_atomic(options.out_dir / "holdout_report.json", bench::to_json(result.holdout_report).dump(2) + "\n");
    const double last = result.metrics.empty() ? 0.0 : result.metrics.back().mean_reward;
    out << "trained " << result.metrics.size() << " steps on " << result.train_size << " samples; final mean reward "
        << last << "\n";
    if (result.holdout_size > 0) out << bench::format_report(result.holdout_report);
    return kOk;
  } catch (const train::TrainingAborted& e) {
    err << "training aborted: " << e.what() << "\n";
    if (!e.diagnostics().empty()) err << "diagnostics: " << e.diagnostics().string() << "\n";
    return kNumericError;
  }
}

int cmd_eval(const RunConfig& rc, std::ostream& out) {
  const auto dataset = bench::read_dataset(rc.existing(rc.flags.dataset, "dataset"));
  std::map<std::string, std::string> responses;
  if (auto path = rc.path_value(rc.flags.responses, "responses"); !path.empty()) {
    if (!fs::exists(path)) throw InputError("no such file: " + path);
    for (const auto& line : io::read_lines(path)) {
      auto j = Json::parse(line);
      responses[j.at("id").get<std::string>()] = j.at("response").get<std::string>();
    }
  } else {
    const fs::path ckpt = rc.existing(rc.flags.checkpoint, "checkpoint");
    auto config = rc.train_config();
    fs::path params_path = ckpt;
    if (fs::is_directory(ckpt)) {
      params_path = ckpt / "params";
      if (fs::exists(ckpt / "config"))
        config = train::config_from_json(Json::parse(io::read_file(ckpt / "config")));
    }
    if (!fs::exists(params_path)) throw InputError("no params in checkpoint " + ckpt.string());
    auto loaded = policy::load_params(params_path);
    if (!(loaded.vocab == bench::task_vocab())) throw InputError("checkpoint vocabulary does not match");
    responses = train::greedy_responses(loaded.params, config, dataset);
  }
  const auto report = bench::evaluate(responses, dataset);
  const fs::path dir = rc.out_dir();
  fs::create_directories(dir);
  io::write_file_atomic(dir / "eval_report.json", bench::to_json(report).dump(2) + "\n");
  out << bench::format_report(report);
  return kOk;
}

int cmd_reward_check(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const fs::path input = rc.existing(rc.flags.input, "input");
  std::map<std::string, Sample> by_id;
  if (auto ds = rc.path_value(rc.flags.dataset, "dataset"); !ds.empty()) {
    if (!fs::exists(ds)) throw InputError("no such file: " + ds);
    for (auto& s : bench::read_dataset(ds)) by_id.emplace(s.id, std::move(s));
  }
  std::string lines;
  std::size_t total = 0, rewarded = 0, errors = 0;
  std::istringstream in(io::read_file(input));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = Json::parse(line);
      const auto response = j.at("response").get<std::string>();
      Sample sample;
      if (j.contains("sample")) {
        sample = bench::sample_from_json(j.at("sample"));
      } else {
        const auto id = j.at("sample_id").get<std::string>();
        auto it = by_id.find(id);
        if (it == by_id.end()) throw std::runtime_error("unknown sample_id " + id);
        sample = it->second;
      }
      auto b = reward::compute_reward(response, sample);
      Json rec = {{"line", line_no}, {"id", sample.id}};
      rec.update(breakdown_json(b));
      lines += rec.dump() + "\n";
      ++total;
      rewarded += b.reward;
    } catch (const std::exception& e) {
      ++errors;
      err << "line " << line_no << ": " << e.what() << "\n";
      lines += Json({{"line", line_no}, {"error", e.what()}}).dump() + "\n";
    }
  }
  if (auto path = rc.path_value(rc.flags.output, "output"); !path.empty()) {
    io::write_file_atomic(path, lines);
  } else {
    const fs::path dir = rc.out_dir();
    fs::create_directories(dir);
    io::write_file_atomic(dir / "rewards.jsonl", lines);
  }
  out << "checked " << total << " responses: " << rewarded << " rewarded, " << (total - rewarded)
      << " unrewarded, " << errors << " errors\n";
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"FunRL: function-calling RL with entropy-adjusted advantages"};
  app.require_subcommand(1);
  Flags flags;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "JSON config file");
    sub->add_option("--seed", flags.seed, "seed (overrides the config)");
    sub->add_option("--out", flags.out, "output directory");
  };
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset and manifest");
  common(gen);
  auto* clean = app.add_subcommand("clean", "run the two-stage cleaning pipeline");
  common(clean);
  clean->add_option("--dataset", flags.dataset, "input dataset (JSONL)");
  clean->add_option("--evaluator", flags.evaluator, "mock, scripted or an http(s) URL");
  auto* trn = app.add_subcommand("train", "train the policy");
  common(trn);
  trn->add_option("--dataset", flags.dataset, "training dataset (JSONL)");
  trn->add_option("--algorithm", flags.algorithm, "grpo or funrl");
  trn->add_option("--resume", flags.resume, "checkpoint directory to resume from");
  trn->add_option("--lambda", flags.lambda, "entropy weight");
  trn->add_option("--alpha", flags.alpha, "clip scale");
  trn->add_option("--beta", flags.beta, "KL weight");
  trn->add_option("--lr", flags.learning_rate, "learning rate");
  trn->add_option("--steps", flags.steps, "number of steps");
  auto* ev = app.add_subcommand("eval", "score a checkpoint or a response file");
  common(ev);
  ev->add_option("--dataset", flags.dataset, "evaluation dataset (JSONL)");
  ev->add_option("--checkpoint", flags.checkpoint, "checkpoint directory or params file");
  ev->add_option("--responses", flags.responses, "JSONL of {id, response}");
  auto* rc_cmd = app.add_subcommand("reward-check", "score responses against their samples");
  common(rc_cmd);
  rc_cmd->add_option("--input", flags.input, "JSONL of {response, sample} or {response, sample_id}");
  rc_cmd->add_option("--dataset", flags.dataset, "dataset resolving sample_id");
  rc_cmd->add_option("--output", flags.output, "breakdown JSONL path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    const RunConfig rc = load_config(flags);
    if (gen->parsed()) return cmd_gen_data(rc, out);
    if (clean->parsed()) return cmd_clean(rc, out, err);
    if (trn->parsed()) return cmd_train(rc, out, err);
    if (ev->parsed()) return cmd_eval(rc, out);
    return cmd_reward_check(rc, out, err);
  } catch (const pipe::EvaluatorUnavailable& e) {
    err << "evaluator unavailable: " << e.what() << "\n";
    return kServiceError;
  } catch (const train::TrainingAborted& e) {
    err << "training aborted: " << e.what() << "\n";
    return kNumericError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
}

}  // namespace funrl::cli
