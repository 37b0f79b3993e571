#pragma once

// Two-stage cleaning: LLM evaluation with bounded regeneration, then AST
// checks of the reference against the tool set.

#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "funrl/sample.hpp"

namespace funrl::pipe {

using Json = nlohmann::ordered_json;

enum class Instruction { Evaluate, Regenerate };

struct EvaluationRequest {
  const Sample* sample = nullptr;
  std::string answer;       // the (possibly regenerated) reference under review
  Instruction instruction = Instruction::Evaluate;
  int attempt = 0;          // 0 for the original answer, k for the k-th regeneration
  std::string feedback;     // FAIL reason of the preceding evaluation, if any
};

/// Wire body: {query, tools, answer, instruction}.
Json request_body(const EvaluationRequest& request);

struct EvaluatorReply {
  bool passed = false;
  std::string reason;
  std::optional<std::string> answer;  // regenerated answer
};

/// Reads a reply document. The verdict is the first line equal to `PASS` or
/// starting with `FAIL` in the "verdict" (or "content") field; the
/// regenerated answer comes from "answer" or "corrected_answer".
EvaluatorReply parse_reply(const Json& reply);

/// Transport failure; the sample is deferred rather than dropped.
class EvaluatorUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Implementations must be safe to call concurrently.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual EvaluatorReply evaluate(const EvaluationRequest& request) const = 0;
  virtual std::string regenerate(const EvaluationRequest& request) const = 0;
};

/// Deterministic offline judge. Fails an answer that is blank, or a call list
/// naming a function the query never mentions; regeneration returns the
/// answer unchanged.
class RuleBasedEvaluator final : public Evaluator {
 public:
  EvaluatorReply evaluate(const EvaluationRequest& request) const override;
  std::string regenerate(const EvaluationRequest& request) const override;
};

/// Per-sample plan for the scripted mock. Samples without a plan pass.
struct ScriptPlan {
  enum class Kind { Pass, FailAlways, CorrectOn, Unavailable };
  Kind kind = Kind::Pass;
  int correct_on = 0;             // CorrectOn: the regeneration number that passes
  std::string corrected_answer;   // CorrectOn: answer returned by that regeneration
};

class ScriptedEvaluator final : public Evaluator {
 public:
  explicit ScriptedEvaluator(std::map<std::string, ScriptPlan> plans) : plans_(std::move(plans)) {}
  /// {"<sample id>": "pass" | "fail" | "unavailable" | {"correct_on": k, "answer": "..."}}
  static ScriptedEvaluator from_json(const Json& doc);

  EvaluatorReply evaluate(const EvaluationRequest& request) const override;
  std::string regenerate(const EvaluationRequest& request) const override;

 private:
  const ScriptPlan* plan_for(const EvaluationRequest& request) const;
  std::map<std::string, ScriptPlan> plans_;
};

struct HttpEvaluatorConfig {
  std::string url;                      // http(s)://host[:port]/path
  std::chrono::milliseconds timeout{30000};
  int retries = 2;                      // extra attempts after a transport failure
  std::string auth_header;              // sent as "Authorization" when non-empty
};

/// POSTs the request body as JSON and parses the reply with parse_reply.
class HttpEvaluator final : public Evaluator {
 public:
  explicit HttpEvaluator(HttpEvaluatorConfig config);

  EvaluatorReply evaluate(const EvaluationRequest& request) const override;
  std::string regenerate(const EvaluationRequest& request) const override;

 private:
  Json post(const Json& body) const;
  HttpEvaluatorConfig config_;
  std::string scheme_host_port_;
  std::string path_;
};

struct LlmRetained {
  Sample sample;
  bool corrected = false;
  int evaluations = 0;
};
struct LlmDropped {
  int evaluations = 0;
};
using LlmOutcome = std::variant<LlmRetained, LlmDropped>;

/// At most `max_regenerations` regenerations after the initial evaluation.
/// Throws EvaluatorUnavailable on transport failure.
LlmOutcome llm_stage(const Sample& sample, const Evaluator& evaluator, int max_regenerations = 3);

enum class AstDrop { RuleI, RuleII };

/// rule (i): the reference parses but a call fails schema validation;
/// rule (ii): a tool call is required but the reference does not parse.
std::optional<AstDrop> ast_stage(const Sample& sample);

struct PipelineStats {
  std::size_t input_count = 0;
  std::size_t after_llm_count = 0;
  std::size_t after_ast_count = 0;
  std::size_t llm_exhausted = 0;
  std::size_t ast_rule_i = 0;
  std::size_t ast_rule_ii = 0;
  std::size_t corrected = 0;
  std::vector<std::string> deferred;  // ids whose evaluator calls failed in transport
};

Json to_json(const PipelineStats& stats);
/// Three-row retention table: raw, after LLM evaluation, after AST evaluation.
std::string format_stats(const PipelineStats& stats);

struct PipelineOptions {
  int max_regenerations = 3;
  std::size_t parallelism = 1;
};

struct PipelineResult {
  std::vector<Sample> retained;  // input order
  PipelineStats stats;
};

PipelineResult run_pipeline(const std::vector<Sample>& input, const Evaluator& evaluator,
                            const PipelineOptions& options = {});

/// The system prompt given to the policy for a sample: the instruction
/// template with the tool set embedded as JSON.
std::string system_prompt(const Sample& sample);

/// {system, user, reference} per retained sample.
Json conversation_record(const Sample& sample);

}  // namespace funrl::pipe
