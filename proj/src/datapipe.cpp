#include "funrl/datapipe.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "funrl/callspec.hpp"
#include "funrl/callspec_json.hpp"

namespace funrl::pipe {

Json request_body(const EvaluationRequest& request) {
  const Sample& s = *request.sample;
  std::string instruction =
      request.instruction == Instruction::Evaluate
          ? "Check whether the answer correctly resolves the query with the given tools. "
            "Reply with a line PASS, or FAIL: <reason>."
          : "The answer was rejected (" + request.feedback +
                "). Reply with a corrected answer in the \"answer\" field.";
  return {{"query", s.query}, {"tools", callspec::tools_to_json(s.tools)}, {"answer", request.answer},
          {"instruction", instruction}};
}

namespace {

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

EvaluatorReply parse_reply(const Json& reply) {
  EvaluatorReply out;
  if (!reply.is_object()) throw std::runtime_error("evaluator reply is not a JSON object");
  std::string text;
  for (const char* key : {"verdict", "content", "text"}) {
    if (auto it = reply.find(key); it != reply.end() && it->is_string()) {
      text = it->get<std::string>();
      break;
    }
  }
  bool found = false;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    line = trim(line);
    if (line == "PASS") {
      out.passed = true;
      found = true;
      break;
    }
    if (line.rfind("FAIL", 0) == 0) {
      out.passed = false;
      auto colon = line.find(':');
      out.reason = colon == std::string::npos ? "" : trim(line.substr(colon + 1));
      found = true;
      break;
    }
  }
  for (const char* key : {"answer", "corrected_answer"}) {
    if (auto it = reply.find(key); it != reply.end() && it->is_string()) {
      out.answer = it->get<std::string>();
      break;
    }
  }
  if (!found && !out.answer) throw std::runtime_error("evaluator reply carries neither a verdict nor an answer");
  return out;
}

// ---------------------------------------------------------------------------

EvaluatorReply RuleBasedEvaluator::evaluate(const EvaluationRequest& request) const {
  if (trim(request.answer).empty()) return {false, "empty answer", std::nullopt};
  if (auto calls = callspec::parse_call_list(request.answer)) {
    for (const auto& call : calls->calls)
      if (request.sample->query.find(call.name) == std::string::npos)
        return {false, "query does not ask for " + call.name, std::nullopt};
  }
  return {true, "", std::nullopt};
}

std::string RuleBasedEvaluator::regenerate(const EvaluationRequest& request) const { return request.answer; }

ScriptedEvaluator ScriptedEvaluator::from_json(const Json& doc) {
  if (!doc.is_object()) throw std::runtime_error("evaluator script must be a JSON object");
  std::map<std::string, ScriptPlan> plans;
  for (const auto& [id, entry] : doc.items()) {
    ScriptPlan plan;
    if (entry.is_string()) {
      auto kind = entry.get<std::string>();
      if (kind == "pass") plan.kind = ScriptPlan::Kind::Pass;
      else if (kind == "fail") plan.kind = ScriptPlan::Kind::FailAlways;
      else if (kind == "unavailable") plan.kind = ScriptPlan::Kind::Unavailable;
      else throw std::runtime_error("unknown script plan '" + kind + "' for " + id);
    } else if (entry.is_object() && entry.contains("correct_on")) {
      plan.kind = ScriptPlan::Kind::CorrectOn;
      plan.correct_on = entry.at("correct_on").get<int>();
      plan.corrected_answer = entry.value("answer", std::string());
      if (plan.correct_on < 1) throw std::runtime_error("correct_on must be at least 1 for " + id);
    } else {
      throw std::runtime_error("malformed script plan for " + id);
    }
    plans.emplace(id, std::move(plan));
  }
  return ScriptedEvaluator(std::move(plans));
}

const ScriptPlan* ScriptedEvaluator::plan_for(const EvaluationRequest& request) const {
  auto it = plans_.find(request.sample->id);
  return it == plans_.end() ? nullptr : &it->second;
}

EvaluatorReply ScriptedEvaluator::evaluate(const EvaluationRequest& request) const {
  const ScriptPlan* plan = plan_for(request);
  if (!plan) return {true, "", std::nullopt};
  switch (plan->kind) {
    case ScriptPlan::Kind::Pass: return {true, "", std::nullopt};
    case ScriptPlan::Kind::FailAlways: return {false, "scripted failure", std::nullopt};
    case ScriptPlan::Kind::Unavailable: throw EvaluatorUnavailable("scripted transport failure");
    case ScriptPlan::Kind::CorrectOn:
      if (request.attempt >= plan->correct_on) return {true, "", std::nullopt};
      return {false, "scripted failure before correction", std::nullopt};
  }
  return {true, "", std::nullopt};
}

std::string ScriptedEvaluator::regenerate(const EvaluationRequest& request) const {
  const ScriptPlan* plan = plan_for(request);
  if (plan && plan->kind == ScriptPlan::Kind::CorrectOn && request.attempt == plan->correct_on)
    return plan->corrected_answer;
  return request.answer;
}

// ---------------------------------------------------------------------------

LlmOutcome llm_stage(const Sample& sample, const Evaluator& evaluator, int max_regenerations) {
  EvaluationRequest request;
  request.sample = &sample;
  request.answer = sample.reference;
  int evaluations = 0;
  for (int attempt = 0;; ++attempt) {
    request.attempt = attempt;
    request.instruction = Instruction::Evaluate;
    EvaluatorReply reply = evaluator.evaluate(request);
    ++evaluations;
    if (reply.passed) {
      LlmRetained kept{sample, attempt > 0, evaluations};
      kept.sample.reference = request.answer;
      return kept;
    }
    if (attempt >= max_regenerations) return LlmDropped{evaluations};
    request.instruction = Instruction::Regenerate;
    request.feedback = reply.reason;
    request.attempt = attempt + 1;
    request.answer = evaluator.regenerate(request);
  }
}

std::optional<AstDrop> ast_stage(const Sample& sample) {
  auto parsed = callspec::parse_call_list(sample.reference);
  if (parsed) {
    for (const auto& call : parsed->calls)
      if (!callspec::validate_against_schema(call, sample.tools).empty()) return AstDrop::RuleI;
    return std::nullopt;
  }
  if (sample.category != Category::Irrelevance) return AstDrop::RuleII;
  return std::nullopt;
}

Json to_json(const PipelineStats& stats) {
  return {{"input_count", stats.input_count},
          {"after_llm_count", stats.after_llm_count},
          {"after_ast_count", stats.after_ast_count},
          {"drop_reasons",
           {{"llm_exhausted", stats.llm_exhausted}, {"ast_rule_i", stats.ast_rule_i}, {"ast_rule_ii", stats.ast_rule_ii}}},
          {"corrected", stats.corrected},
          {"deferred", stats.deferred}};
}

std::string format_stats(const PipelineStats& stats) {
  std::ostringstream os;
  char line[128];
  std::snprintf(line, sizeof line, "%-24s %10s\n", "stage", "samples");
  os << line;
  std::snprintf(line, sizeof line, "%-24s %10zu\n", "raw", stats.input_count);
  os << line;
  std::snprintf(line, sizeof line, "%-24s %10zu\n", "after LLM evaluation", stats.after_llm_count);
  os << line;
  std::snprintf(line, sizeof line, "%-24s %10zu\n", "after AST evaluation", stats.after_ast_count);
  os << line;
  return os.str();
}

namespace {

struct Outcome {
  enum class Kind { Retained, LlmDropped, RuleI, RuleII, Deferred } kind = Kind::Deferred;
  Sample sample;
  bool corrected = false;
};

Outcome process(const Sample& sample, const Evaluator& evaluator, int max_regenerations) {
  Outcome out;
  try {
    auto stage1 = llm_stage(sample, evaluator, max_regenerations);
    if (std::holds_alternative<LlmDropped>(stage1)) {
      out.kind = Outcome::Kind::LlmDropped;
      return out;
    }
    auto& kept = std::get<LlmRetained>(stage1);
    out.corrected = kept.corrected;
    if (auto drop = ast_stage(kept.sample)) {
      out.kind = *drop == AstDrop::RuleI ? Outcome::Kind::RuleI : Outcome::Kind::RuleII;
      return out;
    }
    out.kind = Outcome::Kind::Retained;
    out.sample = std::move(kept.sample);
  } catch (const EvaluatorUnavailable&) {
    out.kind = Outcome::Kind::Deferred;
  }
  return out;
}

}  // namespace

PipelineResult run_pipeline(const std::vector<Sample>& input, const Evaluator& evaluator,
                            const PipelineOptions& options) {
  std::vector<Outcome> outcomes(input.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(options.parallelism, input.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < input.size(); ++i) outcomes[i] = process(input[i], evaluator, options.max_regenerations);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < input.size(); i = next++) {
          try {
            outcomes[i] = process(input[i], evaluator, options.max_regenerations);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  PipelineResult result;
  auto& st = result.stats;
  st.input_count = input.size();
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    auto& o = outcomes[i];
    switch (o.kind) {
      case Outcome::Kind::Deferred: st.deferred.push_back(input[i].id); continue;
      case Outcome::Kind::LlmDropped: ++st.llm_exhausted; continue;
      case Outcome::Kind::RuleI: ++st.ast_rule_i; break;
      case Outcome::Kind::RuleII: ++st.ast_rule_ii; break;
      case Outcome::Kind::Retained: result.retained.push_back(std::move(o.sample)); break;
    }
    ++st.after_llm_count;
    if (o.corrected) ++st.corrected;
  }
  st.after_ast_count = result.retained.size();
  return result;
}

std::string system_prompt(const Sample& sample) {
  return "You are given a user request and a list of callable tools described in JSON.\n"
         "Reason step by step inside <think></think>. Then, inside <answer></answer>, write the tool calls as "
         "[tool_name(arg_name=value, ...), ...] using keyword arguments only, or reply in plain text when no "
         "tool fits the request or a required argument is missing.\n"
         "Tools:\n" +
         callspec::tools_to_json(sample.tools).dump();
}

Json conversation_record(const Sample& sample) {
  return {{"id", sample.id}, {"system", system_prompt(sample)}, {"user", sample.query}, {"reference", sample.reference}};
}

}  // namespace funrl::pipe
