#include "funrl/policy.hpp"

#include <algorithm>

namespace funrl::policy {

namespace {

bool value_fits(const callspec::Value& value, const callspec::ParamSpec& spec) {
  using callspec::TypeTag;
  if (spec.type == TypeTag::Enum)
    return value.is<std::string>() &&
           std::find(spec.enum_values.begin(), spec.enum_values.end(), value.as<std::string>()) !=
               spec.enum_values.end();
  return value.tag() == spec.type;
}

}  // namespace

GrammarPrior::GrammarPrior(const TokenVocab& vocab, const std::vector<callspec::ToolSchema>& tools,
                           std::span<const int> word_tokens, double strength)
    : vocab_size_(vocab.size()),
      open_bracket_(vocab.require("[")),
      close_bracket_(vocab.require("]")),
      open_paren_(vocab.require("(")),
      close_paren_(vocab.require(")")),
      comma_(vocab.require(",")),
      equals_(vocab.require("=")),
      words_(word_tokens.begin(), word_tokens.end()),
      strength_(strength) {
  // Literal tokens (quoted strings, numbers, booleans) in vocabulary order.
  std::vector<std::pair<int, callspec::Value>> literals;
  for (int id = TokenVocab::kReservedCount; id < vocab.size(); ++id) {
    const auto& text = vocab.token(id);
    if (callspec::is_identifier(text) && text != "true" && text != "false" && text != "True" && text != "False")
      continue;
    if (auto v = callspec::parse_value(text)) literals.emplace_back(id, *v);
  }
  for (const auto& tool : tools) {
    if (tool.params.size() > 64) throw std::invalid_argument("grammar prior supports at most 64 params per tool");
    ToolInfo info;
    if (auto id = vocab.id(tool.name)) info.token = *id;
    for (std::size_t i = 0; i < tool.params.size(); ++i) {
      const auto& spec = tool.params[i];
      auto id = vocab.id(spec.name);
      info.param_tokens.push_back(id ? *id : -1);
      std::vector<int> values;
      for (const auto& [lit_id, lit] : literals)
        if (value_fits(lit, spec)) values.push_back(lit_id);
      info.value_tokens.push_back(std::move(values));
      if (spec.required) info.required |= (std::uint64_t{1} << i);
    }
    tools_.push_back(std::move(info));
  }
}

bool GrammarPrior::all_required(const State& s) const {
  const auto& tool = tools_[static_cast<std::size_t>(s.tool)];
  return (s.used & tool.required) == tool.required;
}

bool GrammarPrior::unused_left(const State& s) const {
  const auto& tool = tools_[static_cast<std::size_t>(s.tool)];
  for (std::size_t i = 0; i < tool.param_tokens.size(); ++i)
    if (tool.param_tokens[i] >= 0 && !(s.used & (std::uint64_t{1} << i))) return true;
  return false;
}

int GrammarPrior::param_index(int tool, int token) const {
  const auto& params = tools_[static_cast<std::size_t>(tool)].param_tokens;
  auto it = std::find(params.begin(), params.end(), token);
  return it == params.end() ? -1 : static_cast<int>(it - params.begin());
}

std::vector<int> GrammarPrior::allowed(const State& s) const {
  std::vector<int> out;
  auto unused_params = [&] {
    const auto& tool = tools_[static_cast<std::size_t>(s.tool)];
    for (std::size_t i = 0; i < tool.param_tokens.size(); ++i)
      if (tool.param_tokens[i] >= 0 && !(s.used & (std::uint64_t{1} << i))) out.push_back(tool.param_tokens[i]);
  };
  switch (s.phase) {
    case Phase::Start: out = {TokenVocab::kThinkOpen}; break;
    case Phase::Think:
      out = words_;
      out.push_back(TokenVocab::kThinkClose);
      break;
    case Phase::AfterThink: out = {TokenVocab::kAnswerOpen}; break;
    case Phase::AnswerStart: {
      bool any_tool = std::any_of(tools_.begin(), tools_.end(), [](const ToolInfo& t) { return t.token >= 0; });
      if (any_tool) out.push_back(open_bracket_);
      out.insert(out.end(), words_.begin(), words_.end());
      break;
    }
    case Phase::FreeText:
      out = words_;
      out.push_back(TokenVocab::kAnswerClose);
      break;
    case Phase::ExpectTool:
      for (const auto& t : tools_)
        if (t.token >= 0) out.push_back(t.token);
      break;
    case Phase::ExpectOpen: out = {open_paren_}; break;
    case Phase::AfterOpen:
      unused_params();
      if (all_required(s)) out.push_back(close_paren_);
      break;
    case Phase::AfterArgComma: unused_params(); break;
    case Phase::ExpectEquals: out = {equals_}; break;
    case Phase::ExpectValue:
      out = tools_[static_cast<std::size_t>(s.tool)].value_tokens[static_cast<std::size_t>(s.param)];
      break;
    case Phase::AfterValue:
      if (unused_left(s)) out.push_back(comma_);
      if (all_required(s)) out.push_back(close_paren_);
      break;
    case Phase::AfterCall: out = {comma_, close_bracket_}; break;
    case Phase::AfterList: out = {TokenVocab::kAnswerClose}; break;
    case Phase::AfterAnswer: out = {TokenVocab::kEnd}; break;
    case Phase::Done:
    case Phase::Off: break;
  }
  return out;
}

void GrammarPrior::bias(const State& state, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (int id : allowed(state))
    if (id >= 0 && id < static_cast<int>(out.size())) out[static_cast<std::size_t>(id)] = strength_;
}

GrammarPrior::State GrammarPrior::advance(const State& state, int token) const {
  if (state.phase == Phase::Off || state.phase == Phase::Done) return state;
  auto ok = allowed(state);
  if (std::find(ok.begin(), ok.end(), token) == ok.end()) return State{Phase::Off};
  State next = state;
  switch (state.phase) {
    case Phase::Start: next.phase = Phase::Think; break;
    case Phase::Think: next.phase = token == TokenVocab::kThinkClose ? Phase::AfterThink : Phase::Think; break;
    case Phase::AfterThink: next.phase = Phase::AnswerStart; break;
    case Phase::AnswerStart: next.phase = token == open_bracket_ ? Phase::ExpectTool : Phase::FreeText; break;
    case Phase::FreeText: next.phase = token == TokenVocab::kAnswerClose ? Phase::AfterAnswer : Phase::FreeText; break;
    case Phase::ExpectTool: {
      auto it = std::find_if(tools_.begin(), tools_.end(), [&](const ToolInfo& t) { return t.token == token; });
      next.tool = static_cast<int>(it - tools_.begin());
      next.used = 0;
      next.param = -1;
      next.phase = Phase::ExpectOpen;
      break;
    }
    case Phase::ExpectOpen: next.phase = Phase::AfterOpen; break;
    case Phase::AfterOpen:
    case Phase::AfterArgComma:
      if (token == close_paren_) {
        next.phase = Phase::AfterCall;
      } else {
        next.param = param_index(state.tool, token);
        next.used |= std::uint64_t{1} << next.param;
        next.phase = Phase::ExpectEquals;
      }
      break;
    case Phase::ExpectEquals: next.phase = Phase::ExpectValue; break;
    case Phase::ExpectValue: next.phase = Phase::AfterValue; break;
    case Phase::AfterValue: next.phase = token == comma_ ? Phase::AfterArgComma : Phase::AfterCall; break;
    case Phase::AfterCall: next.phase = token == comma_ ? Phase::ExpectTool : Phase::AfterList; break;
    case Phase::AfterList: next.phase = Phase::AfterAnswer; break;
    case Phase::AfterAnswer: next.phase = Phase::Done; break;
    case Phase::Done:
    case Phase::Off: break;
  }
  return next;
}

}  // namespace funrl::policy
