#include "funrl/rewardkit.hpp"

#include <array>

namespace funrl::reward {

std::string_view to_string(FormatError error) {
  switch (error) {
    case FormatError::MissingThink: return "MissingThink";
    case FormatError::MissingAnswer: return "MissingAnswer";
    case FormatError::ExtraneousText: return "ExtraneousText";
    case FormatError::DuplicateTag: return "DuplicateTag";
    case FormatError::WrongOrder: return "WrongOrder";
  }
  return "unknown";
}

std::string_view to_string(FailureReason reason) {
  switch (reason) {
    case FailureReason::BadFormat: return "BadFormat";
    case FailureReason::ParseFailedButCallExpected: return "ParseFailedButCallExpected";
    case FailureReason::ParsedButTextExpected: return "ParsedButTextExpected";
    case FailureReason::Mismatch: return "Mismatch";
  }
  return "unknown";
}

namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::size_t count_of(std::string_view text, std::string_view tag) {
  std::size_t n = 0;
  for (auto pos = text.find(tag); pos != std::string_view::npos; pos = text.find(tag, pos + tag.size())) ++n;
  return n;
}

}  // namespace

Expected<SectionedResponse, FormatError> extract_sections(std::string_view text) {
  text = trim(text);
  constexpr std::array tags{kThinkOpen, kThinkClose, kAnswerOpen, kAnswerClose};
  std::array<std::size_t, 4> counts{};
  for (std::size_t i = 0; i < tags.size(); ++i) counts[i] = count_of(text, tags[i]);
  for (auto c : counts)
    if (c > 1) return FormatError::DuplicateTag;
  if (counts[0] == 0 || counts[1] == 0) return FormatError::MissingThink;
  if (counts[2] == 0 || counts[3] == 0) return FormatError::MissingAnswer;

  const auto think_open = text.find(kThinkOpen);
  const auto think_close = text.find(kThinkClose);
  const auto answer_open = text.find(kAnswerOpen);
  const auto answer_close = text.find(kAnswerClose);
  if (!(think_open < think_close && think_close < answer_open && answer_open < answer_close))
    return FormatError::WrongOrder;
  if (think_open != 0) return FormatError::ExtraneousText;
  const auto between_start = think_close + kThinkClose.size();
  if (!trim(text.substr(between_start, answer_open - between_start)).empty()) return FormatError::ExtraneousText;
  if (answer_close + kAnswerClose.size() != text.size()) return FormatError::ExtraneousText;

  const auto cot_start = think_open + kThinkOpen.size();
  const auto ans_start = answer_open + kAnswerOpen.size();
  return SectionedResponse{std::string(text.substr(cot_start, think_close - cot_start)),
                           std::string(text.substr(ans_start, answer_close - ans_start))};
}

Reference::Reference(std::string_view text) {
  if (auto parsed = callspec::parse_call_list(text)) calls_ = std::move(parsed).value();
}

RewardBreakdown compute_reward(std::string_view response, const Reference& reference) {
  RewardBreakdown out;
  auto sections = extract_sections(response);
  if (!sections) {
    out.failure_reason = FailureReason::BadFormat;
    out.format_error = sections.error();
    return out;
  }
  out.format_ok = true;
  auto answer = callspec::parse_call_list(sections->answer_text);
  out.parse_ok = answer.has_value();
  if (reference.expects_call()) {
    if (!out.parse_ok) {
      out.failure_reason = FailureReason::ParseFailedButCallExpected;
      return out;
    }
    out.match_ok = callspec::calls_match(*answer, reference.calls());
    if (!out.match_ok) {
      out.failure_reason = FailureReason::Mismatch;
      return out;
    }
  } else {
    if (out.parse_ok) {
      out.failure_reason = FailureReason::ParsedButTextExpected;
      return out;
    }
    out.match_ok = true;
  }
  out.reward = 1;
  return out;
}

RewardBreakdown compute_reward(std::string_view response, const Sample& sample) {
  return compute_reward(response, Reference(sample.reference));
}

}  // namespace funrl::reward
