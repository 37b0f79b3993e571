#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "funrl/callspec.hpp"
#include "funrl/expected.hpp"
#include "funrl/sample.hpp"

namespace funrl::reward {

struct SectionedResponse {
  std::string cot_text;
  std::string answer_text;
};

enum class FormatError { MissingThink, MissingAnswer, ExtraneousText, DuplicateTag, WrongOrder };

std::string_view to_string(FormatError error);

/// Accepts exactly `<think>...</think>` followed by `<answer>...</answer>`,
/// optionally separated by whitespace, with surrounding whitespace trimmed.
Expected<SectionedResponse, FormatError> extract_sections(std::string_view text);

enum class FailureReason { BadFormat, ParseFailedButCallExpected, ParsedButTextExpected, Mismatch };

std::string_view to_string(FailureReason reason);

struct RewardBreakdown {
  int reward = 0;
  bool format_ok = false;
  bool parse_ok = false;
  bool match_ok = false;
  std::optional<FailureReason> failure_reason;
  std::optional<FormatError> format_error;
};

/// A reference answer with its kind resolved once: a parsed call list, or
/// free text when parsing fails.
class Reference {
 public:
  explicit Reference(std::string_view text);

  bool expects_call() const { return calls_.has_value(); }
  const callspec::CallList& calls() const { return *calls_; }

 private:
  std::optional<callspec::CallList> calls_;
};

RewardBreakdown compute_reward(std::string_view response, const Reference& reference);
RewardBreakdown compute_reward(std::string_view response, const Sample& sample);

}  // namespace funrl::reward
