#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace funrl::policy {

/// Dense id <-> token string map. Ids 0..5 are the reserved tokens.
class TokenVocab {
 public:
  static constexpr int kBegin = 0;
  static constexpr int kEnd = 1;
  static constexpr int kThinkOpen = 2;
  static constexpr int kThinkClose = 3;
  static constexpr int kAnswerOpen = 4;
  static constexpr int kAnswerClose = 5;
  static constexpr int kReservedCount = 6;
  static constexpr int kMaxSize = 256;

  /// Reserved tokens are prepended; throws std::invalid_argument on duplicates
  /// or when the vocabulary would exceed kMaxSize.
  explicit TokenVocab(const std::vector<std::string>& tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::optional<int> id(std::string_view token) const;
  /// Throws std::out_of_range when the token is unknown.
  int require(std::string_view token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Space-joined text of the ids, begin/end tokens omitted.
  std::string render(std::span<const int> ids) const;

  friend bool operator==(const TokenVocab& a, const TokenVocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace funrl::policy
