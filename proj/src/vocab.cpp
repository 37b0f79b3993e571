#include "funrl/vocab.hpp"

namespace funrl::policy {

TokenVocab::TokenVocab(const std::vector<std::string>& tokens)
    : tokens_{"<s>", "</s>", "<think>", "</think>", "<answer>", "</answer>"} {
  tokens_.insert(tokens_.end(), tokens.begin(), tokens.end());
  if (tokens_.size() > static_cast<std::size_t>(kMaxSize))
    throw std::invalid_argument("vocabulary exceeds " + std::to_string(kMaxSize) + " tokens");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) throw std::invalid_argument("empty token");
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second)
      throw std::invalid_argument("duplicate token '" + tokens_[i] + "'");
  }
}

std::optional<int> TokenVocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int TokenVocab::require(std::string_view token) const {
  auto found = id(token);
  if (!found) throw std::out_of_range("token not in vocabulary: " + std::string(token));
  return *found;
}

std::string TokenVocab::render(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (id == kBegin || id == kEnd) continue;
    if (!out.empty()) out.push_back(' ');
    out += token(id);
  }
  return out;
}

}  // namespace funrl::policy
