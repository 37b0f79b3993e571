#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "funrl/policy.hpp"
#include "funrl/vocab.hpp"

namespace funrl::policy {

inline constexpr int kCheckpointVersion = 1;

struct PolicyCheckpoint {
  PolicyParams params;
  TokenVocab vocab;
};

/// {"version", "config", "vocab": [...], "rows": [{"bucket", "context", "logits"}]}
/// with rows sorted by key. Doubles are written in shortest round-trip form.
nlohmann::ordered_json params_to_json(const PolicyParams& params, const TokenVocab& vocab);
/// Throws std::runtime_error on version or shape mismatch.
PolicyCheckpoint params_from_json(const nlohmann::ordered_json& doc);

void save_params(const std::filesystem::path& path, const PolicyParams& params, const TokenVocab& vocab);
PolicyCheckpoint load_params(const std::filesystem::path& path);

}  // namespace funrl::policy
