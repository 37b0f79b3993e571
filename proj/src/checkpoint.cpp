#include "funrl/checkpoint.hpp"

#include <algorithm>
#include <stdexcept>

#include "funrl/io.hpp"

namespace funrl::policy {

using Json = nlohmann::ordered_json;

Json params_to_json(const PolicyParams& params, const TokenVocab& vocab) {
  const auto& cfg = params.config();
  std::vector<RowKey> keys;
  keys.reserve(params.row_count());
  for (const auto& [key, row] : params.rows()) keys.push_back(key);
  std::sort(keys.begin(), keys.end());

  Json rows = Json::array();
  for (RowKey key : keys) {
    Json context = Json::array();
    for (int i = 0; i < cfg.context_window; ++i) context.push_back(static_cast<int>((key >> (8 * i)) & 0xff));
    rows.push_back({{"bucket", static_cast<std::uint32_t>(key >> 32)}, {"context", context}, {"logits", *params.row(key)}});
  }
  std::vector<std::string> extra(vocab.tokens().begin() + TokenVocab::kReservedCount, vocab.tokens().end());
  return {{"version", kCheckpointVersion},
          {"config",
           {{"vocab_size", cfg.vocab_size},
            {"context_window", cfg.context_window},
            {"buckets", cfg.buckets},
            {"temperature", cfg.temperature}}},
          {"vocab", extra},
          {"rows", rows}};
}

PolicyCheckpoint params_from_json(const Json& doc) {
  if (doc.value("version", -1) != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version");
  const auto& c = doc.at("config");
  PolicyConfig cfg;
  cfg.vocab_size = c.at("vocab_size").get<int>();
  cfg.context_window = c.at("context_window").get<int>();
  cfg.buckets = c.at("buckets").get<std::uint32_t>();
  cfg.temperature = c.at("temperature").get<double>();
  TokenVocab vocab(doc.at("vocab").get<std::vector<std::string>>());
  if (vocab.size() != cfg.vocab_size) throw std::runtime_error("checkpoint vocab does not match its vocab_size");
  PolicyParams params(cfg);
  for (const auto& row : doc.at("rows")) {
    auto context = row.at("context").get<std::vector<int>>();
    auto logits = row.at("logits").get<std::vector<double>>();
    if (logits.size() != static_cast<std::size_t>(cfg.vocab_size)) throw std::runtime_error("checkpoint row width mismatch");
    params.touch(params.key(row.at("bucket").get<std::uint32_t>(), context)) = std::move(logits);
  }
  return {std::move(params), std::move(vocab)};
}

void save_params(const std::filesystem::path& path, const PolicyParams& params, const TokenVocab& vocab) {
  io::write_file_atomic(path, params_to_json(params, vocab).dump() + "\n");
}

PolicyCheckpoint load_params(const std::filesystem::path& path) {
  try {
    return params_from_json(Json::parse(io::read_file(path)));
  } catch (const Json::exception& e) {
    throw std::runtime_error("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace funrl::policy
