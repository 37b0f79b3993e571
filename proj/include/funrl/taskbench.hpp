#pragma once

// Seeded synthetic function-calling samples across the single-turn benchmark
// categories, and per-category AST accuracy for any response source.

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "funrl/rewardkit.hpp"
#include "funrl/rng.hpp"
#include "funrl/sample.hpp"
#include "funrl/vocab.hpp"

namespace funrl::bench {

using Json = nlohmann::ordered_json;

enum class TemplateSet { Train, HeldOut };

/// Every token the generator can put into a reference answer, plus the
/// filler words used for reasoning and free-text answers.
policy::TokenVocab task_vocab();
std::vector<int> word_tokens(const policy::TokenVocab& vocab);

/// difficulty in {1, 2, 3}; throws std::invalid_argument otherwise.
Sample generate_sample(Rng& rng, Category category, int difficulty, TemplateSet templates = TemplateSet::Train);

struct GenerationSpec {
  std::uint64_t seed = 0;
  std::map<Category, std::size_t> counts;
  int difficulty = 1;
  TemplateSet templates = TemplateSet::Train;
};

/// Samples are emitted category by category in canonical order with ids
/// "<category>-<index>".
std::vector<Sample> generate_dataset(const GenerationSpec& spec);

Json sample_to_json(const Sample& sample);
/// Throws std::runtime_error on malformed records.
Sample sample_from_json(const Json& record);
std::string dataset_to_jsonl(const std::vector<Sample>& samples);
std::vector<Sample> read_dataset(const std::filesystem::path& path);

class MissingResponse : public std::runtime_error {
 public:
  explicit MissingResponse(const std::string& id) : std::runtime_error("no response for sample " + id), id_(id) {}
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

struct CategoryScore {
  std::size_t count = 0;
  std::size_t correct = 0;
  double accuracy() const { return count == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(count); }
};

struct EvalReport {
  std::map<Category, CategoryScore> per_category;  // only categories present in the dataset
  double overall = 0.0;        // unweighted mean of category accuracies
  double micro = 0.0;          // per-sample accuracy
  std::size_t total = 0;
  std::map<reward::FailureReason, std::size_t> failures;
};

Json to_json(const EvalReport& report);
/// Fixed-width table of the per-category accuracies.
std::string format_report(const EvalReport& report);

EvalReport evaluate(const std::map<std::string, std::string>& responses, const std::vector<Sample>& dataset);

}  // namespace funrl::bench
