#include "funrl/taskbench.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "funrl/callspec_json.hpp"
#include "funrl/io.hpp"

namespace funrl {

std::string_view to_string(Category category) {
  switch (category) {
    case Category::Simple: return "simple";
    case Category::Multiple: return "multiple";
    case Category::Parallel: return "parallel";
    case Category::ParallelMultiple: return "parallel_multiple";
    case Category::Irrelevance: return "irrelevance";
  }
  return "unknown";
}

Category category_from_string(std::string_view name) {
  for (auto c : kAllCategories)
    if (to_string(c) == name) return c;
  throw std::invalid_argument("unknown category: " + std::string(name));
}

}  // namespace funrl

namespace funrl::bench {

using callspec::TypeTag;

namespace {

struct ToolWord {
  const char* name;
  const char* description;
};

constexpr ToolWord kTools[] = {
    {"get_weather", "Get the weather forecast."}, {"book_hotel", "Book a hotel room."},
    {"find_route", "Find a travel route."},       {"get_stock", "Get a stock quote."},
    {"send_email", "Send an email message."},     {"play_music", "Play a music playlist."},
    {"set_alarm", "Set an alarm."},               {"order_food", "Order a food delivery."},
};

struct ParamWord {
  const char* name;
  TypeTag type;
  std::vector<std::string> domain;  // token texts of admissible values
  const char* description;
};

const std::vector<ParamWord>& param_words() {
  static const std::vector<ParamWord> words = {
      {"city", TypeTag::Enum, {"paris", "tokyo", "lima"}, "City name."},
      {"unit", TypeTag::Enum, {"celsius", "kelvin"}, "Temperature unit."},
      {"day", TypeTag::Enum, {"today", "monday", "friday"}, "Day of the week."},
      {"genre", TypeTag::Enum, {"jazz", "rock"}, "Music genre."},
      {"mode", TypeTag::Enum, {"car", "walk", "bus"}, "Travel mode."},
      {"ticker", TypeTag::Enum, {"acme", "globex"}, "Company ticker."},
      {"count", TypeTag::Integer, {"1", "2", "3", "4"}, "How many items."},
      {"nights", TypeTag::Integer, {"1", "2", "3", "4"}, "Number of nights."},
      {"urgent", TypeTag::Boolean, {"true", "false"}, "Whether it is urgent."},
      {"budget", TypeTag::Float, {"0.5", "2.5"}, "Budget in thousands."},
  };
  return words;
}

constexpr const char* kWords[] = {"need", "check", "sorry", "none"};
constexpr const char* kTopics[] = {"cats", "rain", "space", "history", "poetry", "chess"};

const char* const kTrainTemplates[] = {"Please call {tool} with {args}.", "I want to {tool} using {args}.",
                                       "Could you run {tool} for {args}?"};
const char* const kHeldOutTemplates[] = {"Run {tool}: {args}.", "Need {tool} where {args}."};
const char* const kTrainIrrelevant[] = {"Tell me a joke about {topic}.", "Write a short poem on {topic}."};
const char* const kHeldOutIrrelevant[] = {"What do you think about {topic}?"};
constexpr const char* kFreeTextAnswer = "Sorry, none of the available tools can help with this request.";

template <typename T, std::size_t N>
const T& pick(Rng& rng, const T (&items)[N]) {
  return items[rng.below(N)];
}

std::string replace_all(std::string text, const std::string& key, const std::string& value) {
  for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size()))
    text.replace(pos, key.size(), value);
  return text;
}

/// k distinct indices out of n, in increasing order.
std::vector<std::size_t> choose(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

callspec::ToolSchema make_tool(Rng& rng, std::size_t tool_index, std::size_t param_count) {
  const auto& pw = param_words();
  callspec::ToolSchema tool;
  tool.name = kTools[tool_index].name;
  tool.description = kTools[tool_index].description;
  for (std::size_t i : choose(rng, pw.size(), param_count)) {
    callspec::ParamSpec spec;
    spec.name = pw[i].name;
    spec.type = pw[i].type;
    if (spec.type == TypeTag::Enum) spec.enum_values = pw[i].domain;
    spec.description = pw[i].description;
    spec.required = true;
    tool.params.push_back(std::move(spec));
  }
  return tool;
}

const ParamWord& word_for(const std::string& param) {
  for (const auto& w : param_words())
    if (param == w.name) return w;
  throw std::logic_error("unknown parameter word " + param);
}

std::size_t combinations(const callspec::ToolSchema& tool) {
  std::size_t n = 1;
  for (const auto& p : tool.params) n *= word_for(p.name).domain.size();
  return n;
}

callspec::FunctionCall make_call(Rng& rng, const callspec::ToolSchema& tool) {
  callspec::FunctionCall call;
  call.name = tool.name;
  for (const auto& p : tool.params) {
    const auto& domain = word_for(p.name).domain;
    const std::string& text = domain[rng.below(domain.size())];
    callspec::Value value;
    switch (p.type) {
      case TypeTag::Integer: value = callspec::Value(static_cast<std::int64_t>(std::stoll(text))); break;
      case TypeTag::Float: value = callspec::Value(std::stod(text)); break;
      case TypeTag::Boolean: value = callspec::Value(text == "true"); break;
      default: value = callspec::Value(text);
    }
    call.args.emplace_back(p.name, std::move(value));
  }
  return call;
}

std::string render_args(const callspec::FunctionCall& call) {
  std::string out;
  for (const auto& [key, value] : call.args) {
    if (!out.empty()) out += ", ";
    std::string text = value.is<std::string>() ? value.as<std::string>() : callspec::serialize_value(value);
    out += key + " " + text;
  }
  return out;
}

std::string render_call(Rng& rng, TemplateSet templates, const callspec::FunctionCall& call) {
  std::string tpl = templates == TemplateSet::Train ? pick(rng, kTrainTemplates) : pick(rng, kHeldOutTemplates);
  return replace_all(replace_all(tpl, "{tool}", call.name), "{args}", render_args(call));
}

std::size_t param_count_for(Rng& rng, int difficulty) {
  return static_cast<std::size_t>(rng.range(2 * difficulty - 1, 2 * difficulty));
}

/// Tool set with the given number of target tools first, then distractors;
/// the final order is shuffled.
std::vector<callspec::ToolSchema> make_tool_set(Rng& rng, std::size_t targets, std::size_t distractors,
                                                int difficulty, std::size_t min_combinations = 1) {
  const std::size_t n_tools = std::size(kTools);
  auto picked = choose(rng, n_tools, targets + distractors);
  for (std::size_t i = picked.size(); i > 1; --i) std::swap(picked[i - 1], picked[rng.below(i)]);
  std::vector<callspec::ToolSchema> tools;
  for (std::size_t i = 0; i < picked.size(); ++i) {
    auto tool = make_tool(rng, picked[i], param_count_for(rng, difficulty));
    while (i < targets && combinations(tool) < min_combinations)
      tool = make_tool(rng, picked[i], param_count_for(rng, difficulty));
    tools.push_back(std::move(tool));
  }
  return tools;
}

std::vector<callspec::ToolSchema> shuffled(Rng& rng, std::vector<callspec::ToolSchema> tools) {
  for (std::size_t i = tools.size(); i > 1; --i) std::swap(tools[i - 1], tools[rng.below(i)]);
  return tools;
}

/// Distinct calls to one tool.
std::vector<callspec::FunctionCall> distinct_calls(Rng& rng, const callspec::ToolSchema& tool, std::size_t n) {
  std::vector<callspec::FunctionCall> calls;
  while (calls.size() < n) {
    auto call = make_call(rng, tool);
    if (std::find(calls.begin(), calls.end(), call) == calls.end()) calls.push_back(std::move(call));
  }
  return calls;
}

}  // namespace

policy::TokenVocab task_vocab() {
  std::vector<std::string> tokens = {"[", "]", "(", ")", ",", "="};
  for (const char* w : kWords) tokens.emplace_back(w);
  for (const auto& t : kTools) tokens.emplace_back(t.name);
  for (const auto& p : param_words()) tokens.emplace_back(p.name);
  std::set<std::string> seen;
  for (const auto& p : param_words()) {
    for (const auto& v : p.domain) {
      std::string tok = p.type == TypeTag::Enum || p.type == TypeTag::String ? "\"" + v + "\"" : v;
      if (seen.insert(tok).second) tokens.push_back(tok);
    }
  }
  return policy::TokenVocab(tokens);
}

std::vector<int> word_tokens(const policy::TokenVocab& vocab) {
  std::vector<int> out;
  for (const char* w : kWords) out.push_back(vocab.require(w));
  return out;
}

Sample generate_sample(Rng& rng, Category category, int difficulty, TemplateSet templates) {
  if (difficulty < 1 || difficulty > 3) throw std::invalid_argument("difficulty must be 1, 2 or 3");
  const auto d = static_cast<std::size_t>(difficulty);
  Sample sample;
  sample.category = category;
  callspec::CallList reference;
  std::vector<std::string> parts;

  switch (category) {
    case Category::Simple: {
      sample.tools = make_tool_set(rng, 1, 0, difficulty);
      reference.calls.push_back(make_call(rng, sample.tools[0]));
      break;
    }
    case Category::Multiple: {
      auto tools = make_tool_set(rng, 1, d, difficulty);
      reference.calls.push_back(make_call(rng, tools[0]));
      sample.tools = shuffled(rng, std::move(tools));
      break;
    }
    case Category::Parallel: {
      const std::size_t n_calls = d == 1 ? 2 : static_cast<std::size_t>(rng.range(2, 3));
      sample.tools = make_tool_set(rng, 1, 0, difficulty, n_calls);
      reference.calls = distinct_calls(rng, sample.tools[0], n_calls);
      break;
    }
    case Category::ParallelMultiple: {
      const std::size_t n_targets = d == 1 ? 2 : static_cast<std::size_t>(rng.range(2, 3));
      auto tools = make_tool_set(rng, n_targets, d - 1, difficulty);
      for (std::size_t i = 0; i < n_targets; ++i) reference.calls.push_back(make_call(rng, tools[i]));
      sample.tools = shuffled(rng, std::move(tools));
      break;
    }
    case Category::Irrelevance: {
      sample.tools = make_tool_set(rng, d, 0, difficulty);
      std::string tpl = templates == TemplateSet::Train ? pick(rng, kTrainIrrelevant) : pick(rng, kHeldOutIrrelevant);
      sample.query = replace_all(tpl, "{topic}", pick(rng, kTopics));
      sample.reference = kFreeTextAnswer;
      return sample;
    }
  }
  for (const auto& call : reference.calls) parts.push_back(render_call(rng, templates, call));
  std::string query;
  for (std::size_t i = 0; i < parts.size(); ++i) query += (i == 0 ? "" : " Also: ") + parts[i];
  sample.query = query;
  sample.reference = callspec::serialize_call_list(reference);
  return sample;
}

std::vector<Sample> generate_dataset(const GenerationSpec& spec) {
  Rng rng = Rng::stream(spec.seed, "gen");
  std::vector<Sample> out;
  for (auto category : kAllCategories) {
    auto it = spec.counts.find(category);
    if (it == spec.counts.end()) continue;
    for (std::size_t i = 0; i < it->second; ++i) {
      Sample s = generate_sample(rng, category, spec.difficulty, spec.templates);
      char id[64];
      std::snprintf(id, sizeof id, "%s-%05zu", std::string(to_string(category)).c_str(), i);
      s.id = id;
      out.push_back(std::move(s));
    }
  }
  return out;
}

Json sample_to_json(const Sample& sample) {
  return {{"id", sample.id},
          {"query", sample.query},
          {"tools", callspec::tools_to_json(sample.tools)},
          {"reference", sample.reference},
          {"category", std::string(to_string(sample.category))}};
}

Sample sample_from_json(const Json& record) {
  try {
    Sample s;
    s.id = record.at("id").get<std::string>();
    s.query = record.at("query").get<std::string>();
    s.tools = callspec::tools_from_json(record.at("tools"));
    s.reference = record.at("reference").get<std::string>();
    s.category = category_from_string(record.at("category").get<std::string>());
    return s;
  } catch (const Json::exception& e) {
    throw std::runtime_error(std::string("malformed sample record: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("malformed sample record: ") + e.what());
  }
}

std::string dataset_to_jsonl(const std::vector<Sample>& samples) {
  std::string out;
  for (const auto& s : samples) out += sample_to_json(s).dump() + "\n";
  return out;
}

std::vector<Sample> read_dataset(const std::filesystem::path& path) {
  std::vector<Sample> out;
  std::size_t line_no = 0;
  for (const auto& line : io::read_lines(path)) {
    ++line_no;
    try {
      out.push_back(sample_from_json(Json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

Json to_json(const EvalReport& report) {
  Json categories = Json::object();
  for (const auto& [category, score] : report.per_category)
    categories[std::string(to_string(category))] = {
        {"count", score.count}, {"correct", score.correct}, {"accuracy", score.accuracy()}};
  Json failures = Json::object();
  for (const auto& [reason, count] : report.failures) failures[std::string(reward::to_string(reason))] = count;
  return {{"per_category", categories},
          {"overall", report.overall},
          {"micro", report.micro},
          {"total", report.total},
          {"failures", failures}};
}

std::string format_report(const EvalReport& report) {
  std::ostringstream os;
  char line[128];
  std::snprintf(line, sizeof line, "%-20s %8s %10s\n", "category", "count", "accuracy");
  os << line;
  for (const auto& [category, score] : report.per_category) {
    std::snprintf(line, sizeof line, "%-20s %8zu %10.4f\n", std::string(to_string(category)).c_str(), score.count,
                  score.accuracy());
    os << line;
  }
  std::snprintf(line, sizeof line, "%-20s %8zu %10.4f\n", "overall", report.total, report.overall);
  os << line;
  std::snprintf(line, sizeof line, "%-20s %8s %10.4f\n", "micro", "", report.micro);
  os << line;
  return os.str();
}

EvalReport evaluate(const std::map<std::string, std::string>& responses, const std::vector<Sample>& dataset) {
  EvalReport report;
  std::size_t correct = 0;
  for (const auto& sample : dataset) {
    auto it = responses.find(sample.id);
    if (it == responses.end()) throw MissingResponse(sample.id);
    auto breakdown = reward::compute_reward(it->second, sample);
    auto& score = report.per_category[sample.category];
    ++score.count;
    if (breakdown.reward == 1) {
      ++score.correct;
      ++correct;
    } else {
      ++report.failures[*breakdown.failure_reason];
    }
  }
  report.total = dataset.size();
  if (!report.per_category.empty()) {
    double sum = 0.0;
    for (const auto& [category, score] : report.per_category) sum += score.accuracy();
    report.overall = sum / static_cast<double>(report.per_category.size());
  }
  report.micro = report.total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(report.total);
  return report;
}

}  // namespace funrl::bench
