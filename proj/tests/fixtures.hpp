#pragma once

// Shared test data: the team-ranking case, and a random AST generator.

#include <bit>
#include <string>

#include "funrl/callspec.hpp"
#include "funrl/callspec_json.hpp"
#include "funrl/rng.hpp"
#include "funrl/sample.hpp"

namespace fixtures {

inline const char* kTeamRankTools =
    R"([{"name": "get_team_rank", "description": "Get the team ranking in a sports league based on season and type.", )"
    R"("parameters": {"type": "dict", "properties": {"team_name": {"type": "string", "description": "The name of the sports team."}, )"
    R"("league": {"type": "string", "description": "The name of the league in which the team competes."}, )"
    R"("season": {"type": "string", "description": "The season for which the team's ranking is sought."}, )"
    R"("type": {"type": "string", "description": "Type of the season: regular or playoff.", "enum": ["regular", "playoff"]}}, )"
    R"("required": ["team_name", "league", "season", "type"]}}])";

inline const char* kTeamRankReference =
    R"([get_team_rank(team_name="LA Lakers", league="NBA", season="2021", type="regular")])";

inline const char* kGoodResponse =
    "<think>To find the ranking of the LA Lakers in the NBA 2021 regular season, I need to use the `get_team_rank` "
    "function. The function requires the team name, league, season, and type of the season. The parameters provided "
    "are:\n- \"team_name\": \"LA Lakers\"\n- \"league\": \"NBA\"\n- \"season\": \"2021\"\n- \"type\": \"regular\"\n"
    "These parameters match exactly with what the function expects.</think>\n"
    "<answer>[get_team_rank(team_name=\"LA Lakers\", league=\"NBA\", season=\"2021\", type=\"regular\")]</answer>";

inline const char* kMalformedResponse =
    "<think>The question is asking for the ranking of LA Lakers in the NBA during the 2021 regular season. The "
    "function 'get_team_rank' can be used to get the team ranking based on the provided parameters.</think>\n"
    "<answer>[get_team_rank(team_name='LA Lakers', league='NBA', season=2021', type='regular')]</answer>";

inline funrl::Sample team_rank_sample() {
  return {"team-rank", "Find the ranking of LA Lakers in the NBA 2021 regular season.",
          funrl::callspec::tools_from_json_text(kTeamRankTools), kTeamRankReference, funrl::Category::Simple};
}

inline std::string random_ident(funrl::Rng& rng) {
  static const std::string head = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_";
  static const std::string tail = head + "0123456789";
  std::string s(1, head[rng.below(head.size())]);
  const int n = rng.range(0, 8);
  for (int i = 0; i < n; ++i) s.push_back(tail[rng.below(tail.size())]);
  return s;
}

inline std::string random_string(funrl::Rng& rng) {
  static const std::string pool = "abc XYZ 019 \"'\\,()[]{}=:\n\t-_.";
  std::string s;
  const int n = rng.range(0, 12);
  for (int i = 0; i < n; ++i) {
    if (rng.below(10) == 0) s.push_back(static_cast<char>(0x80 + rng.below(0x40)));  // raw high bytes
    else s.push_back(pool[rng.below(pool.size())]);
  }
  return s;
}

inline double random_double(funrl::Rng& rng) {
  switch (rng.below(4)) {
    case 0: return static_cast<double>(rng.range(-1000, 1000)) / 8.0;
    case 1: return rng.uniform() * 1e6 - 5e5;
    case 2: return -0.0;
    default: {
      double d;
      do d = std::bit_cast<double>(rng.next());
      while (!std::isfinite(d));
      return d;
    }
  }
}

inline funrl::callspec::Value random_value(funrl::Rng& rng, int depth) {
  using namespace funrl::callspec;
  const auto kind = rng.below(depth >= 3 ? 4 : 6);
  switch (kind) {
    case 0: return Value(random_string(rng));
    case 1: {
      switch (rng.below(3)) {
        case 0: return Value(static_cast<std::int64_t>(rng.range(-100, 100)));
        case 1: return Value(static_cast<std::int64_t>(rng.next()));
        default: return Value(rng.below(2) ? INT64_MIN : INT64_MAX);
      }
    }
    case 2: return Value(random_double(rng));
    case 3: return Value(rng.below(2) == 1);
    case 4: {
      Array a;
      const int n = rng.range(0, 3);
      for (int i = 0; i < n; ++i) a.push_back(random_value(rng, depth + 1));
      return Value(std::move(a));
    }
    default: {
      Object o;
      const int n = rng.range(0, 3);
      for (int i = 0; i < n; ++i) {
        std::string key = random_string(rng);
        bool dup = false;
        for (const auto& [k, v] : o) dup = dup || k == key;
        if (!dup) o.emplace_back(std::move(key), random_value(rng, depth + 1));
      }
      return Value(std::move(o));
    }
  }
}

inline funrl::callspec::CallList random_call_list(funrl::Rng& rng) {
  using namespace funrl::callspec;
  CallList list;
  const int calls = rng.range(1, 3);
  for (int c = 0; c < calls; ++c) {
    FunctionCall call{random_ident(rng), {}};
    const int args = rng.range(0, 4);
    for (int a = 0; a < args; ++a) {
      std::string name = random_ident(rng);
      if (!call.find_arg(name)) call.args.emplace_back(std::move(name), random_value(rng, 0));
    }
    list.calls.push_back(std::move(call));
  }
  return list;
}

}  // namespace fixtures

#include <optional>
#include <vector>

#include "funrl/rewardkit.hpp"

namespace fixtures {

struct RewardCase {
  std::string name;
  std::string response;
  funrl::Sample sample;
  int reward;
  std::optional<funrl::reward::FailureReason> reason;
};

inline funrl::Sample with_reference(funrl::Sample s, std::string reference) {
  s.reference = std::move(reference);
  return s;
}

/// Twelve hand-checked (response, sample) -> reward rows.
inline std::vector<RewardCase> reward_truth_table() {
  using funrl::reward::FailureReason;
  const auto team = team_rank_sample();
  const auto text_ref = with_reference(team, "Sorry, none of the available tools can help with this request.");
  const auto parallel = with_reference(team, "[f(a=1), g(b=2)]");
  const auto numeric = with_reference(team, "[f(a=1)]");
  const std::string good = kTeamRankReference;
  auto wrap = [](const std::string& answer) { return "<think>reasoning process here</think>\n<answer>" + answer + "</answer>"; };
  return {
      {"well-formed correct call", kGoodResponse, team, 1, std::nullopt},
      {"malformed quoted season", kMalformedResponse, team, 0, FailureReason::ParseFailedButCallExpected},
      {"think block missing", "<answer>" + good + "</answer>", team, 0, FailureReason::BadFormat},
      {"answer block missing", "<think>x</think>", team, 0, FailureReason::BadFormat},
      {"blocks in wrong order", "<answer>" + good + "</answer><think>x</think>", team, 0, FailureReason::BadFormat},
      {"trailing text", wrap(good) + " trailing", team, 0, FailureReason::BadFormat},
      {"kwargs reordered",
       wrap(R"([get_team_rank(type="regular", season="2021", league="NBA", team_name="LA Lakers")])"), team, 1,
       std::nullopt},
      {"wrong season value",
       wrap(R"([get_team_rank(team_name="LA Lakers", league="NBA", season="2022", type="regular")])"), team, 0,
       FailureReason::Mismatch},
      {"free text where text expected", wrap("I cannot answer with these tools."), text_ref, 1, std::nullopt},
      {"call where text expected", wrap("[f(a=1)]"), text_ref, 0, FailureReason::ParsedButTextExpected},
      {"parallel calls reordered", wrap("[g(b=2), f(a=1)]"), parallel, 1, std::nullopt},
      {"float where integer expected", wrap("[f(a=1.0)]"), numeric, 0, FailureReason::Mismatch},
  };
}

}  // namespace fixtures

#include <atomic>

#include "funrl/datapipe.hpp"
#include "funrl/taskbench.hpp"

namespace fixtures {

/// Wraps an evaluator and counts calls.
class CountingEvaluator final : public funrl::pipe::Evaluator {
 public:
  explicit CountingEvaluator(const funrl::pipe::Evaluator& inner) : inner_(inner) {}
  funrl::pipe::EvaluatorReply evaluate(const funrl::pipe::EvaluationRequest& r) const override {
    ++evaluations;
    return inner_.evaluate(r);
  }
  std::string regenerate(const funrl::pipe::EvaluationRequest& r) const override {
    ++regenerations;
    return inner_.regenerate(r);
  }
  mutable std::atomic<int> evaluations{0};
  mutable std::atomic<int> regenerations{0};

 private:
  const funrl::pipe::Evaluator& inner_;
};

/// 100 generated samples; the first 7 fail every evaluation and samples
/// 10..14 reference a tool outside their tool set.
struct ScriptedScenario {
  std::vector<funrl::Sample> samples;
  std::map<std::string, funrl::pipe::ScriptPlan> plans;
};

inline ScriptedScenario scripted_scenario() {
  using namespace funrl;
  bench::GenerationSpec spec;
  spec.seed = 99;
  spec.counts = {{Category::Simple, 40}, {Category::Multiple, 30}, {Category::Parallel, 20}, {Category::Irrelevance, 10}};
  ScriptedScenario s;
  s.samples = bench::generate_dataset(spec);
  for (int i = 0; i < 7; ++i) s.plans[s.samples[i].id] = {pipe::ScriptPlan::Kind::FailAlways, 0, ""};
  for (int i = 10; i < 15; ++i) s.samples[i].reference = "[h(x=1)]";
  return s;
}

}  // namespace fixtures
