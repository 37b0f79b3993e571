#include "doctest.h"

#include <thread>

#include "httplib.h"

#include "fixtures.hpp"
#include "funrl/datapipe.hpp"
#include "funrl/taskbench.hpp"

using namespace funrl;
using namespace funrl::pipe;
using fixtures::CountingEvaluator;

namespace {

std::vector<Sample> clean_data(std::size_t n) {
  bench::GenerationSpec spec;
  spec.seed = 21;
  spec.counts = {{Category::Simple, n / 2}, {Category::Multiple, n - n / 2}};
  return bench::generate_dataset(spec);
}

}  // namespace

TEST_CASE("llm stage outcomes") {
  const auto sample = clean_data(2)[0];
  ScriptedEvaluator pass({});
  auto kept = std::get<LlmRetained>(llm_stage(sample, pass));
  CHECK(kept.sample.reference == sample.reference);
  CHECK_FALSE(kept.corrected);
  CHECK(kept.evaluations == 1);

  ScriptedEvaluator fail({{sample.id, {ScriptPlan::Kind::FailAlways, 0, ""}}});
  CountingEvaluator counted(fail);
  auto dropped = std::get<LlmDropped>(llm_stage(sample, counted));
  CHECK(dropped.evaluations == 4);
  CHECK(counted.evaluations == 4);
  CHECK(counted.regenerations == 3);

  ScriptedEvaluator fixes({{sample.id, {ScriptPlan::Kind::CorrectOn, 2, "[fixed(a=1)]"}}});
  auto corrected = std::get<LlmRetained>(llm_stage(sample, fixes));
  CHECK(corrected.corrected);
  CHECK(corrected.sample.reference == "[fixed(a=1)]");
  CHECK(corrected.evaluations == 3);

  ScriptedEvaluator down({{sample.id, {ScriptPlan::Kind::Unavailable, 0, ""}}});
  CHECK_THROWS_AS(llm_stage(sample, down), EvaluatorUnavailable);
}

TEST_CASE("ast stage rules") {
  auto s = clean_data(2)[0];
  CHECK_FALSE(ast_stage(s).has_value());
  auto unknown = s;
  unknown.reference = "[h(x=1)]";
  CHECK(ast_stage(unknown) == AstDrop::RuleI);
  auto text = s;
  text.reference = "Sorry, no tool applies.";
  CHECK(ast_stage(text) == AstDrop::RuleII);
  text.category = Category::Irrelevance;
  CHECK_FALSE(ast_stage(text).has_value());
}

TEST_CASE("pipeline counts") {
  RuleBasedEvaluator mock;
  auto all = run_pipeline(clean_data(100), mock);
  CHECK(all.stats.input_count == 100);
  CHECK(all.stats.after_llm_count == 100);
  CHECK(all.stats.after_ast_count == 100);
  auto none = run_pipeline({}, mock);
  CHECK(none.stats.after_ast_count == 0);
  CHECK(none.stats.input_count == 0);
}

TEST_CASE("scripted drop plan: 100 -> 93 -> 88") {
  auto scenario = fixtures::scripted_scenario();
  ScriptedEvaluator script(scenario.plans);
  CountingEvaluator counted(script);
  for (std::size_t parallelism : {1u, 4u}) {
    auto result = run_pipeline(scenario.samples, script, {3, parallelism});
    CHECK(result.stats.input_count == 100);
    CHECK(result.stats.after_llm_count == 93);
    CHECK(result.stats.after_ast_count == 88);
    CHECK(result.stats.llm_exhausted == 7);
    CHECK(result.stats.ast_rule_i == 5);
    CHECK(result.retained.size() == 88);
    CHECK(result.retained.front().id == scenario.samples[7].id);
  }
  auto table = format_stats(run_pipeline(scenario.samples, counted).stats);
  CHECK(counted.evaluations == 7 * 4 + 93);
  CHECK(counted.regenerations == 7 * 3);
  CHECK(table.find("100") != std::string::npos);
  CHECK(table.find("93") != std::string::npos);
  CHECK(table.find("88") != std::string::npos);
}

TEST_CASE("pipeline is idempotent and order preserving") {
  auto scenario = fixtures::scripted_scenario();
  ScriptedEvaluator script(scenario.plans);
  auto first = run_pipeline(scenario.samples, script);
  ScriptedEvaluator pass({});
  auto second = run_pipeline(first.retained, pass);
  CHECK(second.retained.size() == first.retained.size());
  CHECK(bench::dataset_to_jsonl(second.retained) == bench::dataset_to_jsonl(first.retained));
  for (const auto& s : first.retained) {
    auto parsed = callspec::parse_call_list(s.reference);
    if (parsed)
      for (const auto& call : parsed->calls) CHECK(callspec::validate_against_schema(call, s.tools).empty());
  }
  auto reversed = scenario.samples;
  std::reverse(reversed.begin(), reversed.end());
  auto r = run_pipeline(reversed, script);
  auto expected = first.retained;
  std::reverse(expected.begin(), expected.end());
  CHECK(bench::dataset_to_jsonl(r.retained) == bench::dataset_to_jsonl(expected));
}

TEST_CASE("deferred samples are reported, not dropped") {
  auto data = clean_data(10);
  ScriptedEvaluator script({{data[3].id, {ScriptPlan::Kind::Unavailable, 0, ""}}});
  auto result = run_pipeline(data, script);
  CHECK(result.stats.deferred == std::vector<std::string>{data[3].id});
  CHECK(result.stats.llm_exhausted == 0);
  CHECK(result.retained.size() == 9);
}

TEST_CASE("rule-based mock") {
  RuleBasedEvaluator mock;
  auto s = clean_data(2)[0];
  EvaluationRequest req{&s, s.reference, Instruction::Evaluate, 0, ""};
  CHECK(mock.evaluate(req).passed);
  req.answer = "[nonexistent_tool(a=1)]";
  CHECK_FALSE(mock.evaluate(req).passed);
  req.answer = "   ";
  CHECK_FALSE(mock.evaluate(req).passed);
}

TEST_CASE("reply parsing") {
  CHECK(parse_reply(Json{{"verdict", "PASS"}}).passed);
  auto fail = parse_reply(Json{{"content", "some preamble\nFAIL: wrong argument\n"}});
  CHECK_FALSE(fail.passed);
  CHECK(fail.reason == "wrong argument");
  auto regen = parse_reply(Json{{"verdict", "FAIL: x"}, {"corrected_answer", "[f(a=1)]"}});
  CHECK(regen.answer == "[f(a=1)]");
  CHECK_THROWS(parse_reply(Json{{"verdict", "maybe"}}));
}

TEST_CASE("request body and export records") {
  auto s = fixtures::team_rank_sample();
  EvaluationRequest req{&s, s.reference, Instruction::Regenerate, 1, "bad"};
  auto body = request_body(req);
  CHECK(body.at("query") == s.query);
  CHECK(body.at("answer") == s.reference);
  CHECK(body.at("instruction").get<std::string>().find("corrected") != std::string::npos);
  CHECK(body.at("tools").is_array());
  auto rec = conversation_record(s);
  CHECK(rec.at("user") == s.query);
  CHECK(rec.at("reference") == s.reference);
  CHECK(rec.at("system").get<std::string>().find("get_team_rank") != std::string::npos);
}

TEST_CASE("http evaluator against a local server") {
  httplib::Server server;
  std::atomic<int> calls{0};
  std::string auth_seen;
  server.Post("/judge", [&](const httplib::Request& req, httplib::Response& res) {
    const int n = ++calls;
    auth_seen = req.get_header_value("Authorization");
    if (n == 1) {  // first call: transient failure, retried
      res.status = 503;
      return;
    }
    auto body = Json::parse(req.body);
    Json reply = {{"verdict", body.at("answer").get<std::string>().find("h(") != std::string::npos ? "FAIL: unknown tool" : "PASS"}};
    if (body.at("instruction").get<std::string>().find("corrected") != std::string::npos)
      reply["answer"] = "[get_team_rank(team_name=\"LA Lakers\", league=\"NBA\", season=\"2021\", type=\"regular\")]";
    res.set_content(reply.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpEvaluator eval({"http://127.0.0.1:" + std::to_string(port) + "/judge", std::chrono::milliseconds(2000), 2,
                      "Bearer t0k"});
  auto s = fixtures::team_rank_sample();
  s.reference = "[h(x=1)]";
  auto outcome = llm_stage(s, eval);
  auto kept = std::get<LlmRetained>(outcome);
  CHECK(kept.corrected);
  CHECK(kept.sample.reference == fixtures::kTeamRankReference);
  CHECK(auth_seen == "Bearer t0k");
  CHECK(calls == 4);  // 503, FAIL, regenerate, PASS

  server.stop();
  thread.join();

  HttpEvaluator dead({"http://127.0.0.1:" + std::to_string(port) + "/judge", std::chrono::milliseconds(200), 1, ""});
  auto data = clean_data(2);
  auto result = run_pipeline(data, dead);
  CHECK(result.stats.deferred.size() == 2);
  CHECK(result.retained.empty());
}
