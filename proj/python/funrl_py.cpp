// Python bindings. Structured values cross the boundary as plain Python
// objects (dict / list / str / numbers) via JSON.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "json.hpp"

#include "funrl/callspec.hpp"
#include "funrl/callspec_json.hpp"
#include "funrl/checkpoint.hpp"
#include "funrl/datapipe.hpp"
#include "funrl/rewardkit.hpp"
#include "funrl/rlcore.hpp"
#include "funrl/taskbench.hpp"
#include "funrl/trainer.hpp"

namespace py = pybind11;
using Json = nlohmann::ordered_json;
using namespace funrl;

namespace {

py::object to_py(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

Json from_py(const py::handle& obj) {
  return Json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

py::object value_to_py(const callspec::Value& v) {
  using namespace callspec;
  if (v.is<std::string>()) return py::str(v.as<std::string>());
  if (v.is<std::int64_t>()) return py::int_(v.as<std::int64_t>());
  if (v.is<double>()) return py::float_(v.as<double>());
  if (v.is<bool>()) return py::bool_(v.as<bool>());
  if (v.is<Array>()) {
    py::list out;
    for (const auto& item : v.as<Array>()) out.append(value_to_py(item));
    return out;
  }
  py::dict out;
  for (const auto& [k, item] : v.as<Object>()) out[py::str(k)] = value_to_py(item);
  return out;
}

callspec::CallList parse_or_raise(const std::string& text) {
  auto r = callspec::parse_call_list(text);
  if (!r) {
    throw py::value_error(std::string(callspec::to_string(r.error().kind)) + " at offset " +
                          std::to_string(r.error().offset) + ": " + r.error().reason);
  }
  return *r;
}

std::vector<Sample> samples_from_py(const py::handle& obj) {
  std::vector<Sample> out;
  for (const auto& rec : from_py(obj)) out.push_back(bench::sample_from_json(rec));
  return out;
}

py::object samples_to_py(const std::vector<Sample>& samples) {
  Json arr = Json::array();
  for (const auto& s : samples) arr.push_back(bench::sample_to_json(s));
  return to_py(arr);
}

Json breakdown_json(const reward::RewardBreakdown& b) {
  Json j = {{"reward", b.reward}, {"format_ok", b.format_ok}, {"parse_ok", b.parse_ok}, {"match_ok", b.match_ok}};
  j["failure_reason"] = b.failure_reason ? Json(std::string(reward::to_string(*b.failure_reason))) : Json(nullptr);
  j["format_error"] = b.format_error ? Json(std::string(reward::to_string(*b.format_error))) : Json(nullptr);
  return j;
}

/// Rollouts whose every token is CoT, built from chosen probabilities and
/// optional full per-step distributions.
std::vector<Rollout> cot_group(const std::vector<std::vector<double>>& chosen,
                               const std::vector<std::vector<std::vector<double>>>& dists) {
  std::vector<Rollout> group(chosen.size());
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    auto& r = group[i];
    r.tokens.assign(chosen[i].size(), 0);
    r.chosen_prob = chosen[i];
    r.cot = {0, chosen[i].size()};
    if (i < dists.size()) r.step_dists = dists[i];
  }
  return group;
}

}  // namespace

PYBIND11_MODULE(funrl, m) {
  m.doc() = "Function-calling RL: call parsing, rewards, advantages, data cleaning and training";

  m.def("parse_call_list", [](const std::string& text) {
    py::list out;
    for (const auto& call : parse_or_raise(text).calls) {
      py::dict args;
      for (const auto& [k, v] : call.args) args[py::str(k)] = value_to_py(v);
      out.append(py::make_tuple(call.name, args));
    }
    return out;
  }, py::arg("text"), "Parse `[f(a=1), ...]` into a list of (name, kwargs); raises ValueError.");
  m.def("canonicalize", [](const std::string& text) { return callspec::serialize_call_list(parse_or_raise(text)); },
        py::arg("text"));
  m.def("calls_match", [](const std::string& a, const std::string& b) {
    return callspec::calls_match(parse_or_raise(a), parse_or_raise(b));
  }, py::arg("candidate"), py::arg("reference"));
  m.def("validate_calls", [](const std::string& text, const py::object& tools) {
    auto schema = callspec::tools_from_json(from_py(tools));
    std::vector<std::string> errors;
    for (const auto& call : parse_or_raise(text).calls)
      for (const auto& e : callspec::validate_against_schema(call, schema)) errors.push_back(e.describe());
    return errors;
  }, py::arg("text"), py::arg("tools"));

  m.def("compute_reward", [](const std::string& response, const py::object& sample) {
    return to_py(breakdown_json(reward::compute_reward(response, bench::sample_from_json(from_py(sample)))));
  }, py::arg("response"), py::arg("sample"));

  m.def("group_advantages", [](const std::vector<double>& r) { return rl::group_advantages(r); }, py::arg("rewards"));
  m.def("adjust_advantages", [](const std::vector<double>& a, double e, double lambda, double alpha) {
    return rl::adjust_advantages(a, e, lambda, alpha);
  }, py::arg("advantages"), py::arg("entropy"), py::arg("lam"), py::arg("alpha"));
  m.def("cot_entropy", [](const std::vector<std::vector<double>>& chosen, const std::string& mode,
                          const std::string& aggregation, const std::vector<std::vector<std::vector<double>>>& dists) {
    auto group = cot_group(chosen, dists);
    return rl::cot_entropy(group, rl::entropy_mode_from_string(mode), rl::entropy_aggregation_from_string(aggregation));
  }, py::arg("chosen_probs"), py::arg("mode") = "plugin", py::arg("aggregation") = "mean_per_token",
     py::arg("step_dists") = std::vector<std::vector<std::vector<double>>>{});
  m.def("categorical_kl", [](const std::vector<double>& p, const std::vector<double>& q) {
    return rl::categorical_kl(p, q);
  }, py::arg("p"), py::arg("q"));
  m.def("clipped_surrogate", [](const std::vector<double>& ratios, const std::vector<double>& adv, double eps,
                                const std::vector<double>& kl, double beta) {
    return rl::clipped_surrogate(ratios, adv, eps, kl, beta);
  }, py::arg("ratios"), py::arg("advantages"), py::arg("epsilon"), py::arg("kl_terms"), py::arg("beta"));

  m.def("generate_dataset", [](std::uint64_t seed, const std::map<std::string, std::size_t>& counts, int difficulty,
                               const std::string& templates) {
    bench::GenerationSpec spec;
    spec.seed = seed;
    spec.difficulty = difficulty;
    spec.templates = templates == "held_out" ? bench::TemplateSet::HeldOut : bench::TemplateSet::Train;
    for (const auto& [name, n] : counts) spec.counts[category_from_string(name)] = n;
    return samples_to_py(bench::generate_dataset(spec));
  }, py::arg("seed"), py::arg("counts"), py::arg("difficulty") = 1, py::arg("templates") = "train");
  m.def("evaluate", [](const std::map<std::string, std::string>& responses, const py::object& dataset) {
    return to_py(bench::to_json(bench::evaluate(responses, samples_from_py(dataset))));
  }, py::arg("responses"), py::arg("dataset"));

  m.def("run_pipeline", [](const py::object& dataset, const py::object& script, int max_regenerations) {
    const auto samples = samples_from_py(dataset);
    pipe::PipelineOptions options{max_regenerations, 1};
    pipe::PipelineResult result;
    if (script.is_none()) {
      pipe::RuleBasedEvaluator mock;
      result = pipe::run_pipeline(samples, mock, options);
    } else {
      auto scripted = pipe::ScriptedEvaluator::from_json(from_py(script));
      result = pipe::run_pipeline(samples, scripted, options);
    }
    return py::make_tuple(samples_to_py(result.retained), to_py(pipe::to_json(result.stats)));
  }, py::arg("dataset"), py::arg("script") = py::none(), py::arg("max_regenerations") = 3,
     "Clean with the rule-based mock, or a scripted evaluator {id: plan}; returns (retained, stats).");

  m.def("train", [](const py::object& config, const py::object& dataset, const std::string& out_dir) {
    auto cfg = train::config_from_json(config.is_none() ? Json::object() : from_py(config));
    const auto samples = samples_from_py(dataset);
    train::TrainResult result = [&] {
      py::gil_scoped_release release;
      return train::train(cfg, samples, {out_dir});
    }();
    Json metrics = Json::array();
    for (const auto& s : result.metrics) metrics.push_back(train::to_json(s));
    Json out = {{"metrics", metrics},
                {"train_size", result.train_size},
                {"holdout_size", result.holdout_size},
                {"holdout_report", bench::to_json(result.holdout_report)},
                {"params", policy::params_to_json(result.params, bench::task_vocab())}};
    return to_py(out);
  }, py::arg("config"), py::arg("dataset"), py::arg("out_dir") = "");
}
