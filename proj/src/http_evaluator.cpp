#include "httplib.h"

#include "funrl/datapipe.hpp"

namespace funrl::pipe {

HttpEvaluator::HttpEvaluator(HttpEvaluatorConfig config) : config_(std::move(config)) {
  const auto scheme_end = config_.url.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("evaluator URL needs a scheme: " + config_.url);
  const auto path_start = config_.url.find('/', scheme_end + 3);
  scheme_host_port_ = config_.url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : config_.url.substr(path_start);
  if (config_.retries < 0) throw std::invalid_argument("retry count must be non-negative");
}

Json HttpEvaluator::post(const Json& body) const {
  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt <= config_.retries; ++attempt) {
    httplib::Client client(scheme_host_port_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!config_.auth_header.empty()) headers.emplace("Authorization", config_.auth_header);
    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500 || res->status == 429) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) throw EvaluatorUnavailable("evaluator returned HTTP " + std::to_string(res->status));
    try {
      return Json::parse(res->body);
    } catch (const Json::exception& e) {
      throw EvaluatorUnavailable(std::string("evaluator reply is not JSON: ") + e.what());
    }
  }
  throw EvaluatorUnavailable("evaluator unreachable at " + config_.url + ": " + last_error);
}

EvaluatorReply HttpEvaluator::evaluate(const EvaluationRequest& request) const {
  try {
    return parse_reply(post(request_body(request)));
  } catch (const EvaluatorUnavailable&) {
    throw;
  } catch (const std::runtime_error& e) {
    throw EvaluatorUnavailable(e.what());
  }
}

std::string HttpEvaluator::regenerate(const EvaluationRequest& request) const {
  EvaluatorReply reply;
  try {
    reply = parse_reply(post(request_body(request)));
  } catch (const EvaluatorUnavailable&) {
    throw;
  } catch (const std::runtime_error& e) {
    throw EvaluatorUnavailable(e.what());
  }
  return reply.answer.value_or(request.answer);
}

}  // namespace funrl::pipe
