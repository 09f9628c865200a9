// Copyright 2026 The biasaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "biasaudit/backend.hpp"

namespace biasaudit::backend {
namespace {

using nlohmann::json;

std::string_view wire_role(Role r) {
  switch (r) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistantExpected: return "assistant";
  }
  return "user";
}

Role parse_wire_role(const std::string& s, const std::string& payload) {
  if (s == "system") return Role::kSystem;
  if (s == "user") return Role::kUser;
  if (s == "assistant") return Role::kAssistantExpected;
  throw ProtocolError("unknown turn role '" + s + "'", payload);
}

}  // namespace

json Request::to_json() const {
  json t = json::array();
  for (const auto& turn : turns) t.push_back({{"role", wire_role(turn.role)}, {"text", turn.text}});
  json j = {{"mode", prompting::to_string(mode)},
            {"turns", t},
            {"max_tokens", max_tokens},
            {"temperature", temperature},
            {"seed", seed}};
  if (mode == PlanMode::kScoreOptions) j["options"] = options;
  return j;
}

std::string Request::canonical() const { return to_json().dump(); }

Request Request::from_json(const json& j) {
  const std::string payload = j.dump();
  try {
    Request r;
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "score_options")
      r.mode = PlanMode::kScoreOptions;
    else if (mode == "generate")
      r.mode = PlanMode::kGenerate;
    else
      throw ProtocolError("unknown mode '" + mode + "'", payload);
    for (const auto& t : j.at("turns"))
      r.turns.push_back({parse_wire_role(t.at("role").get<std::string>(), payload), t.at("text").get<std::string>()});
    if (const auto it = j.find("options"); it != j.end()) r.options = it->get<std::vector<std::string>>();
    r.max_tokens = j.value("max_tokens", 64);
    r.temperature = j.value("temperature", 0.0);
    r.seed = j.value("seed", std::uint64_t{0});
    if (r.mode == PlanMode::kScoreOptions && r.options.empty())
      throw ProtocolError("score_options request without options", payload);
    if (!(r.temperature >= 0.0)) throw ProtocolError("temperature must be nonnegative", payload);
    if (r.turns.empty()) throw ProtocolError("request has no turns", payload);
    return r;
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed request: ") + e.what(), payload);
  }
}

json Response::to_json() const {
  json j = {{"backend_id", backend_id}};
  if (scores) j["scores"] = *scores;
  if (text) j["text"] = *text;
  if (!raw_ref.empty()) j["raw_ref"] = raw_ref;
  return j;
}

Response Response::from_json(const json& j) {
  const std::string payload = j.dump();
  if (!j.is_object()) throw ProtocolError("response is not a JSON object", payload);
  Response r;
  try {
    r.backend_id = j.value("backend_id", std::string());
    r.raw_ref = j.value("raw_ref", std::string());
    if (const auto it = j.find("scores"); it != j.end() && !it->is_null()) {
      if (!it->is_array()) throw ProtocolError("scores must be an array", payload);
      std::vector<double> s;
      for (const auto& v : *it) {
        if (!v.is_number()) throw ProtocolError("non-numeric score", payload);
        s.push_back(v.get<double>());
      }
      r.scores = std::move(s);
    }
    if (const auto it = j.find("text"); it != j.end() && !it->is_null()) {
      if (!it->is_string()) throw ProtocolError("text must be a string", payload);
      r.text = it->get<std::string>();
    }
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed response: ") + e.what(), payload);
  }
  if (r.scores.has_value() == r.text.has_value())
    throw ProtocolError("response must carry exactly one of scores or text", payload);
  return r;
}

void check_response(const Request& req, const Response& resp) {
  if (req.mode == PlanMode::kScoreOptions) {
    if (!resp.scores || resp.text)
      throw ProtocolError("score_options response without scores", resp.to_json().dump());
    if (resp.scores->size() != req.options.size())
      throw ProtocolError("expected " + std::to_string(req.options.size()) + " scores, got " +
                              std::to_string(resp.scores->size()),
                          resp.to_json().dump());
  } else if (!resp.text || resp.scores) {
    throw ProtocolError("generate response without text", resp.to_json().dump());
  }
}

Request request_for(const prompting::PromptPlan& plan, std::size_t round, const std::vector<std::string>& responses,
                    double temperature, int max_tokens) {
  Request r;
  r.mode = plan.mode;
  r.temperature = temperature;
  r.max_tokens = max_tokens;
  r.seed = plan.seed;
  if (plan.mode == PlanMode::kScoreOptions) {
    r.turns = plan.turns;
    r.options = plan.options_in_order;
    return r;
  }
  std::size_t seen = 0;
  for (const auto& t : plan.turns) {
    if (t.role == Role::kAssistantExpected) {
      if (seen == round) return r;
      if (seen >= responses.size()) throw Error("request_for: response for round " + std::to_string(seen) + " missing");
      r.turns.push_back({Role::kAssistantExpected, responses[seen]});
      ++seen;
    } else {
      r.turns.push_back({t.role, prompting::fill_responses(t.text, responses)});
    }
  }
  throw Error("plan " + plan.sample_id + " has no generation round " + std::to_string(round));
}

}  // namespace biasaudit::backend
