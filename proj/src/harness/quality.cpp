// Copyright 2026 The biasaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cctype>
#include <fstream>

#include "biasaudit/harness.hpp"
#include "biasaudit/util/error.hpp"

namespace biasaudit::harness {

std::optional<int> parse_likert(std::string_view reply) {
  std::optional<int> digit;
  for (std::size_t i = 0; i < reply.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(reply[i]))) continue;
    if (digit) return std::nullopt;  // a second number, or a multi-digit one
    digit = reply[i] - '0';
    if (i + 1 < reply.size() && std::isdigit(static_cast<unsigned char>(reply[i + 1]))) return std::nullopt;
  }
  if (!digit || *digit < 1 || *digit > 5) return std::nullopt;
  return digit;
}

namespace {

std::optional<int> ask(backend::Backend& judge, const std::string& prompt, std::uint64_t seed, double temperature) {
  backend::Request req;
  req.mode = prompting::PlanMode::kGenerate;
  req.turns = {{prompting::Role::kUser, prompt}};
  req.temperature = temperature;
  req.max_tokens = 8;
  req.seed = seed;
  try {
    const auto resp = judge.call(req);
    backend::check_response(req, resp);
    return parse_likert(*resp.text);
  } catch (const backend::BackendError&) {
    return std::nullopt;
  }
}

}  // namespace

std::vector<QualityScore> judge_quality(const std::vector<Generation>& generations, backend::Backend& judge,
                                        const prompting::Catalog& catalog, std::size_t concurrency) {
  std::vector<QualityScore> out(generations.size());
  const std::string judge_id = judge.id();
  const auto n = static_cast<std::ptrdiff_t>(generations.size());
#pragma omp parallel for num_threads(static_cast<int>(std::max<std::size_t>(concurrency, 1))) schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const Generation& g = generations[i];
    QualityScore& q = out[i];
    q.model = g.model;
    q.cell = g.cell;
    q.sample_id = g.sample_id;
    q.seed = g.seed;
    q.judge_backend_id = judge_id;
    if (g.status == "backend_error") continue;
    const std::string prompt = prompting::render_quality_prompt(g.query, g.response, catalog);
    q.likert = ask(judge, prompt, g.seed, 0.0);
    // One retry with a fresh sample; after that the score stays missing.
    if (!q.likert) q.likert = ask(judge, prompt, g.seed + 1, 0.7);
  }
  return out;
}

std::vector<QualitySummary> summarize_quality(const std::vector<QualityScore>& scores) {
  std::vector<QualitySummary> out;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  std::vector<std::vector<double>> values;
  for (const auto& s : scores) {
    const auto key = std::make_pair(s.model, s.cell);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      out.push_back({s.model, s.cell, {}, 0});
      values.emplace_back();
    }
    if (s.likert)
      values[it->second].push_back(*s.likert);
    else
      ++out[it->second].missing;
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].likert = metrics::aggregate_seeds(values[i]);
  return out;
}

std::vector<Generation> read_generations(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<Generation> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Generation g;
      g.model = j.at("model").get<std::string>();
      g.cell = j.at("cell").get<std::string>();
      g.seed = j.at("seed").get<std::uint64_t>();
      g.sample_id = j.at("sample_id").get<std::string>();
      g.query = j.at("query").get<std::string>();
      g.response = j.at("response").get<std::string>();
      g.selected = j.value("selected", std::string());
      g.status = j.value("status", std::string("ok"));
      out.push_back(std::move(g));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string(), n, e.what());
    }
  }
  return out;
}

}  // namespace biasaudit::harness
