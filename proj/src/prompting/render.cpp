// Copyright 2026 The biasaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <numeric>

#include "biasaudit/prompting.hpp"
#include "biasaudit/util/error.hpp"
#include "biasaudit/util/rng.hpp"
#include "biasaudit/util/text.hpp"
#include "detail.hpp"

namespace biasaudit::prompting {

std::string_view to_string(Role r) {
  switch (r) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistantExpected: return "assistant_expected";
  }
  return "user";
}

std::string_view to_string(PlanMode m) { return m == PlanMode::kScoreOptions ? "score_options" : "generate"; }

std::string_view to_string(Adaptation a) {
  switch (a) {
    case Adaptation::kIntrinsic: return "intrinsic";
    case Adaptation::kZeroShot: return "zero_shot";
    case Adaptation::kFewShot: return "few_shot";
    case Adaptation::kCot: return "cot";
  }
  return "zero_shot";
}

Adaptation parse_adaptation(std::string_view s) {
  const std::string l = text::to_lower(text::trim(s));
  if (l == "intrinsic") return Adaptation::kIntrinsic;
  if (l == "zero_shot" || l == "zero-shot") return Adaptation::kZeroShot;
  if (l == "few_shot" || l == "few-shot") return Adaptation::kFewShot;
  if (l == "cot") return Adaptation::kCot;
  throw Error("unknown adaptation '" + std::string(s) + "'");
}

namespace {

constexpr std::pair<StrategyKind, std::string_view> kStrategyNames[] = {
    {StrategyKind::kNone, "none"},
    {StrategyKind::kInlinePP, "inline_pp"},
    {StrategyKind::kSelfDebiasExplanation, "self_debias_explanation"},
    {StrategyKind::kSelfDebiasReprompt, "self_debias_reprompt"},
    {StrategyKind::kInstructionPPSR, "instruction_pp_sr"},
    {StrategyKind::kRolePPSR, "role_pp_sr"},
    {StrategyKind::kCausality, "causality"},
    {StrategyKind::kAntiStereoAll, "anti_stereo_all"},
    {StrategyKind::kAntiStereoMost, "anti_stereo_most"},
    {StrategyKind::kNeutralControl, "neutral_control"},
};

bool has_variant(StrategyKind k) { return k == StrategyKind::kInlinePP || k == StrategyKind::kNeutralControl; }

}  // namespace

std::string_view to_string(StrategyKind k) {
  for (const auto& [kind, name] : kStrategyNames)
    if (kind == k) return name;
  return "none";
}

std::string DebiasStrategy::id() const {
  std::string out(to_string(kind));
  if (!variant.empty()) out += ":" + variant;
  return out;
}

DebiasStrategy DebiasStrategy::parse(std::string_view id) {
  const std::string s(text::trim(id));
  const auto colon = s.find(':');
  const std::string head = text::to_lower(s.substr(0, colon));
  const std::string variant = colon == std::string::npos ? std::string() : s.substr(colon + 1);
  for (const auto& [kind, name] : kStrategyNames) {
    if (head != name) continue;
    if (has_variant(kind) && variant.empty()) throw Error("strategy '" + s + "' needs a variant id, e.g. " + head + ":1");
    if (!has_variant(kind) && !variant.empty()) throw Error("strategy '" + head + "' takes no variant");
    return {kind, variant};
  }
  throw Error("unknown strategy '" + s + "'");
}

nlohmann::json PromptPlan::to_json() const {
  nlohmann::json turns_j = nlohmann::json::array();
  for (const auto& t : turns) turns_j.push_back({{"role", to_string(t.role)}, {"text", t.text}});
  return {
      {"sample_id", sample_id},
      {"turns", turns_j},
      {"mode", to_string(mode)},
      {"options_in_order", options_in_order},
      {"permutation", permutation},
      {"adaptation", to_string(adaptation)},
      {"strategy", strategy.id()},
      {"seed", seed},
  };
}

std::string PromptPlan::canonical() const { return to_json().dump(); }

std::size_t PromptPlan::generation_turns() const {
  return static_cast<std::size_t>(
      std::count_if(turns.begin(), turns.end(), [](const Turn& t) { return t.role == Role::kAssistantExpected; }));
}

bool is_bijection(const std::vector<int>& permutation) {
  std::vector<bool> seen(permutation.size(), false);
  for (int p : permutation) {
    if (p < 0 || static_cast<std::size_t>(p) >= permutation.size() || seen[p]) return false;
    seen[p] = true;
  }
  return true;
}

namespace detail {

std::string first_user_text(const PromptPlan& p) {
  std::string out;
  if (!p.preamble.empty()) out += p.preamble + " ";
  out += p.pre_prompt;
  out += "\n";
  out += p.context;
  out += p.query;
  out += p.suffix;
  return out;
}

void rebuild_first_user(PromptPlan& plan) {
  for (auto& t : plan.turns) {
    if (t.role == Role::kUser) {
      t.text = first_user_text(plan);
      return;
    }
  }
  throw Error("plan for " + plan.sample_id + " has no user turn");
}

}  // namespace detail

namespace {

std::vector<int> identity(std::size_t n) {
  std::vector<int> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

PromptPlan generate_plan(std::string sample_id, std::uint64_t seed, std::vector<std::string> shown,
                         std::vector<int> perm, std::string pre_prompt, std::string query, const Catalog& catalog) {
  PromptPlan p;
  p.sample_id = std::move(sample_id);
  p.mode = PlanMode::kGenerate;
  p.adaptation = Adaptation::kZeroShot;
  p.seed = seed;
  p.options_in_order = std::move(shown);
  p.permutation = std::move(perm);
  p.pre_prompt = std::move(pre_prompt);
  p.query = std::move(query);
  p.suffix = "\n" + catalog.mcq_answer_cue();
  p.turns = {{Role::kUser, ""}, {Role::kAssistantExpected, ""}};
  detail::rebuild_first_user(p);
  return p;
}

}  // namespace

PromptPlan render_intrinsic(const corpus::CorefSample& s, const Catalog& catalog) {
  PromptPlan p;
  p.sample_id = s.id;
  p.mode = PlanMode::kScoreOptions;
  p.adaptation = Adaptation::kIntrinsic;
  p.turns = {{Role::kUser, text::render(catalog.intrinsic_prefix(), {{"sentence", s.sentence}, {"pronoun", s.pronoun}})}};
  for (const auto* occ : {&s.occupation_a, &s.occupation_b})
    p.options_in_order.push_back(text::render(catalog.intrinsic_option(), {{"option", *occ}}));
  p.permutation = identity(2);
  return p;
}

PromptPlan render_intrinsic_qa(const corpus::QASample& s, const Catalog& catalog) {
  PromptPlan p;
  p.sample_id = s.id;
  p.mode = PlanMode::kScoreOptions;
  p.adaptation = Adaptation::kIntrinsic;
  p.turns = {{Role::kUser,
              text::render(catalog.intrinsic_qa_prefix(), {{"context", s.context}, {"question", s.question}})}};
  for (const auto& o : s.options) p.options_in_order.push_back(text::render(catalog.intrinsic_option(), {{"option", o}}));
  p.permutation = identity(s.options.size());
  return p;
}

std::vector<int> option_permutation(std::string_view sample_id, std::uint64_t seed, std::size_t n_options) {
  std::vector<int> perm = identity(n_options);
  Rng rng(mix_seed({fnv1a64(sample_id), seed, n_options}));
  rng.shuffle(std::span<int>(perm));
  return perm;
}

std::vector<std::string> coref_options(const corpus::CorefSample& s, const Catalog& catalog) {
  return {s.occupation_a, s.occupation_b, catalog.unknown_option()};
}

std::string coref_question(const corpus::CorefSample& s, const Catalog& catalog) {
  return text::render(catalog.mcq_question(), {{"pronoun", s.pronoun}});
}

std::string render_query(std::string_view sentence, std::string_view question, const std::vector<std::string>& shown,
                         const Catalog& catalog) {
  std::vector<std::string> lines;
  lines.reserve(shown.size());
  for (std::size_t i = 0; i < shown.size(); ++i)
    lines.push_back(text::render(catalog.mcq_option_line(), {{"letter", catalog.letter(i)}, {"option", shown[i]}}));
  return text::render(catalog.mcq_body(), {{"sentence", std::string(sentence)},
                                           {"question", std::string(question)},
                                           {"options", text::join(lines, "\n")}});
}

namespace {

std::vector<std::string> apply_permutation(const std::vector<std::string>& canonical, const std::vector<int>& perm) {
  std::vector<std::string> shown;
  shown.reserve(perm.size());
  for (int id : perm) shown.push_back(canonical[id]);
  return shown;
}

}  // namespace

PromptPlan render_mcq(const corpus::CorefSample& s, std::uint64_t seed, const Catalog& catalog,
                      std::optional<std::string> pre_prompt) {
  std::vector<int> perm = option_permutation(s.id, seed, 3);
  std::vector<std::string> shown = apply_permutation(coref_options(s, catalog), perm);
  std::string query = render_query(s.sentence, coref_question(s, catalog), shown, catalog);
  return generate_plan(s.id, seed, std::move(shown), std::move(perm), pre_prompt.value_or(catalog.mcq_pre_prompt()),
                       std::move(query), catalog);
}

PromptPlan render_mcq_qa(const corpus::QASample& s, std::uint64_t seed, const Catalog& catalog,
                         std::optional<std::string> pre_prompt) {
  std::vector<int> perm = option_permutation(s.id, seed, s.options.size());
  std::vector<std::string> shown = apply_permutation(s.options, perm);
  std::string query = render_query(s.context, s.question, shown, catalog);
  return generate_plan(s.id, seed, std::move(shown), std::move(perm), pre_prompt.value_or(catalog.mcq_pre_prompt()),
                       std::move(query), catalog);
}

std::string letter_list(std::size_t n, const Catalog& catalog) {
  std::vector<std::string> parts;
  for (std::size_t i = 0; i < n; ++i) parts.push_back("(" + catalog.letter(i) + ")");
  return text::join(parts, ", ");
}

PromptPlan render_cot(const corpus::CorefSample& s, std::uint64_t seed, const Catalog& catalog) {
  PromptPlan p = render_mcq(s, seed, catalog);
  p.adaptation = Adaptation::kCot;
  p.suffix = "\n" + catalog.cot_reason();
  p.turns.push_back(
      {Role::kUser, text::render(catalog.cot_final(), {{"letters", letter_list(p.options_in_order.size(), catalog)}})});
  p.turns.push_back({Role::kAssistantExpected, ""});
  detail::rebuild_first_user(p);
  return p;
}

std::string fill_responses(std::string_view tmpl, const std::vector<std::string>& responses) {
  static constexpr std::string_view kKey = "{response_";
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const std::size_t hit = tmpl.find(kKey, pos);
    if (hit == std::string_view::npos) break;
    std::size_t end = hit + kKey.size();
    std::size_t k = 0;
    while (end < tmpl.size() && tmpl[end] >= '0' && tmpl[end] <= '9') k = k * 10 + (tmpl[end++] - '0');
    out.append(tmpl.substr(pos, hit - pos));
    if (end < tmpl.size() && tmpl[end] == '}' && end > hit + kKey.size() && k >= 1 && k <= responses.size()) {
      out += responses[k - 1];
      pos = end + 1;
    } else {
      out.append(kKey);
      pos = hit + kKey.size();
    }
  }
  out.append(tmpl.substr(pos));
  return out;
}

std::string render_quality_prompt(std::string_view query, std::string_view response, const Catalog& catalog) {
  const std::string& t = catalog.quality_judge();
  const auto q = t.find("[QUERY]");
  const auto r = t.find("[RESPONSE]");
  if (q == std::string::npos || r == std::string::npos || r < q)
    throw Error("quality judge template needs [QUERY] followed by [RESPONSE]");
  std::string out = t.substr(0, q);
  out += query;
  out.append(t, q + 7, r - q - 7);
  out += response;
  out.append(t, r + 10);
  return out;
}

}  // namespace biasaudit::prompting
