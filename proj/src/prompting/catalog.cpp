// Copyright 2026 The biasaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <sstream>

#include "biasaudit/embedded_data.hpp"
#include "biasaudit/prompting.hpp"
#include "biasaudit/util/error.hpp"
#include "biasaudit/util/hash.hpp"
#include "biasaudit/util/text.hpp"

namespace biasaudit::prompting {
namespace {

using nlohmann::json;

const json& at(const json& j, std::string_view key, std::string_view where) {
  const auto it = j.find(key);
  if (it == j.end()) throw Error("catalog: missing key '" + std::string(key) + "' in " + std::string(where));
  return *it;
}

std::string str(const json& j, std::string_view key, std::string_view where) {
  const json& v = at(j, key, where);
  if (!v.is_string()) throw Error("catalog: '" + std::string(key) + "' in " + std::string(where) + " must be a string");
  return v.get<std::string>();
}

std::string opt_str(const json& j, std::string_view key) {
  const auto it = j.find(key);
  return it != j.end() && it->is_string() ? it->get<std::string>() : std::string();
}

TwoRoundStrategy two_round_from(const json& j, std::string_view where) {
  TwoRoundStrategy s;
  s.first = opt_str(j, "first");
  s.pre_prompt = opt_str(j, "pre_prompt");
  s.system = opt_str(j, "system");
  s.reflection = opt_str(j, "reflection");
  s.canonical = j.value("canonical", false);
  if (s.reflection.empty()) throw Error("catalog: strategy '" + std::string(where) + "' has no reflection");
  return s;
}

}  // namespace

Catalog Catalog::from_json(const json& j) {
  Catalog c;
  c.raw_ = j;
  c.hash_ = sha256_hex(j.dump());

  for (const auto& l : at(j, "letters", "catalog")) c.letters_.push_back(l.get<std::string>());
  if (c.letters_.size() < 3) throw Error("catalog: need at least 3 option letters");
  c.unknown_option_ = str(j, "unknown_option", "catalog");
  c.sentence_marker_ = str(j, "sentence_marker", "catalog");

  const json& intr = at(j, "intrinsic", "catalog");
  c.intrinsic_prefix_ = str(intr, "prefix", "intrinsic");
  c.intrinsic_option_ = str(intr, "option", "intrinsic");
  c.intrinsic_qa_prefix_ = str(at(j, "intrinsic_qa", "catalog"), "prefix", "intrinsic_qa");

  const json& mcq = at(j, "mcq", "catalog");
  c.mcq_pre_prompt_ = str(mcq, "pre_prompt", "mcq");
  c.mcq_question_ = str(mcq, "question", "mcq");
  c.mcq_body_ = str(mcq, "body", "mcq");
  c.mcq_option_line_ = str(mcq, "option_line", "mcq");
  c.mcq_answer_cue_ = str(mcq, "answer_cue", "mcq");
  c.exemplar_answer_ = str(mcq, "exemplar_answer", "mcq");

  const json& cot = at(j, "cot", "catalog");
  c.cot_reason_ = str(cot, "reason", "cot");
  c.cot_final_ = str(cot, "final", "cot");
  c.quality_judge_ = str(j, "quality_judge", "catalog");

  if (const auto it = j.find("gender_plural"); it != j.end()) {
    c.men_ = it->value("male", c.men_);
    c.women_ = it->value("female", c.women_);
  }
  if (const auto it = j.find("plurals"); it != j.end()) {
    for (const auto& [k, v] : it->items()) c.plurals_[text::to_lower(k)] = v.get<std::string>();
  }

  const json& st = at(j, "strategies", "catalog");
  for (const auto& e : at(st, "inline_pp", "strategies"))
    c.inline_.push_back({str(e, "id", "inline_pp"), str(e, "user", "inline_pp"), opt_str(e, "system")});
  for (const auto& e : at(st, "neutral_control", "strategies"))
    c.neutral_.push_back({str(e, "id", "neutral_control"), str(e, "preamble", "neutral_control")});

  const json& anti = at(st, "anti_stereo", "strategies");
  c.anti_all_ = str(anti, "all", "anti_stereo");
  c.anti_most_ = str(anti, "most", "anti_stereo");

  c.two_round_[StrategyKind::kSelfDebiasExplanation] =
      two_round_from(at(st, "self_debias_explanation", "strategies"), "self_debias_explanation");
  c.two_round_[StrategyKind::kSelfDebiasReprompt] =
      two_round_from(at(st, "self_debias_reprompt", "strategies"), "self_debias_reprompt");
  c.two_round_[StrategyKind::kInstructionPPSR] =
      two_round_from(at(st, "instruction_pp_sr", "strategies"), "instruction_pp_sr");
  c.two_round_[StrategyKind::kRolePPSR] = two_round_from(at(st, "role_pp_sr", "strategies"), "role_pp_sr");

  const json& causal = at(st, "causality", "strategies");
  TwoRoundStrategy cs;
  cs.first = str(causal, "first", "causality");
  cs.reflection = str(causal, "second", "causality");
  cs.canonical = causal.value("canonical", false);
  c.two_round_[StrategyKind::kCausality] = cs;
  c.causality_second_ = cs.reflection;
  for (const auto& p : at(causal, "placeholders", "causality")) c.placeholders_.push_back(p.get<std::string>());
  if (c.placeholders_.size() < 2) throw Error("catalog: causality needs at least 2 placeholders");
  return c;
}

Catalog Catalog::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open catalog " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error("catalog " + path.string() + ": " + e.what());
  }
}

const Catalog& Catalog::builtin() {
  static const Catalog c = from_json(json::parse(*embedded::file("catalog.json")));
  return c;
}

std::string Catalog::letter(std::size_t position) const {
  if (position >= letters_.size())
    throw Error("catalog: no option letter for position " + std::to_string(position));
  return letters_[position];
}

const InlinePrompt& Catalog::inline_prompt(std::string_view id) const {
  for (const auto& p : inline_)
    if (p.id == id) return p;
  throw Error("unknown inline pre-prompt variant '" + std::string(id) + "'");
}

const NeutralPreamble& Catalog::neutral_preamble(std::string_view id) const {
  for (const auto& p : neutral_)
    if (p.id == id) return p;
  throw Error("unknown neutral control variant '" + std::string(id) + "'");
}

const TwoRoundStrategy& Catalog::two_round(StrategyKind kind) const {
  const auto it = two_round_.find(kind);
  if (it == two_round_.end()) throw Error("catalog has no entry for strategy " + std::string(to_string(kind)));
  return it->second;
}

std::string Catalog::plural(std::string_view occupation) const {
  const std::string o = text::to_lower(occupation);
  if (const auto it = plurals_.find(o); it != plurals_.end()) return it->second;
  auto ends = [&](std::string_view suf) { return o.size() >= suf.size() && o.compare(o.size() - suf.size(), suf.size(), suf) == 0; };
  if (ends("person")) return o.substr(0, o.size() - 6) + "people";
  if (ends("man")) return o.substr(0, o.size() - 3) + "men";
  if (o.size() >= 2 && o.back() == 'y' && std::string_view("aeiou").find(o[o.size() - 2]) == std::string_view::npos)
    return o.substr(0, o.size() - 1) + "ies";
  if (ends("s") || ends("x") || ends("z") || ends("ch") || ends("sh")) return o + "es";
  return o + "s";
}

std::string Catalog::gender_plural(corpus::Gender g) const { return g == corpus::Gender::kMale ? men_ : women_; }

void Catalog::check(const DebiasStrategy& s) const {
  switch (s.kind) {
    case StrategyKind::kInlinePP: inline_prompt(s.variant); break;
    case StrategyKind::kNeutralControl: neutral_preamble(s.variant); break;
    case StrategyKind::kSelfDebiasExplanation:
    case StrategyKind::kSelfDebiasReprompt:
    case StrategyKind::kInstructionPPSR:
    case StrategyKind::kRolePPSR:
    case StrategyKind::kCausality: two_round(s.kind); break;
    default: break;
  }
}

}  // namespace biasaudit::prompting
