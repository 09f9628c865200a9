// Copyright 2026 The biasaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include "biasaudit/prompting.hpp"
#include "biasaudit/util/error.hpp"
#include "biasaudit/util/text.hpp"
#include "detail.hpp"

namespace biasaudit::prompting {

std::string anti_stereotype_preamble(const corpus::CorefSample& s, bool all, const corpus::OccupationTable& table,
                                     const Catalog& catalog) {
  const corpus::Gender ga = corpus::opposite(table.stereotype(s.occupation_a));
  const corpus::Gender gb = corpus::opposite(table.stereotype(s.occupation_b));
  return text::render(catalog.anti_stereo_template(all), {{"plural_a", catalog.plural(s.occupation_a)},
                                                          {"gender_a", catalog.gender_plural(ga)},
                                                          {"plural_b", catalog.plural(s.occupation_b)},
                                                          {"gender_b", catalog.gender_plural(gb)}});
}

StrategySubject subject_of(const corpus::CorefSample& s) { return {{s.occupation_a, s.occupation_b}, s}; }

StrategySubject subject_of(const corpus::QASample& s) {
  StrategySubject out;
  for (std::size_t i = 0; i < s.options.size(); ++i)
    if (i >= s.option_classes.size() || s.option_classes[i] != corpus::kUnknownClass) out.entities.push_back(s.options[i]);
  return out;
}

namespace {

void set_system(PromptPlan& p, const std::string& system) {
  if (system.empty()) return;
  if (!p.turns.empty() && p.turns.front().role == Role::kSystem)
    p.turns.front().text = system;
  else
    p.turns.insert(p.turns.begin(), {Role::kSystem, system});
}

std::string reflection_turn(const std::string& tmpl, const PromptPlan& p, const Catalog& catalog) {
  // {response_1} stays a placeholder until the first round has run.
  return text::render(tmpl, {{"response_1", "{response_1}"},
                             {"letters", letter_list(p.options_in_order.size(), catalog)}});
}

void add_round(PromptPlan& p, std::string user_text) {
  p.turns.push_back({Role::kUser, std::move(user_text)});
  p.turns.push_back({Role::kAssistantExpected, ""});
}

void apply_causality(PromptPlan& p, const StrategySubject& subject, const Catalog& catalog) {
  const auto& ph = catalog.causality_placeholders();
  if (subject.entities.size() > ph.size())
    throw Error("causality strategy has " + std::to_string(ph.size()) + " placeholders for " +
                std::to_string(subject.entities.size()) + " entities");
  const std::string original_query = p.query;
  const std::string answer_suffix = p.suffix;
  std::string masked = p.query;
  for (std::size_t i = 0; i < subject.entities.size(); ++i)
    masked = text::replace_whole_word(masked, subject.entities[i], ph[i]);
  p.query = masked;
  p.suffix = "\n" + catalog.two_round(StrategyKind::kCausality).first;

  std::vector<std::pair<std::string, std::string>> vars;
  const char* keys[] = {"a", "b"};
  for (std::size_t i = 0; i < 2; ++i) {
    const std::string entity = i < subject.entities.size() ? subject.entities[i] : std::string();
    vars.emplace_back(std::string("placeholder_") + keys[i], ph[i]);
    vars.emplace_back(std::string("entity_") + keys[i], entity);
  }
  vars.emplace_back("query", original_query + answer_suffix);
  vars.emplace_back("letters", letter_list(p.options_in_order.size(), catalog));
  vars.emplace_back("response_1", "{response_1}");
  add_round(p, text::render(catalog.causality_second(), vars));
}

}  // namespace

PromptPlan apply_strategy(const DebiasStrategy& strategy, const PromptPlan& base, const StrategySubject& subject,
                          const corpus::OccupationTable& table, const Catalog& catalog) {
  if (strategy.kind == StrategyKind::kNone) return base;
  if (base.mode != PlanMode::kGenerate) throw Error("strategies apply to generate-mode plans only");
  catalog.check(strategy);

  PromptPlan p = base;
  p.strategy = strategy;
  switch (strategy.kind) {
    case StrategyKind::kNone: break;
    case StrategyKind::kInlinePP: {
      const auto& v = catalog.inline_prompt(strategy.variant);
      p.pre_prompt = v.user;
      set_system(p, v.system);
      break;
    }
    case StrategyKind::kNeutralControl: p.preamble = catalog.neutral_preamble(strategy.variant).preamble; break;
    case StrategyKind::kAntiStereoAll:
    case StrategyKind::kAntiStereoMost:
      if (!subject.coref) throw Error("anti-stereotype preamble needs a coreference sample");
      p.preamble = anti_stereotype_preamble(*subject.coref, strategy.kind == StrategyKind::kAntiStereoAll, table, catalog);
      break;
    case StrategyKind::kSelfDebiasExplanation: {
      const auto& s = catalog.two_round(strategy.kind);
      p.suffix = "\n" + s.first;
      add_round(p, reflection_turn(s.reflection, p, catalog));
      break;
    }
    case StrategyKind::kSelfDebiasReprompt:
    case StrategyKind::kInstructionPPSR:
    case StrategyKind::kRolePPSR: {
      const auto& s = catalog.two_round(strategy.kind);
      if (!s.pre_prompt.empty()) p.pre_prompt = s.pre_prompt;
      set_system(p, s.system);
      add_round(p, reflection_turn(s.reflection, p, catalog));
      break;
    }
    case StrategyKind::kCausality: apply_causality(p, subject, catalog); break;
  }
  detail::rebuild_first_user(p);
  return p;
}

}  // namespace biasaudit::prompting
