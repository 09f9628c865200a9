// Copyright 2026 The biasaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "biasaudit/corpus.hpp"

namespace biasaudit::prompting {

enum class Role { kSystem, kUser, kAssistantExpected };
enum class PlanMode { kScoreOptions, kGenerate };
enum class Adaptation { kIntrinsic, kZeroShot, kFewShot, kCot };

std::string_view to_string(Role r);
std::string_view to_string(PlanMode m);
std::string_view to_string(Adaptation a);
Adaptation parse_adaptation(std::string_view s);

enum class StrategyKind {
  kNone,
  kInlinePP,
  kSelfDebiasExplanation,
  kSelfDebiasReprompt,
  kInstructionPPSR,
  kRolePPSR,
  kCausality,
  kAntiStereoAll,
  kAntiStereoMost,
  kNeutralControl,
};

std::string_view to_string(StrategyKind k);

struct DebiasStrategy {
  StrategyKind kind = StrategyKind::kNone;
  std::string variant;  // catalog id for inline_pp / neutral_control

  // "none", "inline_pp:pp3", "neutral_control:nc1", "causality", ...
  std::string id() const;
  static DebiasStrategy parse(std::string_view id);
  bool operator==(const DebiasStrategy&) const = default;
};

struct Turn {
  Role role;
  std::string text;  // empty for kAssistantExpected until executed

  bool operator==(const Turn&) const = default;
};

struct InlinePrompt {
  std::string id;
  std::string user;
  std::string system;
};

struct NeutralPreamble {
  std::string id;
  std::string preamble;
};

struct TwoRoundStrategy {
  std::string first;        // instruction for the first round, may be empty
  std::string pre_prompt;   // replaces the default pre-prompt when set
  std::string system;
  std::string reflection;   // second round; may use {response_1} and {letters}
  bool canonical = false;
};

// Every template string the renderers use. Loaded from JSON so that
// wording can change without recompiling; the default ships with the
// library.
class Catalog {
 public:
  static Catalog from_json(const nlohmann::json& j);
  static Catalog load(const std::filesystem::path& path);
  static const Catalog& builtin();

  const nlohmann::json& raw() const { return raw_; }
  // SHA-256 of the canonical JSON form.
  const std::string& hash() const { return hash_; }

  std::string letter(std::size_t position) const;
  const std::string& unknown_option() const { return unknown_option_; }
  const std::string& sentence_marker() const { return sentence_marker_; }

  const std::string& intrinsic_prefix() const { return intrinsic_prefix_; }
  const std::string& intrinsic_option() const { return intrinsic_option_; }
  const std::string& intrinsic_qa_prefix() const { return intrinsic_qa_prefix_; }
  const std::string& mcq_pre_prompt() const { return mcq_pre_prompt_; }
  const std::string& mcq_question() const { return mcq_question_; }
  const std::string& mcq_body() const { return mcq_body_; }
  const std::string& mcq_option_line() const { return mcq_option_line_; }
  const std::string& mcq_answer_cue() const { return mcq_answer_cue_; }
  const std::string& exemplar_answer() const { return exemplar_answer_; }
  const std::string& cot_reason() const { return cot_reason_; }
  const std::string& cot_final() const { return cot_final_; }
  const std::string& quality_judge() const { return quality_judge_; }

  const std::vector<InlinePrompt>& inline_prompts() const { return inline_; }
  const std::vector<NeutralPreamble>& neutral_preambles() const { return neutral_; }
  const InlinePrompt& inline_prompt(std::string_view id) const;
  const NeutralPreamble& neutral_preamble(std::string_view id) const;
  const TwoRoundStrategy& two_round(StrategyKind kind) const;
  const std::string& anti_stereo_template(bool all) const { return all ? anti_all_ : anti_most_; }
  const std::vector<std::string>& causality_placeholders() const { return placeholders_; }
  const std::string& causality_second() const { return causality_second_; }

  std::string plural(std::string_view occupation) const;
  std::string gender_plural(corpus::Gender g) const;

  // Throws biasaudit::Error when the strategy's variant is not in the catalog.
  void check(const DebiasStrategy& s) const;

 private:
  nlohmann::json raw_;
  std::string hash_;
  std::vector<std::string> letters_;
  std::string unknown_option_, sentence_marker_;
  std::string intrinsic_prefix_, intrinsic_option_, intrinsic_qa_prefix_;
  std::string mcq_pre_prompt_, mcq_question_, mcq_body_, mcq_option_line_, mcq_answer_cue_, exemplar_answer_;
  std::string cot_reason_, cot_final_, quality_judge_;
  std::vector<InlinePrompt> inline_;
  std::vector<NeutralPreamble> neutral_;
  std::map<StrategyKind, TwoRoundStrategy> two_round_;
  std::string anti_all_, anti_most_;
  std::vector<std::string> placeholders_;
  std::string causality_second_;
  std::map<std::string, std::string> plurals_;
  std::string men_ = "men", women_ = "women";
};

// Canonical option ids for coreference samples. QA samples use the option
// index as its id.
inline constexpr int kOptionA = 0;
inline constexpr int kOptionB = 1;
inline constexpr int kOptionUnknown = 2;

struct PromptPlan {
  std::string sample_id;
  std::vector<Turn> turns;
  PlanMode mode = PlanMode::kGenerate;
  std::vector<std::string> options_in_order;  // as shown (continuations in score mode)
  std::vector<int> permutation;               // shown position -> canonical option id
  Adaptation adaptation = Adaptation::kZeroShot;
  DebiasStrategy strategy;
  std::uint64_t seed = 0;

  // Pieces the strategies rebuild the first user turn from:
  // first user turn = [preamble " "] pre_prompt "\n" context query [suffix].
  std::string preamble;
  std::string pre_prompt;
  std::string context;  // few-shot exemplars, empty otherwise
  std::string query;    // the MCQ for the sample itself
  std::string suffix;   // adaptation-specific trailer after the query

  nlohmann::json to_json() const;
  // Single-line canonical JSON; the unit of byte-for-byte determinism.
  std::string canonical() const;
  std::size_t generation_turns() const;
  bool operator==(const PromptPlan&) const = default;
};

// Every canonical id appears exactly once and ids are in [0, n).
bool is_bijection(const std::vector<int>& permutation);

// Next-token scoring plan: prefix plus one continuation per occupation.
PromptPlan render_intrinsic(const corpus::CorefSample& sample, const Catalog& catalog = Catalog::builtin());
PromptPlan render_intrinsic_qa(const corpus::QASample& sample, const Catalog& catalog = Catalog::builtin());

// Shown order of the options for (sample, seed).
std::vector<int> option_permutation(std::string_view sample_id, std::uint64_t seed, std::size_t n_options);

// Canonical option texts: {occupation_a, occupation_b, Unknown}.
std::vector<std::string> coref_options(const corpus::CorefSample& sample, const Catalog& catalog);

// Lettered MCQ for the query; `pre_prompt` defaults to the catalog's.
PromptPlan render_mcq(const corpus::CorefSample& sample, std::uint64_t seed, const Catalog& catalog = Catalog::builtin(),
                      std::optional<std::string> pre_prompt = std::nullopt);
PromptPlan render_mcq_qa(const corpus::QASample& sample, std::uint64_t seed, const Catalog& catalog = Catalog::builtin(),
                         std::optional<std::string> pre_prompt = std::nullopt);

// MCQ body only (no pre-prompt) with options in the given order.
std::string render_query(std::string_view sentence, std::string_view question, const std::vector<std::string>& shown,
                         const Catalog& catalog);
std::string coref_question(const corpus::CorefSample& sample, const Catalog& catalog);

enum class Makeup { kNeutral, kAnti, kPro };
enum class Representation { kEqual, kOsbWeighted };
enum class OccupationSource { kInDistribution, kOutOfDistribution };

std::string_view to_string(Makeup m);
std::string_view to_string(Representation r);
std::string_view to_string(OccupationSource s);
Makeup parse_makeup(std::string_view s);
Representation parse_representation(std::string_view s);
OccupationSource parse_occupation_source(std::string_view s);

struct FewShotSpec {
  int n = 3;
  Makeup makeup = Makeup::kNeutral;
  Representation representation = Representation::kEqual;
  std::map<std::string, double> weight_source;  // occupation -> O-SB; magnitudes are used
  OccupationSource occupation_source = OccupationSource::kInDistribution;

  // "n3-neutral-equal-id"
  std::string id() const;
  void validate() const;
};

enum class ExemplarKind { kPro, kAnti, kAmbiguous };

struct Exemplar {
  corpus::CorefSample sample;
  ExemplarKind kind;
  std::vector<int> permutation;
  std::string target_occupation;  // occupation drawn for this slot
};

// Slot sizes for a neutral context of n exemplars: {pro, anti, ambiguous}.
std::array<int, 3> neutral_split(int n);

// Draws `count` occupations with replacement, P(occ) proportional to
// |weights[occ]|. Throws when no weight is positive.
std::vector<std::string> draw_weighted(const std::map<std::string, double>& weights, std::size_t count,
                                       std::uint64_t seed);

// Solved exemplars for a few-shot context. Samples whose id is in
// `exclude_ids` are never used.
std::vector<Exemplar> compose_fewshot(const FewShotSpec& spec, const corpus::CorefSlice& pool, std::uint64_t seed,
                                      const std::vector<std::string>& exclude_ids = {});

std::string render_context(const std::vector<Exemplar>& context, const Catalog& catalog = Catalog::builtin());
PromptPlan render_fewshot(const corpus::CorefSample& sample, const std::vector<Exemplar>& context, std::uint64_t seed,
                          const Catalog& catalog = Catalog::builtin());

// Reason-then-answer plan: two generation rounds in one conversation.
PromptPlan render_cot(const corpus::CorefSample& sample, std::uint64_t seed, const Catalog& catalog = Catalog::builtin());

// "Most carpenters are women, and most nurses are men."
std::string anti_stereotype_preamble(const corpus::CorefSample& sample, bool all, const corpus::OccupationTable& table,
                                     const Catalog& catalog = Catalog::builtin());

// Entities a strategy may reference: the two occupations for coreference,
// the non-unknown option texts for QA.
struct StrategySubject {
  std::vector<std::string> entities;  // canonical order
  std::optional<corpus::CorefSample> coref;
};

StrategySubject subject_of(const corpus::CorefSample& sample);
StrategySubject subject_of(const corpus::QASample& sample);

// Applies a debiasing strategy to a generate-mode plan.
PromptPlan apply_strategy(const DebiasStrategy& strategy, const PromptPlan& base, const StrategySubject& subject,
                          const corpus::OccupationTable& table, const Catalog& catalog = Catalog::builtin());

// Substitutes earlier responses ({response_1}, ...) into a user turn.
std::string fill_responses(std::string_view text, const std::vector<std::string>& responses);

// The quality-judge prompt for one (query, response) pair.
std::string render_quality_prompt(std::string_view query, std::string_view response,
                                  const Catalog& catalog = Catalog::builtin());

// Lettered list "(a), (b), (c)" for n options.
std::string letter_list(std::size_t n, const Catalog& catalog);

}  // namespace biasaudit::prompting
