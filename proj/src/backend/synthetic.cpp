// Copyright 2026 The biasaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "biasaudit/backend.hpp"
#include "biasaudit/util/hash.hpp"
#include "biasaudit/util/rng.hpp"
#include "biasaudit/util/text.hpp"

namespace biasaudit::backend {

using corpus::Ambiguity;
using corpus::Gender;
using nlohmann::json;
using prompting::Adaptation;
using prompting::DebiasStrategy;
using prompting::StrategyKind;

namespace {

void check_prob(double p, const std::string& what) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error("synthetic config: " + what + " = " + std::to_string(p) + " is outside [0, 1]");
}

std::map<std::string, OccupationRates> rates_from(const json& j) {
  std::map<std::string, OccupationRates> out;
  for (const auto& [occ, r] : j.items())
    out[text::to_lower(occ)] = {r.at("male").get<double>(), r.at("female").get<double>()};
  return out;
}

json rates_to(const std::map<std::string, OccupationRates>& m) {
  json j = json::object();
  for (const auto& [occ, r] : m) j[occ] = {{"male", r.male}, {"female", r.female}};
  return j;
}

double clamp01(double p) { return std::min(1.0, std::max(0.0, p)); }

double scaled(const OccupationRates& r, Gender g, double k) {
  const double mid = 0.5 * (r.male + r.female);
  const double p = g == Gender::kMale ? r.male : r.female;
  return clamp01(mid + k * (p - mid));
}

}  // namespace

SyntheticModelConfig SyntheticModelConfig::from_json(const json& j) {
  SyntheticModelConfig c;
  try {
    c.name = j.value("name", c.name);
    if (const auto it = j.find("rates"); it != j.end()) c.type1 = rates_from(*it);
    if (const auto it = j.find("type2_rates"); it != j.end()) c.type2 = rates_from(*it);
    if (const auto it = j.find("default_rates"); it != j.end())
      c.default_rates = {it->at("male").get<double>(), it->at("female").get<double>()};
    c.instruction_fidelity = j.value("instruction_fidelity", 1.0);
    if (const auto it = j.find("strategy_response"); it != j.end())
      c.strategy_response = it->get<std::map<std::string, double>>();
    if (const auto it = j.find("adaptation_response"); it != j.end())
      c.adaptation_response = it->get<std::map<std::string, double>>();
    const std::string noise = j.value("score_noise", std::string("gumbel"));
    if (noise == "gumbel")
      c.score_noise = ScoreNoise::kGumbel;
    else if (noise == "none")
      c.score_noise = ScoreNoise::kNone;
    else
      throw Error("synthetic config: score_noise must be none or gumbel, got '" + noise + "'");
    if (const auto it = j.find("qa_rates"); it != j.end()) {
      for (const auto& [cls, r] : it->items())
        c.qa_rates[text::to_lower(cls)] = {r.at("negative").get<double>(), r.at("non_negative").get<double>()};
    }
    if (const auto it = j.find("likert"); it != j.end()) {
      const auto v = it->get<std::vector<double>>();
      if (v.size() != 5) throw Error("synthetic config: likert needs 5 weights");
      std::copy(v.begin(), v.end(), c.likert.begin());
    }
  } catch (const json::exception& e) {
    throw Error(std::string("synthetic config: ") + e.what());
  }
  c.validate();
  return c;
}

SyntheticModelConfig SyntheticModelConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open synthetic config " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error("synthetic config " + path.string() + ": " + e.what());
  }
}

json SyntheticModelConfig::to_json() const {
  json j = {{"name", name},
            {"rates", rates_to(type1)},
            {"default_rates", {{"male", default_rates.male}, {"female", default_rates.female}}},
            {"instruction_fidelity", instruction_fidelity},
            {"strategy_response", strategy_response},
            {"adaptation_response", adaptation_response},
            {"score_noise", score_noise == ScoreNoise::kGumbel ? "gumbel" : "none"},
            {"likert", likert}};
  if (!type2.empty()) j["type2_rates"] = rates_to(type2);
  json qa = json::object();
  for (const auto& [cls, r] : qa_rates) qa[cls] = {{"negative", r.first}, {"non_negative", r.second}};
  j["qa_rates"] = qa;
  return j;
}

void SyntheticModelConfig::validate() const {
  for (const auto* table : {&type1, &type2}) {
    for (const auto& [occ, r] : *table) {
      check_prob(r.male, "p(" + occ + " | male)");
      check_prob(r.female, "p(" + occ + " | female)");
    }
  }
  check_prob(default_rates.male, "default p(male)");
  check_prob(default_rates.female, "default p(female)");
  check_prob(instruction_fidelity, "instruction_fidelity");
  for (const auto& [cls, r] : qa_rates) {
    check_prob(r.first, "p(" + cls + " | negative)");
    check_prob(r.second, "p(" + cls + " | non_negative)");
  }
  double total = 0.0;
  for (double w : likert) {
    if (!(w >= 0.0)) throw Error("synthetic config: likert weights must be nonnegative");
    total += w;
  }
  if (total <= 0.0) throw Error("synthetic config: likert weights are all zero");
}

const OccupationRates& SyntheticModelConfig::rates(std::string_view occupation, Ambiguity a) const {
  const auto& table = a == Ambiguity::kType2 && !type2.empty() ? type2 : type1;
  const auto it = table.find(std::string(occupation));
  return it == table.end() ? default_rates : it->second;
}

double SyntheticModelConfig::expected_osb(std::string_view occupation, Ambiguity a) const {
  const auto& r = rates(occupation, a);
  return 100.0 * (r.male - r.female);
}

double SyntheticModelConfig::multiplier(const DebiasStrategy& s) const {
  if (const auto it = strategy_response.find(s.id()); it != strategy_response.end()) return it->second;
  if (const auto it = strategy_response.find(std::string(prompting::to_string(s.kind))); it != strategy_response.end())
    return it->second;
  return 1.0;
}

double SyntheticModelConfig::adaptation_multiplier(Adaptation a) const {
  const auto it = adaptation_response.find(std::string(prompting::to_string(a)));
  return it == adaptation_response.end() ? 1.0 : it->second;
}

SyntheticModelConfig scale_gaps(const SyntheticModelConfig& config, double k) {
  SyntheticModelConfig out = config;
  for (auto* table : {&out.type1, &out.type2})
    for (auto& [occ, r] : *table) r = {scaled(r, Gender::kMale, k), scaled(r, Gender::kFemale, k)};
  out.default_rates = {scaled(config.default_rates, Gender::kMale, k), scaled(config.default_rates, Gender::kFemale, k)};
  return out;
}

SyntheticModelConfig synthetic_apply_strategy(const SyntheticModelConfig& config, const DebiasStrategy& strategy) {
  if (strategy.kind == StrategyKind::kNone) return config;
  return scale_gaps(config, config.multiplier(strategy));
}

// ------------------------------------------------------------ request reading

namespace {

bool contains(std::string_view hay, std::string_view needle) {
  return !needle.empty() && hay.find(needle) != std::string_view::npos;
}

std::size_t count_of(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (std::size_t pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + needle.size())) ++n;
  return n;
}

std::string capture(const std::vector<std::pair<std::string, std::string>>& caps, std::string_view name) {
  for (const auto& [k, v] : caps)
    if (k == name) return v;
  return {};
}

// Template with {response_1} and {letters} treated as wildcards.
bool matches_reflection(std::string_view tmpl, std::string_view text) {
  return !tmpl.empty() && text::match_template(tmpl, text).has_value();
}

void read_query(const Request& req, const prompting::Catalog& catalog, RequestAnalysis& a) {
  // The query is the last MCQ body in the conversation.
  for (auto it = req.turns.rbegin(); it != req.turns.rend(); ++it) {
    if (it->role != Role::kUser) continue;
    const auto pos = it->text.rfind(catalog.sentence_marker());
    if (pos == std::string::npos) continue;
    const std::string_view rest = std::string_view(it->text).substr(pos);
    // Match the body up to its options block.
    const std::string& body = catalog.mcq_body();
    const auto opt = body.find("{options}");
    const std::string head = body.substr(0, opt);
    const auto last_lit = head.rfind('}');
    const std::string trailer = head.substr(last_lit + 1);
    const auto end = rest.find(trailer);
    if (end == std::string_view::npos) continue;
    const auto caps = text::match_template(head, rest.substr(0, end + trailer.size()));
    if (!caps) continue;
    a.sentence = capture(*caps, "sentence");
    a.question = capture(*caps, "question");
    return;
  }
}

}  // namespace

RequestAnalysis analyze_request(const Request& req, const prompting::Catalog& catalog) {
  RequestAnalysis a;
  std::vector<const Turn*> users;
  const Turn* system = nullptr;
  for (const auto& t : req.turns) {
    if (t.role == Role::kUser) users.push_back(&t);
    if (t.role == Role::kSystem && !system) system = &t;
  }
  if (users.empty()) return a;

  if (req.mode == PlanMode::kScoreOptions) {
    a.adaptation = Adaptation::kIntrinsic;
    const std::string& prefix = users.front()->text;
    if (auto caps = text::match_template(catalog.intrinsic_prefix(), prefix)) {
      a.sentence = capture(*caps, "sentence");
      a.question = capture(*caps, "pronoun");
    } else if (auto qa = text::match_template(catalog.intrinsic_qa_prefix(), prefix)) {
      a.sentence = capture(*qa, "context");
      a.question = capture(*qa, "question");
    } else {
      a.sentence = prefix;
    }
    return a;
  }

  const std::string& last = users.back()->text;
  const std::string& judge = catalog.quality_judge();
  if (const auto q = judge.find("[QUERY]"); q != std::string::npos && last.compare(0, q, judge, 0, q) == 0) {
    a.quality_judge = true;
    return a;
  }

  read_query(req, catalog, a);
  const std::string& first = users.front()->text;
  if (count_of(first, catalog.sentence_marker()) >= 2) a.adaptation = Adaptation::kFewShot;
  for (const auto* u : users)
    if (contains(u->text, catalog.cot_reason())) a.adaptation = Adaptation::kCot;

  const auto& explanation = catalog.two_round(StrategyKind::kSelfDebiasExplanation);
  const auto& causality = catalog.two_round(StrategyKind::kCausality);
  if (contains(last, catalog.cot_reason()) || contains(last, explanation.first) || contains(last, causality.first))
    a.final_round = false;

  // Strategy: read the pieces of the first user turn back off the text.
  const std::string head = first.substr(0, first.find('\n'));
  const std::string sys = system ? system->text : std::string();
  std::vector<std::string> pre_prompts{catalog.mcq_pre_prompt(),
                                       catalog.two_round(StrategyKind::kInstructionPPSR).pre_prompt};
  for (const auto& p : catalog.inline_prompts()) pre_prompts.push_back(p.user);
  std::string pre;
  for (const auto& c : pre_prompts)
    if (!c.empty() && c.size() > pre.size() && head.size() >= c.size() &&
        head.compare(head.size() - c.size(), c.size(), c) == 0)
      pre = c;
  std::string preamble(text::trim(std::string_view(head).substr(0, head.size() - pre.size())));

  DebiasStrategy s;
  if (!sys.empty() && sys == catalog.two_round(StrategyKind::kRolePPSR).system) {
    s = {StrategyKind::kRolePPSR, ""};
  } else if (!sys.empty() || pre != catalog.mcq_pre_prompt()) {
    if (sys.empty() && pre == catalog.two_round(StrategyKind::kInstructionPPSR).pre_prompt) {
      s = {StrategyKind::kInstructionPPSR, ""};
    } else {
      for (const auto& p : catalog.inline_prompts())
        if (p.user == pre && p.system == sys) s = {StrategyKind::kInlinePP, p.id};
    }
  }
  if (!preamble.empty()) {
    for (const auto& n : catalog.neutral_preambles())
      if (n.preamble == preamble) s = {StrategyKind::kNeutralControl, n.id};
    if (text::match_template(catalog.anti_stereo_template(true), preamble))
      s = {StrategyKind::kAntiStereoAll, ""};
    else if (text::match_template(catalog.anti_stereo_template(false), preamble))
      s = {StrategyKind::kAntiStereoMost, ""};
  }
  if (contains(first, explanation.first)) s = {StrategyKind::kSelfDebiasExplanation, ""};
  if (contains(first, causality.first)) s = {StrategyKind::kCausality, ""};
  for (std::size_t i = 1; i < users.size(); ++i) {
    if (matches_reflection(catalog.two_round(StrategyKind::kSelfDebiasReprompt).reflection, users[i]->text))
      s = {StrategyKind::kSelfDebiasReprompt, ""};
  }
  a.strategy = s;
  return a;
}

// ------------------------------------------------------------------ the model

namespace {

constexpr std::string_view kReasoning[] = {
    "Let me look at who does what in the sentence before deciding.",
    "The sentence structure determines the referent; I will weigh each option.",
    "I will consider the facts stated and set assumptions aside.",
};

constexpr std::string_view kGarbled[] = {
    "I am not able to decide this one.",
    "Hmm, that is an interesting sentence.",
    "Could you rephrase the question?",
    "It depends on how you read it.",
};

// What a request asks the model to choose between, in canonical order.
struct Target {
  std::vector<std::string> options;
  std::vector<double> base_probs;  // before gap scaling; unknown options hold the remainder
  std::vector<bool> is_unknown;
  std::vector<const OccupationRates*> rates;  // coref occupations only
  Gender gender = Gender::kMale;
  bool coref = false;
};

std::uint64_t content_hash(const Request& req) {
  Request r = req;
  r.seed = 0;
  return fnv1a64(r.canonical());
}

std::uint64_t stream_seed(const Request& req) {
  return mix_seed({content_hash(req), req.temperature > 0.0 ? req.seed : 0, 0x5e17});
}

template <class Range>
std::string pick(Rng& rng, const Range& r) {
  return std::string(r[rng.uniform_index(std::size(r))]);
}

std::optional<Gender> first_pronoun(std::string_view s) {
  std::string word;
  auto flush = [&]() -> std::optional<Gender> {
    auto g = corpus::pronoun_gender(word);
    word.clear();
    return g;
  };
  for (char c : s) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      word.push_back(c);
    } else if (!word.empty()) {
      if (auto g = flush()) return g;
    }
  }
  if (!word.empty()) return flush();
  return std::nullopt;
}

}  // namespace

SyntheticBackend::SyntheticBackend(SyntheticModelConfig config, const prompting::Catalog& catalog)
    : config_(std::move(config)), catalog_(catalog) {
  config_.validate();
  std::set<std::string> names;
  for (const auto& r : corpus::OccupationTable::bls2017().records()) names.insert(r.name);
  for (const auto* t : {&config_.type1, &config_.type2})
    for (const auto& [occ, r] : *t) names.insert(occ);
  occupations_.assign(names.begin(), names.end());
  refresh_id();
}

void SyntheticBackend::refresh_id() {
  const std::string digest = sha256_hex(config_.to_json().dump() + "|" + std::to_string(index_digest_));
  id_ = "synthetic:" + config_.name + ":" + digest.substr(0, 16);
}

void SyntheticBackend::add_index(const corpus::CorefSlice& slice) {
  std::set<std::string> names(occupations_.begin(), occupations_.end());
  for (const auto& s : slice.samples) {
    sentence_index_[s.sentence] = s;
    names.insert(s.occupation_a);
    names.insert(s.occupation_b);
    index_digest_ = mix_seed({index_digest_, fnv1a64(s.sentence), static_cast<std::uint64_t>(s.ambiguity)});
  }
  occupations_.assign(names.begin(), names.end());
  refresh_id();
}

void SyntheticBackend::add_index(const corpus::QASlice& slice) {
  for (const auto& s : slice.samples) {
    qa_index_[s.context + "\n" + s.question] = s;
    index_digest_ = mix_seed({index_digest_, fnv1a64(s.id), fnv1a64(s.context)});
  }
  refresh_id();
}

namespace {

std::optional<Target> resolve(const RequestAnalysis& a, const SyntheticModelConfig& config,
                              const std::vector<std::string>& occupations,
                              const std::map<std::string, corpus::CorefSample>& coref_index,
                              const std::map<std::string, corpus::QASample>& qa_index, const prompting::Catalog& catalog) {
  if (a.sentence.empty()) return std::nullopt;
  Target t;
  if (const auto it = qa_index.find(a.sentence + "\n" + a.question); it != qa_index.end()) {
    const auto& qa = it->second;
    double used = 0.0;
    std::size_t n_known = 0;
    for (const auto& c : qa.option_classes) n_known += c != corpus::kUnknownClass;
    for (std::size_t i = 0; i < qa.options.size(); ++i) {
      const bool unknown = qa.option_classes[i] == corpus::kUnknownClass;
      double p = 0.0;
      if (!unknown) {
        const auto r = config.qa_rates.find(qa.option_classes[i]);
        p = r == config.qa_rates.end() ? 0.9 / static_cast<double>(std::max<std::size_t>(n_known, 1))
            : qa.polarity == corpus::Polarity::kNegative ? r->second.first
                                                          : r->second.second;
      }
      used += p;
      t.options.push_back(qa.options[i]);
      t.base_probs.push_back(p);
      t.is_unknown.push_back(unknown);
    }
    const double rest = std::max(0.0, 1.0 - used);
    const auto n_unknown = std::count(t.is_unknown.begin(), t.is_unknown.end(), true);
    for (std::size_t i = 0; i < t.options.size(); ++i)
      if (t.is_unknown[i]) t.base_probs[i] = rest / static_cast<double>(n_unknown);
    t.rates.assign(t.options.size(), nullptr);
    return t;
  }

  std::string occ_a, occ_b;
  Ambiguity amb = Ambiguity::kType1;
  std::optional<Gender> gender;
  if (const auto it = coref_index.find(a.sentence); it != coref_index.end()) {
    occ_a = it->second.occupation_a;
    occ_b = it->second.occupation_b;
    amb = it->second.ambiguity;
    gender = it->second.pronoun_gender;
  } else {
    std::vector<std::string> found;
    for (const auto& m : text::find_phrases(a.sentence, occupations))
      if (std::find(found.begin(), found.end(), occupations[m.candidate]) == found.end())
        found.push_back(occupations[m.candidate]);
    if (found.size() < 2) return std::nullopt;
    occ_a = found[0];
    occ_b = found[1];
    gender = first_pronoun(a.question);
    if (!gender) gender = first_pronoun(a.sentence);
  }
  if (!gender) return std::nullopt;
  t.coref = true;
  t.gender = *gender;
  t.options = {occ_a, occ_b, catalog.unknown_option()};
  t.is_unknown = {false, false, true};
  t.rates = {&config.rates(occ_a, amb), &config.rates(occ_b, amb), nullptr};
  return t;
}

// Selection probabilities with every gap scaled by k; unknown options
// share what is left. Normalized when the occupations alone exceed 1.
std::vector<double> probabilities(const Target& t, double k) {
  std::vector<double> p(t.options.size(), 0.0);
  double used = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (t.is_unknown[i]) continue;
    p[i] = t.rates[i] ? scaled(*t.rates[i], t.gender, k) : t.base_probs[i];
    used += p[i];
  }
  if (!t.coref) {
    for (std::size_t i = 0; i < p.size(); ++i)
      if (t.is_unknown[i]) p[i] = t.base_probs[i];
  } else {
    const double rest = used < 1.0 ? 1.0 - used : 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
      if (t.is_unknown[i]) p[i] = rest;
  }
  double total = 0.0;
  for (double v : p) total += v;
  if (total > 1.0)
    for (double& v : p) v /= total;
  return p;
}

std::size_t draw(Rng& rng, const std::vector<double>& p) {
  double total = 0.0;
  for (double v : p) total += v;
  const double u = rng.uniform01() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return i;
  }
  for (std::size_t i = p.size(); i-- > 0;)
    if (p[i] > 0.0) return i;
  return 0;
}

std::string strip(std::string_view s) { return std::string(text::trim(s)); }

}  // namespace

Response SyntheticBackend::score_options(const Request& req) {
  if (req.mode != PlanMode::kScoreOptions || req.options.empty())
    throw ProtocolError("score_options needs a score-mode request with options", req.canonical());
  ++calls_;
  const RequestAnalysis a = analyze_request(req, catalog_);
  Rng rng(stream_seed(req));
  const double k = config_.adaptation_multiplier(Adaptation::kIntrinsic);

  std::vector<double> probs(req.options.size(), 1.0 / static_cast<double>(req.options.size()));
  if (auto t = resolve(a, config_, occupations_, sentence_index_, qa_index_, catalog_)) {
    const std::vector<double> p = probabilities(*t, k);
    for (std::size_t i = 0; i < req.options.size(); ++i) {
      const std::string opt = strip(req.options[i]);
      for (std::size_t j = 0; j < t->options.size(); ++j)
        if (text::iequals(opt, t->options[j])) probs[i] = p[j];
    }
  }
  std::vector<double> scores;
  scores.reserve(probs.size());
  for (double p : probs) {
    double s = std::log(std::max(p, 1e-12));
    if (config_.score_noise == ScoreNoise::kGumbel) s += rng.gumbel();
    scores.push_back(s);
  }
  return {std::move(scores), std::nullopt, id_, {}};
}

Response SyntheticBackend::generate(const Request& req) {
  if (req.mode != PlanMode::kGenerate) throw ProtocolError("generate needs a generate-mode request", req.canonical());
  ++calls_;
  const RequestAnalysis a = analyze_request(req, catalog_);
  Rng rng(stream_seed(req));
  auto reply = [&](std::string text) { return Response{std::nullopt, std::move(text), id_, {}}; };

  if (a.quality_judge) {
    const std::vector<double> w(config_.likert.begin(), config_.likert.end());
    return reply(std::to_string(draw(rng, w) + 1));
  }
  if (!a.final_round) return reply(pick(rng, kReasoning));

  const auto t = resolve(a, config_, occupations_, sentence_index_, qa_index_, catalog_);
  if (rng.uniform01() >= config_.instruction_fidelity || !t) return reply(pick(rng, kGarbled));
  const double k = config_.adaptation_multiplier(a.adaptation) * config_.multiplier(a.strategy);
  const std::size_t choice = draw(rng, probabilities(*t, k));
  return reply("The answer is " + t->options[choice] + ".");
}

}  // namespace biasaudit::backend
