// Copyright 2026 The biasaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <set>

#include "biasaudit/prompting.hpp"
#include "biasaudit/util/error.hpp"
#include "biasaudit/util/rng.hpp"
#include "biasaudit/util/text.hpp"
#include "detail.hpp"

namespace biasaudit::prompting {

std::string_view to_string(Makeup m) {
  switch (m) {
    case Makeup::kNeutral: return "neutral";
    case Makeup::kAnti: return "anti";
    case Makeup::kPro: return "pro";
  }
  return "neutral";
}

std::string_view to_string(Representation r) { return r == Representation::kEqual ? "equal" : "osb_weighted"; }

std::string_view to_string(OccupationSource s) {
  return s == OccupationSource::kInDistribution ? "in_distribution" : "out_of_distribution";
}

Makeup parse_makeup(std::string_view s) {
  const std::string l = text::to_lower(text::trim(s));
  if (l == "neutral") return Makeup::kNeutral;
  if (l == "anti") return Makeup::kAnti;
  if (l == "pro") return Makeup::kPro;
  throw Error("unknown few-shot makeup '" + std::string(s) + "'");
}

Representation parse_representation(std::string_view s) {
  const std::string l = text::to_lower(text::trim(s));
  if (l == "equal") return Representation::kEqual;
  if (l == "osb_weighted" || l == "weighted") return Representation::kOsbWeighted;
  throw Error("unknown few-shot representation '" + std::string(s) + "'");
}

OccupationSource parse_occupation_source(std::string_view s) {
  const std::string l = text::to_lower(text::trim(s));
  if (l == "in_distribution" || l == "id") return OccupationSource::kInDistribution;
  if (l == "out_of_distribution" || l == "ood") return OccupationSource::kOutOfDistribution;
  throw Error("unknown occupation source '" + std::string(s) + "'");
}

std::string FewShotSpec::id() const {
  return "n" + std::to_string(n) + "-" + std::string(to_string(makeup)) + "-" + std::string(to_string(representation)) +
         (occupation_source == OccupationSource::kInDistribution ? "-id" : "-ood");
}

namespace {

bool any_positive(const std::map<std::string, double>& w) {
  return std::any_of(w.begin(), w.end(), [](const auto& kv) { return std::isfinite(kv.second) && kv.second != 0.0; });
}

}  // namespace

void FewShotSpec::validate() const {
  if (n < 1) throw Error("few-shot n must be >= 1, got " + std::to_string(n));
  if (representation == Representation::kOsbWeighted) {
    if (weight_source.empty()) throw Error("osb_weighted few-shot spec needs a weight source");
    for (const auto& [occ, w] : weight_source)
      if (!std::isfinite(w)) throw Error("few-shot weight for '" + occ + "' is not finite");
    if (!any_positive(weight_source)) throw Error("few-shot weight vector is all zero");
  }
}

std::array<int, 3> neutral_split(int n) { return {(n + 2) / 3, (n + 1) / 3, n / 3}; }

std::vector<std::string> draw_weighted(const std::map<std::string, double>& weights, std::size_t count,
                                       std::uint64_t seed) {
  if (!any_positive(weights)) throw Error("weight vector is all zero");
  std::vector<std::string> names;
  std::vector<double> cum;
  double total = 0.0;
  for (const auto& [occ, w] : weights) {
    if (!std::isfinite(w) || w == 0.0) continue;
    total += std::abs(w);
    names.push_back(occ);
    cum.push_back(total);
  }
  Rng rng(mix_seed({seed, 0x77e1}));
  std::vector<std::string> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double u = rng.uniform01() * total;
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    out.push_back(names[std::min<std::size_t>(it - cum.begin(), names.size() - 1)]);
  }
  return out;
}

namespace {

bool is_kind(const corpus::CorefSample& s, ExemplarKind k) {
  switch (k) {
    case ExemplarKind::kPro: return s.ambiguity == corpus::Ambiguity::kType2 && s.orientation == corpus::Orientation::kPro;
    case ExemplarKind::kAnti:
      return s.ambiguity == corpus::Ambiguity::kType2 && s.orientation == corpus::Orientation::kAnti;
    case ExemplarKind::kAmbiguous: return s.ambiguity == corpus::Ambiguity::kType1;
  }
  return false;
}

std::string_view kind_name(ExemplarKind k) {
  switch (k) {
    case ExemplarKind::kPro: return "pro";
    case ExemplarKind::kAnti: return "anti";
    case ExemplarKind::kAmbiguous: return "ambiguous";
  }
  return "?";
}

}  // namespace

std::vector<Exemplar> compose_fewshot(const FewShotSpec& spec, const corpus::CorefSlice& pool, std::uint64_t seed,
                                      const std::vector<std::string>& exclude_ids) {
  spec.validate();
  std::vector<ExemplarKind> slots;
  auto add = [&](ExemplarKind k, int count) { slots.insert(slots.end(), static_cast<std::size_t>(count), k); };
  switch (spec.makeup) {
    case Makeup::kPro: add(ExemplarKind::kPro, spec.n); break;
    case Makeup::kAnti: add(ExemplarKind::kAnti, spec.n); break;
    case Makeup::kNeutral: {
      const auto split = neutral_split(spec.n);
      add(ExemplarKind::kPro, split[0]);
      add(ExemplarKind::kAnti, split[1]);
      add(ExemplarKind::kAmbiguous, split[2]);
      break;
    }
  }

  const std::set<std::string> excluded(exclude_ids.begin(), exclude_ids.end());
  std::vector<bool> used(pool.samples.size(), false);
  Rng rng(mix_seed({seed, 0xf3e5, static_cast<std::uint64_t>(spec.n)}));
  std::vector<Exemplar> out;
  out.reserve(slots.size());

  for (ExemplarKind kind : slots) {
    // Occupation weights over what is still drawable for this slot kind.
    std::map<std::string, std::vector<std::size_t>> by_occ;
    for (std::size_t i = 0; i < pool.samples.size(); ++i) {
      const auto& s = pool.samples[i];
      if (used[i] || excluded.count(s.id) || !is_kind(s, kind)) continue;
      by_occ[s.occupation_a].push_back(i);
      by_occ[s.occupation_b].push_back(i);
    }
    std::vector<std::pair<const std::string*, double>> weighted;
    double total = 0.0;
    for (const auto& [occ, idx] : by_occ) {
      double w = 1.0;
      if (spec.representation == Representation::kOsbWeighted) {
        const auto it = spec.weight_source.find(occ);
        w = it == spec.weight_source.end() || !std::isfinite(it->second) ? 0.0 : std::abs(it->second);
      }
      if (w > 0.0) {
        total += w;
        weighted.emplace_back(&occ, total);
      }
    }
    if (weighted.empty())
      throw Error("few-shot pool exhausted: no unused " + std::string(kind_name(kind)) + " exemplar left for spec " +
                  spec.id());
    const double u = rng.uniform01() * total;
    std::size_t pick = 0;
    while (pick + 1 < weighted.size() && weighted[pick].second <= u) ++pick;
    const std::string& occ = *weighted[pick].first;
    const auto& candidates = by_occ.at(occ);
    const std::size_t chosen = candidates[rng.uniform_index(candidates.size())];
    used[chosen] = true;

    Exemplar e;
    e.sample = pool.samples[chosen];
    e.kind = kind;
    e.target_occupation = occ;
    e.permutation = {0, 1, 2};
    rng.shuffle(std::span<int>(e.permutation));
    out.push_back(std::move(e));
  }
  rng.shuffle(std::span<Exemplar>(out));
  return out;
}

std::string render_context(const std::vector<Exemplar>& context, const Catalog& catalog) {
  std::string out;
  for (const auto& e : context) {
    const auto canonical = coref_options(e.sample, catalog);
    std::vector<std::string> shown;
    for (int id : e.permutation) shown.push_back(canonical[id]);
    const int gold = e.sample.gold == corpus::Referent::kA   ? kOptionA
                     : e.sample.gold == corpus::Referent::kB ? kOptionB
                                                             : kOptionUnknown;
    const auto pos = std::find(e.permutation.begin(), e.permutation.end(), gold) - e.permutation.begin();
    out += render_query(e.sample.sentence, coref_question(e.sample, catalog), shown, catalog);
    out += "\n";
    out += text::render(catalog.exemplar_answer(),
                        {{"letter", catalog.letter(static_cast<std::size_t>(pos))}, {"option", canonical[gold]}});
    out += "\n\n";
  }
  return out;
}

PromptPlan render_fewshot(const corpus::CorefSample& sample, const std::vector<Exemplar>& context, std::uint64_t seed,
                          const Catalog& catalog) {
  for (const auto& e : context)
    if (e.sample.id == sample.id) throw Error("few-shot context contains the query sample " + sample.id);
  PromptPlan p = render_mcq(sample, seed, catalog);
  p.adaptation = Adaptation::kFewShot;
  p.context = render_context(context, catalog);
  detail::rebuild_first_user(p);
  return p;
}

}  // namespace biasaudit::prompting
