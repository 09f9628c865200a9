// Copyright 2026 The biasaudit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 when
// any fails. Tolerances are pinned here and in the README.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <unistd.h>

#include <fmt/format.h>

#include "biasaudit/backend.hpp"
#include "biasaudit/harness.hpp"
#include "biasaudit/metrics.hpp"
#include "biasaudit/prompting.hpp"
#include "biasaudit/util/rng.hpp"

namespace ba = biasaudit;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kSource = BIASAUDIT_SOURCE_DIR;

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  failures += !ok;
  std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
}

// Ten occupations, one (male, female) pair per gap magnitude so that the two
// rates in a sentence always sum to 0.9.
struct Oracle {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::map<std::string, double> gap;
};

Oracle oracle() {
  const std::vector<std::string> male{"carpenter", "lawyer", "cook", "driver", "farmer"};
  const std::vector<std::string> female{"nurse", "secretary", "baker", "editor", "writer"};
  Oracle o;
  // linspace(-0.8, 0.8, 10): the male occupation of pair i takes the i-th
  // positive value and its partner the mirrored negative one.
  for (std::size_t i = 0; i < 5; ++i) {
    const double g = -0.8 + 1.6 * static_cast<double>(9 - i) / 9.0;
    o.pairs.emplace_back(male[i], female[i]);
    o.gap[male[i]] = g;
    o.gap[female[i]] = -g;
  }
  return o;
}

ba::backend::SyntheticModelConfig oracle_model(const Oracle& o) {
  ba::backend::SyntheticModelConfig c;
  c.name = "oracle";
  for (const auto& [occ, g] : o.gap) c.type1[occ] = {0.45 + g / 2, 0.45 - g / 2};
  c.score_noise = ba::backend::ScoreNoise::kGumbel;
  c.strategy_response["anti_stereo_all"] = -1.0;  // sign-flipped
  c.strategy_response["inline_pp:pp1"] = 0.5;     // gap-halved
  return c;
}

json oracle_grid(const Oracle& o, std::size_t per_cell, const json& cells) {
  json pairs = json::array();
  for (const auto& [m, f] : o.pairs) pairs.push_back({m, f});
  return {{"name", "oracle"},
          {"corpora", {{{"id", "oracle"}, {"synthetic", {{"per_cell", per_cell}, {"seed", 11}, {"explicit_pairs", pairs}}}}}},
          {"models", {{{"id", "oracle"}, {"backend", "synthetic:unused.json"}}}},
          {"cells", cells},
          {"seeds", {1, 2, 3, 4, 5}},
          {"concurrency", 8}};
}

ba::harness::BiasReport run_oracle(const Oracle& o, std::size_t per_cell, const json& cells) {
  const auto config = ba::harness::ExperimentConfig::from_json(oracle_grid(o, per_cell, cells));
  ba::harness::RunOptions options;
  options.backends["oracle"] = std::make_shared<ba::backend::SyntheticBackend>(oracle_model(o));
  return ba::harness::run_experiment(config, options);
}

const ba::harness::CellResult& cell(const ba::harness::BiasReport& r, const std::string& id) {
  for (const auto& c : r.cells)
    if (c.cell.id() == id) return c;
  throw ba::Error("no cell " + id);
}

// Per-occupation mean of O-SB over the cell's seeds.
std::map<std::string, double> mean_osb(const ba::harness::CellResult& c) {
  std::map<std::string, double> out;
  for (const auto& s : c.seeds)
    for (const auto& e : s.osb.at("all")) out[e.occupation] += e.value / static_cast<double>(c.seeds.size());
  return out;
}

double mean_asb(const ba::harness::CellResult& c) {
  double a = 0.0;
  for (const auto& s : c.seeds) a += s.asb.at("all") / static_cast<double>(c.seeds.size());
  return a;
}

const ba::harness::TransferRow& transfer(const ba::harness::BiasReport& r, const std::string& adapted) {
  for (const auto& t : r.transfer)
    if (t.adapted_cell == adapted) return t;
  throw ba::Error("no transfer row for " + adapted);
}

// ---------------------------------------------------------------- criteria

void osb_recovery() {
  const Oracle o = oracle();
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run_oracle(o, 500, json::array({{{"corpus", "oracle"}, {"adaptation", "zero_shot"}}}));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto& c = cell(r, "oracle/zero_shot/none");
  bool sizes = true;
  for (const auto& e : c.seeds.front().osb.at("all")) sizes &= e.n_male == 1000 && e.n_female == 1000;
  double worst = 0.0;
  for (const auto& [occ, v] : mean_osb(c)) worst = std::max(worst, std::abs(v - 100.0 * o.gap.at(occ)));
  const bool ok = sizes && worst <= 3.0 && seconds < 60.0 && mean_osb(c).size() == 10;
  report(ok, "oracle O-SB recovery",
         fmt::format("max |O-SB - 100*gap| = {:.2f} (tol 3), 1000 sentences per (occupation, gender): {}, run {:.1f} s "
                     "(limit 60)",
                     worst, sizes ? "yes" : "no", seconds));
}

void transfer_fidelity() {
  const Oracle o = oracle();
  const json cells = json::array(
      {{{"corpus", "oracle"}, {"adaptation", "intrinsic"}},
       {{"corpus", "oracle"}, {"adaptation", "zero_shot"}, {"strategies", {"none", "anti_stereo_all", "inline_pp:pp1"}}}});
  const auto r = run_oracle(o, 500, cells);
  const auto& same = transfer(r, "oracle/zero_shot/none");
  const auto& flip = transfer(r, "oracle/zero_shot/anti_stereo_all");
  const auto& half = transfer(r, "oracle/zero_shot/inline_pp:pp1");
  if (!same.stat || !flip.stat || !half.stat) {
    report(false, "transfer fidelity", "a transfer row is undefined: " + same.diagnostic + flip.diagnostic + half.diagnostic);
    return;
  }
  const double a_full = mean_asb(cell(r, "oracle/zero_shot/none"));
  const double a_half = mean_asb(cell(r, "oracle/zero_shot/inline_pp:pp1"));
  const double reduction = 100.0 * (1.0 - a_half / a_full);
  const bool ok = same.stat->rho >= 0.99 && same.stat->p_value < 1e-6 && flip.stat->rho <= -0.99 &&
                  half.stat->rho >= 0.98 && std::abs(reduction - 50.0) <= 5.0;
  report(ok, "transfer fidelity",
         fmt::format("identical rho={:.4f} p={:.2e} (>=0.99, <1e-6); flipped rho={:.4f} (<=-0.99); halved rho={:.4f} "
                     "(>=0.98), A-SB reduced {:.1f}% (50 +/- 5)",
                     same.stat->rho, same.stat->p_value, flip.stat->rho, half.stat->rho, reduction));
}

void pearson_oracle() {
  std::mt19937_64 gen(7);
  std::uniform_int_distribution<int> len(3, 20);
  std::normal_distribution<double> noise(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = len(gen);
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = 40.0 * noise(gen);
      y[i] = 0.3 * x[i] + 30.0 * noise(gen);
    }
    // Brute force: raw power sums in extended precision.
    long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
      sx += x[i];
      sy += y[i];
      sxx += static_cast<long double>(x[i]) * x[i];
      syy += static_cast<long double>(y[i]) * y[i];
      sxy += static_cast<long double>(x[i]) * y[i];
    }
    const long double ref = (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
    worst = std::max(worst, static_cast<double>(std::abs(ba::metrics::pearson(x, y).rho - ref)));
  }
  bool monotone = true;
  for (std::size_t n : {3u, 4u, 10u, 30u, 100u}) {
    double prev = 2.0;
    for (int i = 0; i < 100; ++i) {
      const double p = ba::metrics::pearson_p_value(i / 100.0, n);
      monotone &= p < prev && p == ba::metrics::pearson_p_value(-i / 100.0, n);
      prev = p;
    }
  }
  report(worst <= 1e-12 && monotone, "Pearson oracle",
         fmt::format("max |rho - brute force| = {:.2e} over 1000 pairs (tol 1e-12); p strictly decreasing in |rho|: {}",
                     worst, monotone ? "yes" : "no"));
}

void metric_invariants() {
  ba::corpus::SyntheticCorpusSpec spec;
  spec.pairs = ba::corpus::cross_gender_pairs(ba::corpus::OccupationTable::bls2017(), 0);
  spec.per_cell = 5;
  const auto slice = ba::corpus::generate_coref_corpus(spec, ba::corpus::OccupationTable::bls2017());
  const auto occs = ba::metrics::scorable_occupations(slice.samples);
  bool bounded = true, swap = true, dominance = true;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    ba::Rng rng(seed);
    std::vector<ba::metrics::Judgment> js(slice.size());
    // Extreme and random selection patterns.
    for (std::size_t i = 0; i < js.size(); ++i) {
      const auto& s = slice.samples[i];
      const int mode = static_cast<int>(seed % 3);
      js[i].sample_id = s.id;
      js[i].selected = mode == 0   ? static_cast<int>(rng.uniform_index(4)) - 1
                       : mode == 1 ? (s.pronoun_gender == ba::corpus::Gender::kMale ? 0 : 1)
                                   : (s.pronoun_gender == ba::corpus::Gender::kMale ? 1 : 2);
    }
    const auto t = ba::metrics::osb_table(slice.samples, js, occs);
    auto swapped = slice.samples;
    for (auto& s : swapped)
      s.pronoun_gender = s.pronoun_gender == ba::corpus::Gender::kMale ? ba::corpus::Gender::kFemale
                                                                       : ba::corpus::Gender::kMale;
    const auto m = ba::metrics::osb_table(swapped, js, occs);
    double mean = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      bounded &= std::abs(t[i].value) <= 100.0;
      swap &= m[i].value == -t[i].value;
      mean += t[i].value / static_cast<double>(t.size());
    }
    dominance &= ba::metrics::compute_asb(t) >= std::abs(mean);
  }
  const double pair = ba::metrics::compute_asb(std::vector<double>{50.0, -50.0});
  report(bounded && swap && dominance && pair == 50.0, "metric invariants",
         fmt::format("|O-SB| <= 100: {}; A-SB >= |mean O-SB|: {}; pronoun swap negates O-SB exactly: {}; "
                     "A-SB(+50, -50) = {}",
                     bounded ? "yes" : "no", dominance ? "yes" : "no", swap ? "yes" : "no", pair));
}

void judging() {
  const auto& catalog = ba::prompting::Catalog::builtin();
  ba::corpus::SyntheticCorpusSpec spec;
  spec.pairs = ba::corpus::cross_gender_pairs(ba::corpus::OccupationTable::bls2017(), 5);
  spec.per_cell = 1;
  const auto slice = ba::corpus::generate_coref_corpus(spec, ba::corpus::OccupationTable::bls2017());

  bool invariant = true;
  ba::Rng rng(3);
  for (const auto& s : slice.samples) {
    const auto canonical = ba::prompting::coref_options(s, catalog);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<int> perm{0, 1, 2};
      rng.shuffle(std::span<int>(perm));
      for (int target = 0; target < 3; ++target) {
        const auto pos = static_cast<std::size_t>(std::find(perm.begin(), perm.end(), target) - perm.begin());
        const std::string letter = "(" + catalog.letter(pos) + ")";
        for (const std::string& reply :
             {letter, letter + " " + canonical[target], "The answer is " + canonical[target] + "."})
          invariant &= ba::metrics::judge_generation(reply, s, perm).selected == target;
      }
    }
  }

  const auto& s2 = *std::find_if(slice.samples.begin(), slice.samples.end(),
                                 [](const auto& s) { return s.ambiguity == ba::corpus::Ambiguity::kType2; });
  const auto both = ba::metrics::judge_generation("Both the " + s2.occupation_a + " and the " + s2.occupation_b + ".",
                                                  s2, {0, 1, 2});
  const bool both_abstains = both.abstained() && both.status == ba::metrics::ParseStatus::kAmbiguousMention;

  std::vector<ba::corpus::CorefSample> type2;
  std::vector<ba::metrics::Judgment> js;
  for (const auto& s : slice.samples)
    if (s.ambiguity == ba::corpus::Ambiguity::kType2) {
      type2.push_back(s);
      auto j = ba::metrics::judge_generation("no idea", s, {0, 1, 2});
      js.push_back(j);
    }
  js[0] = ba::metrics::judge_generation(type2[0].gold == ba::corpus::Referent::kA ? "(a)" : "(b)", type2[0], {0, 1, 2});
  const auto rpa = ba::metrics::compute_rpa(type2, js).splits.at("average");
  const bool rpa_ok = rpa.total == type2.size() && rpa.correct == 1;

  const auto tie = ba::metrics::judge_intrinsic({-2.5, -2.5}, s2);
  const bool tie_ok = tie.abstained() && tie.correct == false;

  report(invariant && both_abstains && rpa_ok && tie_ok, "judging",
         fmt::format("relabeling invariance over 100 permutations x {} samples: {}; both options mentioned abstains: {}; "
                     "RPA counts {} abstentions as incorrect ({}/{}): {}; intrinsic tie abstains: {}",
                     slice.size(), invariant ? "yes" : "no", both_abstains ? "yes" : "no", type2.size() - 1,
                     rpa.correct, rpa.total, rpa_ok ? "yes" : "no", tie_ok ? "yes" : "no"));
}

void fewshot_composer() {
  ba::corpus::SyntheticCorpusSpec spec;
  spec.pairs = ba::corpus::cross_gender_pairs(ba::corpus::OccupationTable::bls2017(), 0);
  spec.per_cell = 2;
  const auto pool = ba::corpus::generate_coref_corpus(spec, ba::corpus::OccupationTable::bls2017());
  auto kinds = [](const std::vector<ba::prompting::Exemplar>& ctx) {
    std::array<int, 3> k{0, 0, 0};
    for (const auto& e : ctx) ++k[static_cast<int>(e.kind)];
    return k;
  };
  ba::prompting::FewShotSpec fs3;
  ba::prompting::FewShotSpec fs20;
  fs20.n = 20;
  bool split3 = true, split20 = true, no_leak = true;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    split3 &= kinds(ba::prompting::compose_fewshot(fs3, pool, seed)) == std::array<int, 3>{1, 1, 1};
    split20 &= kinds(ba::prompting::compose_fewshot(fs20, pool, seed)) == std::array<int, 3>{7, 7, 6};
  }
  for (const auto& s : pool.samples)
    for (const auto& e : ba::prompting::compose_fewshot(fs20, pool, 5, {s.id})) no_leak &= e.sample.id != s.id;

  std::map<std::string, double> weights;
  const auto names = ba::corpus::OccupationTable::bls2017().names();
  for (std::size_t i = 0; i < names.size(); i += 4) weights[names[i]] = (i % 8 == 0 ? 1.0 : -1.0) * (5.0 + 7.0 * i);
  const auto draws = ba::prompting::draw_weighted(weights, 10000, 12);
  std::map<std::string, double> freq;
  for (const auto& d : draws) freq[d] += 1e-4;
  double total = 0.0, tv = 0.0;
  for (const auto& [k, w] : weights) total += std::abs(w);
  for (const auto& [k, w] : weights) tv += 0.5 * std::abs(freq[k] - std::abs(w) / total);
  report(split3 && split20 && tv <= 0.03 && no_leak, "few-shot composer",
         fmt::format("n=3 neutral is 1/1/1: {}; n=20 is 7/7/6: {}; weighted sampling TV = {:.4f} over 10000 draws "
                     "(tol 0.03); no exemplar shares the query id: {}",
                     split3 ? "yes" : "no", split20 ? "yes" : "no", tv, no_leak ? "yes" : "no"));
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().filename() == "run_log.json") continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out[e.path().filename().string()] = ss.str();
  }
  return out;
}

void determinism() {
  const fs::path root = fs::temp_directory_path() / ("biasaudit_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  json grid = json::parse(R"({
    "corpora": [{"id": "syn", "synthetic": {"pairs": 6, "per_cell": 2, "seed": 1}}],
    "models": [{"id": "toy", "backend": "synthetic:toy_model.json"}],
    "judge": {"id": "judge", "backend": "synthetic:toy_model.json"},
    "cells": [
      {"corpus": "syn", "adaptation": "intrinsic"},
      {"corpus": "syn", "adaptation": "zero_shot", "strategies": ["none", "causality", "self_debias_explanation"]},
      {"corpus": "syn", "adaptation": "few_shot",
       "fewshot": {"n": 3, "representation": "osb_weighted", "weights_from": "intrinsic"}},
      {"corpus": "syn", "adaptation": "cot"}
    ],
    "seeds": [1, 2, 3]
  })");
  grid["cache_dir"] = (root / "cache").string();
  const auto config = ba::harness::ExperimentConfig::from_json(grid, kSource / "data" / "examples");
  ba::harness::run_experiment(config);  // warms the cache
  ba::harness::emit_report(ba::harness::run_experiment(config), root / "a");
  ba::harness::emit_report(ba::harness::run_experiment(config), root / "b");
  const auto a = snapshot(root / "a");
  const bool reports = a == snapshot(root / "b") && a.size() >= 8;
  fs::remove_all(root);

  const auto golden = ba::harness::ExperimentConfig::load(kSource / "tests" / "golden" / "dry_run_config.json");
  std::string first, second;
  for (const auto& l : ba::harness::dry_run(golden)) first += l + "\n";
  for (const auto& l : ba::harness::dry_run(golden)) second += l + "\n";
  std::ifstream in(kSource / "tests" / "golden" / "dry_run.jsonl", std::ios::binary);
  std::stringstream frozen;
  frozen << in.rdbuf();
  const bool dry = first == second && first == frozen.str();
  report(reports && dry, "determinism",
         fmt::format("{} report files byte-identical across two warm-cache runs: {}; --dry-run output byte-stable and "
                     "equal to the frozen file: {}",
                     a.size(), reports ? "yes" : "no", dry ? "yes" : "no"));
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, void (*)()>> checks{
      {"oracle O-SB recovery", osb_recovery}, {"transfer fidelity", transfer_fidelity},
      {"Pearson oracle", pearson_oracle},     {"metric invariants", metric_invariants},
      {"judging", judging},                   {"few-shot composer", fewshot_composer},
      {"determinism", determinism}};
  for (const auto& [name, fn] : checks) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(false, name, std::string("threw: ") + e.what());
    }
  }
  std::cout << fmt::format("{} of {} criteria passed\n", checks.size() - failures, checks.size());
  return failures == 0 ? 0 : 1;
}
