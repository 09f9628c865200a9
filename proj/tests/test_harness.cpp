// Copyright 2026 The biasaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

#include <gtest/gtest.h>

#include "biasaudit/harness.hpp"

using namespace biasaudit::harness;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kSource = BIASAUDIT_SOURCE_DIR;

json small_grid() {
  return json::parse(R"({
    "name": "small",
    "corpora": [{"id": "syn", "synthetic": {"pairs": 4, "per_cell": 3, "seed": 2}}],
    "models": [{"id": "toy", "backend": "synthetic:toy_model.json"}],
    "cells": [
      {"corpus": "syn", "adaptation": "intrinsic"},
      {"corpus": "syn", "adaptation": "zero_shot", "strategies": ["none", "anti_stereo_all", "self_debias_reprompt"]},
      {"corpus": "syn", "adaptation": "few_shot",
       "fewshot": {"n": 3, "representation": "osb_weighted", "weights_from": "intrinsic"}}
    ],
    "seeds": [1, 2, 3],
    "concurrency": 4
  })");
}

ExperimentConfig config_of(const json& j) { return ExperimentConfig::from_json(j, kSource / "data" / "examples"); }

fs::path temp_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("biasaudit_harness_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Every emitted file except the timing log, keyed by name.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().filename() != "run_log.json") out[e.path().filename().string()] = slurp(e.path());
  return out;
}

void expect_rejected(json j, const std::string& fragment) {
  try {
    const auto c = config_of(j);
    c.validate(biasaudit::prompting::Catalog::builtin());
    expand_cells(c);
    ADD_FAILURE() << "accepted config, expected error containing '" << fragment << "'";
  } catch (const biasaudit::Error& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

}  // namespace

TEST(Config, ParsesAndExpandsCells) {
  const auto c = config_of(small_grid());
  c.validate(biasaudit::prompting::Catalog::builtin());
  const auto cells = expand_cells(c);
  ASSERT_EQ(cells.size(), 5u);
  EXPECT_EQ(cells[0].id(), "syn/intrinsic/none");
  EXPECT_EQ(cells[2].id(), "syn/zero_shot/anti_stereo_all");
  EXPECT_EQ(cells[4].id(), "syn/few_shot[n3-neutral-osb_weighted-id]/none");
  EXPECT_EQ(c.hash().size(), 64u);
  EXPECT_EQ(config_of(c.to_json()).hash(), c.hash());
}

TEST(Config, HashIgnoresWhereOutputGoes) {
  auto j = small_grid();
  const auto base = config_of(j).hash();
  j["output_dir"] = "/elsewhere";
  j["cache_dir"] = "/tmp/cache";
  j["concurrency"] = 1;
  EXPECT_EQ(config_of(j).hash(), base);
  j["seeds"] = {1, 2};
  EXPECT_NE(config_of(j).hash(), base);
}

TEST(Config, RejectsInconsistentGrids) {
  auto j = small_grid();
  j["seeds"] = json::array();
  expect_rejected(j, "seeds");

  j = small_grid();
  j["cells"][0]["corpus"] = "nope";
  expect_rejected(j, "unknown corpus");

  j = small_grid();
  j["cells"][1]["strategies"] = {"inline_pp:pp42"};
  expect_rejected(j, "pp42");

  j = small_grid();
  j["cells"][0]["strategies"] = {"causality"};
  expect_rejected(j, "intrinsic");

  j = small_grid();
  j["cells"].erase(0);
  expect_rejected(j, "weights_from=intrinsic");

  j = small_grid();
  j["models"].push_back(j["models"][0]);
  expect_rejected(j, "duplicate model");

  j = small_grid();
  j["cells"].push_back(j["cells"][1]);
  expect_rejected(j, "listed twice");

  j = small_grid();
  j["cells"][1]["adaptation"] = "telepathy";
  EXPECT_THROW(config_of(j), biasaudit::Error);
}

TEST(Run, ParallelMatchesSerialAndIsDeterministic) {
  const auto config = config_of(small_grid());
  RunOptions serial;
  serial.parallel = false;
  const fs::path a = temp_dir("par"), b = temp_dir("ser"), c = temp_dir("par2");
  emit_report(run_experiment(config), a);
  emit_report(run_experiment(config, serial), b);
  emit_report(run_experiment(config), c);
  const auto sa = snapshot(a);
  EXPECT_GE(sa.size(), 7u);
  EXPECT_EQ(sa, snapshot(b));
  EXPECT_EQ(sa, snapshot(c));
  for (const auto& d : {a, b, c}) fs::remove_all(d);
}

TEST(Run, WarmCacheReplaysByteIdentically) {
  auto j = small_grid();
  const fs::path cache = temp_dir("cache");
  j["cache_dir"] = cache.string();
  const auto config = config_of(j);
  const auto first = run_experiment(config);
  EXPECT_GT(first.log.cache_writes, 0u);
  const fs::path a = temp_dir("warm_a"), b = temp_dir("warm_b"), c = temp_dir("cold");
  const auto warm = run_experiment(config);
  EXPECT_EQ(warm.log.cache_misses, 0u);
  emit_report(warm, a);
  emit_report(run_experiment(config), b);
  EXPECT_EQ(snapshot(a), snapshot(b));

  // Rebuilding from the cache alone gives the same report.
  RunOptions only;
  only.cache_mode = biasaudit::backend::CacheMode::kCacheOnly;
  emit_report(run_experiment(config, only), c);
  EXPECT_EQ(snapshot(a), snapshot(c));

  // A grid the cache has never seen cannot be replayed.
  auto bigger = j;
  bigger["seeds"] = {1, 2, 3, 4};
  EXPECT_THROW(run_experiment(config_of(bigger), only), biasaudit::Error);
  for (const auto& d : {cache, a, b, c}) fs::remove_all(d);
}

TEST(Run, ReportShape) {
  const auto report = run_experiment(config_of(small_grid()));
  ASSERT_EQ(report.cells.size(), 5u);
  EXPECT_EQ(report.cells[0].seeds.size(), 1u);  // intrinsic scoring is seed-free
  EXPECT_EQ(report.cells[1].seeds.size(), 3u);
  // One transfer row per prompted cell; scatter = occupations x seeds.
  ASSERT_EQ(report.transfer.size(), 4u);
  const std::size_t occs = report.cells[0].seeds[0].osb.at("all").size();
  EXPECT_EQ(occs, 8u);
  std::size_t for_first = 0;
  for (const auto& p : report.scatter) for_first += p.adapted_cell == report.transfer[0].adapted_cell;
  EXPECT_EQ(for_first, occs * 3);
  ASSERT_TRUE(report.transfer[0].stat);
  EXPECT_EQ(report.transfer[0].stat->n_points, occs * 3);
  EXPECT_EQ(report.transfer[0].stat->pairing, "8 occupations x 3 seeds");
}

TEST(Run, BarsCoverTheWholeTable) {
  auto j = small_grid();
  j["corpora"][0]["synthetic"]["pairs"] = 0;
  j["cells"] = {{{"corpus", "syn"}, {"adaptation", "intrinsic"}}};
  const fs::path out = temp_dir("bars");
  emit_report(run_experiment(config_of(j)), out);
  std::ifstream in(out / "osb_bars.csv");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') ++rows;
  EXPECT_EQ(rows, 1u + 40u);  // header + 40 occupations
  fs::remove_all(out);
}

TEST(DryRun, MatchesGoldenFile) {
  const auto config = ExperimentConfig::load(kSource / "tests" / "golden" / "dry_run_config.json");
  const auto lines = dry_run(config);
  std::string joined;
  for (const auto& l : lines) joined += l + "\n";
  EXPECT_EQ(joined, slurp(kSource / "tests" / "golden" / "dry_run.jsonl"));
  EXPECT_EQ(dry_run(config), lines);
}

TEST(DryRun, RefusesModelDependentWeights) {
  EXPECT_THROW(dry_run(config_of(small_grid())), biasaudit::Error);
}

TEST(Osb, SelectorsReadTheEmittedTable) {
  const fs::path out = temp_dir("select");
  emit_report(run_experiment(config_of(small_grid())), out);
  const std::string file = (out / "osb_per_occupation.csv").string();
  const auto intrinsic = select_osb(file + "#toy/syn/intrinsic/none");
  EXPECT_EQ(intrinsic.size(), 8u);
  const auto zero = select_osb(file + "#toy/syn/zero_shot/*");
  EXPECT_EQ(zero.size(), 8u * 3 * 3);
  EXPECT_THROW(select_osb(file + "#toy/syn/cot/none"), biasaudit::Error);
  fs::remove_all(out);
}

TEST(Transfer, FromPoints) {
  const auto row = transfer_from_points("m", "i", "a", {1, 2, 3, 4}, {2, 4, 6, 8.5}, "4 points");
  ASSERT_TRUE(row.stat);
  EXPECT_GT(row.stat->rho, 0.99);
  const auto flat = transfer_from_points("m", "i", "a", {1, 2, 3}, {5, 5, 5}, "3 points");
  EXPECT_FALSE(flat.stat);
  EXPECT_NE(flat.diagnostic.find("zero variance"), std::string::npos);
}

TEST(Quality, LikertParsing) {
  EXPECT_EQ(parse_likert("4"), 4);
  EXPECT_EQ(parse_likert(" Score: 5."), 5);
  EXPECT_FALSE(parse_likert("10"));
  EXPECT_FALSE(parse_likert("0"));
  EXPECT_FALSE(parse_likert("3 or 4"));
  EXPECT_FALSE(parse_likert("great"));
}

TEST(Quality, JudgeScoresEveryGeneration) {
  auto j = small_grid();
  j["judge"] = {{"id", "judge"}, {"backend", "synthetic:toy_model.json"}};
  const auto report = run_experiment(config_of(j));
  ASSERT_FALSE(report.quality.empty());
  EXPECT_EQ(report.quality.size(), report.generations.size());
  for (const auto& q : report.quality) {
    ASSERT_TRUE(q.likert);
    EXPECT_GE(*q.likert, 3);  // toy judge weights only 3..5
  }
  EXPECT_EQ(report.quality_summary.size(), 4u);
}
