// Copyright 2026 The biasaudit Authors
// SPDX-License-Identifier: Apache-2.0
//
// audit: command-line front end for the bias-transfer harness.

#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "biasaudit/backend.hpp"
#include "biasaudit/harness.hpp"
#include "biasaudit/util/error.hpp"
#include "biasaudit/util/text.hpp"

namespace ba = biasaudit;
namespace fs = std::filesystem;
using ba::harness::ExperimentConfig;

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  for (const auto& part : ba::text::split(s, ',')) {
    const auto t = ba::text::trim(part);
    if (t.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(std::string(t), &used));
      if (used != t.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ba::Error("--seed-list: '" + std::string(t) + "' is not a nonnegative integer");
    }
  }
  if (out.empty()) throw ba::Error("--seed-list is empty");
  return out;
}

void write_outputs(const ba::harness::BiasReport& report, const fs::path& out, ba::harness::Format format) {
  const auto files = ba::harness::emit_report(report, out, format);
  std::cout << ba::harness::summary_text(report);
  std::cerr << fmt::format("wrote {} files to {}\n", files.size(), out.string());
}

int cmd_run(const std::string& config_path, const std::string& seed_list, bool dry, const std::string& format,
            const std::string& out_dir, bool serial) {
  ExperimentConfig config = ExperimentConfig::load(config_path);
  if (!seed_list.empty()) config.seeds = parse_seed_list(seed_list);
  if (dry) {
    for (const auto& line : ba::harness::dry_run(config)) std::cout << line << "\n";
    return 0;
  }
  ba::harness::RunOptions options;
  options.parallel = !serial;
  const auto report = ba::harness::run_experiment(config, options);
  write_outputs(report, out_dir.empty() ? config.resolve(config.output_dir) : fs::path(out_dir),
                ba::harness::parse_format(format));
  return 0;
}

int cmd_report(const std::string& cache_dir, const std::string& format, const std::string& out_dir) {
  const fs::path record = fs::path(cache_dir) / "experiment.json";
  if (!fs::exists(record)) throw ba::Error(record.string() + " not found; was this cache written by `audit run`?");
  ExperimentConfig config = ExperimentConfig::load(record);
  config.cache_dir = fs::absolute(cache_dir).string();
  ba::harness::RunOptions options;
  options.cache_mode = ba::backend::CacheMode::kCacheOnly;
  const auto report = ba::harness::run_experiment(config, options);
  write_outputs(report, out_dir.empty() ? config.resolve(config.output_dir) : fs::path(out_dir),
                ba::harness::parse_format(format));
  return 0;
}

std::string key_of(const ba::harness::OsbRow& r) { return r.model + "/" + r.corpus + "/" + r.adaptation + "/" + r.strategy; }

int cmd_transfer(const std::string& intrinsic, const std::vector<std::string>& adapted) {
  const auto base_rows = ba::harness::select_osb(intrinsic);
  std::map<std::string, double> base;
  std::set<std::string> base_cells;
  for (const auto& r : base_rows) {
    base.emplace(r.occupation, r.value);
    base_cells.insert(key_of(r));
  }
  if (base_cells.size() != 1) throw ba::Error("--intrinsic selects " + std::to_string(base_cells.size()) + " cells; need one");
  std::cout << "intrinsic,adapted,rho,p_value,n_points,classification,significant,pairing,diagnostic\n";
  for (const auto& spec : adapted) {
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_cell;
    std::map<std::string, std::set<std::uint64_t>> seeds;
    std::map<std::string, std::set<std::string>> occs;
    for (const auto& r : ba::harness::select_osb(spec)) {
      const auto it = base.find(r.occupation);
      if (it == base.end()) continue;
      auto& xy = by_cell[key_of(r)];
      xy.first.push_back(it->second);
      xy.second.push_back(r.value);
      seeds[key_of(r)].insert(r.seed);
      occs[key_of(r)].insert(r.occupation);
    }
    for (const auto& [cell, xy] : by_cell) {
      const auto row = ba::harness::transfer_from_points(
          "", *base_cells.begin(), cell, xy.first, xy.second,
          fmt::format("{} occupations x {} seeds", occs[cell].size(), seeds[cell].size()));
      if (row.stat)
        std::cout << fmt::format("{},{},{:.6f},{:.6g},{},{},{},{},\n", row.intrinsic_cell, row.adapted_cell,
                                 row.stat->rho, row.stat->p_value, row.stat->n_points, row.stat->classification,
                                 row.stat->significant ? "true" : "false", row.stat->pairing);
      else
        std::cout << fmt::format("{},{},,,,,,,\"{}\"\n", row.intrinsic_cell, row.adapted_cell, row.diagnostic);
    }
  }
  return 0;
}

int cmd_quality(const std::string& judge, const std::string& generations, const std::string& cache_dir,
                std::size_t concurrency, const std::string& out) {
  auto backend = ba::backend::make_backend(judge);
  const fs::path dir = ba::backend::CachingBackend::directory_from_env(cache_dir);
  if (!dir.empty()) backend = std::make_shared<ba::backend::CachingBackend>(backend, dir);
  const auto gens = ba::harness::read_generations(generations);
  const auto scores = ba::harness::judge_quality(gens, *backend, ba::prompting::Catalog::builtin(), concurrency);
  const auto summary = ba::harness::summarize_quality(scores);
  std::ofstream file;
  if (!out.empty()) {
    file.open(out);
    if (!file) throw ba::Error("cannot write " + out);
  }
  std::ostream& os = out.empty() ? std::cout : file;
  os << "model,cell,likert_mean,likert_sd,scored,missing\n";
  for (const auto& q : summary)
    os << fmt::format("{},{},{:.3f},{:.3f},{},{}\n", q.model, q.cell, q.likert.mean, q.likert.sd, q.likert.count,
                      q.missing);
  return 0;
}

int cmd_serve(const std::string& model, const std::string& host, int port, const std::vector<std::string>& corpora) {
  auto config = ba::backend::SyntheticModelConfig::load(model);
  ba::backend::SyntheticBackend backend(config);
  const auto& table = ba::corpus::OccupationTable::bls2017();
  for (const auto& c : corpora) backend.add_index(ba::corpus::load_coref_corpus(c, table));
  ba::backend::EvalServer server(backend);
  std::cerr << fmt::format("serving {} on http://{}:{}/v1/eval\n", backend.id(), host, port);
  server.listen(host, port);
  return 0;
}

int cmd_gen_corpus(std::size_t pairs, std::size_t per_cell, std::uint64_t seed, const std::string& out) {
  ba::corpus::SyntheticCorpusSpec spec;
  spec.pairs = ba::corpus::cross_gender_pairs(ba::corpus::OccupationTable::bls2017(), pairs);
  spec.per_cell = per_cell;
  spec.seed = seed;
  const auto slice = ba::corpus::generate_coref_corpus(spec, ba::corpus::OccupationTable::bls2017());
  if (out.empty()) {
    ba::corpus::write_coref_jsonl(std::cout, slice);
  } else {
    std::ofstream f(out);
    if (!f) throw ba::Error("cannot write " + out);
    ba::corpus::write_coref_jsonl(f, slice);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Audit intrinsic and prompt-adapted gender bias of language models"};
  app.require_subcommand(1);

  std::string config, seed_list, format = "csv", out_dir;
  bool dry = false, serial = false;
  auto* run = app.add_subcommand("run", "Run an experiment grid");
  run->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--seed-list", seed_list, "Comma-separated seeds overriding the config");
  run->add_flag("--dry-run", dry, "Print the rendered plans as JSON lines and exit");
  run->add_option("--format", format, "Table format")->check(CLI::IsMember({"csv", "jsonl"}));
  run->add_option("--out", out_dir, "Output directory (default: config output_dir)");
  run->add_flag("--serial", serial, "Execute backend calls on one thread");

  std::string from_cache;
  auto* report = app.add_subcommand("report", "Rebuild a report from a cache without calling any model");
  report->add_option("--from-cache", from_cache, "Cache directory written by `run`")->required()->check(CLI::ExistingDirectory);
  report->add_option("--format", format, "Table format")->check(CLI::IsMember({"csv", "jsonl"}));
  report->add_option("--out", out_dir, "Output directory");

  std::string intrinsic;
  std::vector<std::string> adapted;
  auto* transfer = app.add_subcommand("transfer", "Correlate O-SB vectors of report cells");
  transfer->add_option("--intrinsic", intrinsic, "osb_per_occupation.csv#model/corpus/adaptation/strategy")->required();
  transfer->add_option("--adapted", adapted, "One or more selectors; '*' matches any part")->required();

  std::string judge, generations, quality_out, cache_dir;
  std::size_t concurrency = 8;
  auto* quality = app.add_subcommand("quality", "Score generated responses with a judge model");
  quality->add_option("--judge", judge, "Judge backend descriptor")->required();
  quality->add_option("--generations", generations, "generations.jsonl from a run")->required()->check(CLI::ExistingFile);
  quality->add_option("--cache-dir", cache_dir, "Response cache for judge calls");
  quality->add_option("--concurrency", concurrency, "In-flight judge calls");
  quality->add_option("--out", quality_out, "CSV path (default: stdout)");

  std::string model, host = "127.0.0.1";
  int port = 8088;
  std::vector<std::string> index;
  auto* serve = app.add_subcommand("serve-synthetic", "Serve the synthetic model over the /v1/eval protocol");
  serve->add_option("--model", model, "Synthetic model config (JSON)")->required()->check(CLI::ExistingFile);
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--corpus", index, "Coreference corpora the model may look ambiguity up in");

  std::size_t pairs = 0, per_cell = 1;
  std::uint64_t seed = 0;
  std::string corpus_out;
  auto* gen = app.add_subcommand("gen-corpus", "Write a synthetic WinoBias-shaped corpus as JSONL");
  gen->add_option("--pairs", pairs, "Occupation pairs (0 = all)");
  gen->add_option("--per-cell", per_cell, "Sentences per (pair, gender, type)");
  gen->add_option("--seed", seed);
  gen->add_option("--out", corpus_out, "Output path (default: stdout)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config, seed_list, dry, format, out_dir, serial);
    if (*report) return cmd_report(from_cache, format, out_dir);
    if (*transfer) return cmd_transfer(intrinsic, adapted);
    if (*quality) return cmd_quality(judge, generations, cache_dir, concurrency, quality_out);
    if (*serve) return cmd_serve(model, host, port, index);
    if (*gen) return cmd_gen_corpus(pairs, per_cell, seed, corpus_out);
  } catch (const std::exception& e) {
    std::cerr << "audit: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
