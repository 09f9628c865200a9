// Copyright 2026 The biasaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "biasaudit/backend.hpp"
#include "biasaudit/corpus.hpp"
#include "biasaudit/metrics.hpp"
#include "biasaudit/prompting.hpp"

namespace biasaudit::harness {

namespace fs = std::filesystem;

enum class CorpusKind { kCoref, kQA, kWinogender };

struct SyntheticSource {
  std::size_t pairs = 0;  // 0 = one per occupation of the larger gender group
  std::size_t per_cell = 1;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> explicit_pairs;
};

struct CorpusConfig {
  std::string id;
  CorpusKind kind = CorpusKind::kCoref;
  std::vector<std::string> paths;            // relative to the config file
  std::optional<SyntheticSource> synthetic;  // generated instead of loaded
  std::vector<std::string> filter;           // CorefFilter predicates
  std::string table;                         // winogender: occupation table for replacements
  std::uint64_t seed = 0;                    // winogender reformat seed
};

struct ModelConfig {
  std::string id;
  std::string backend;  // descriptor, see backend::make_backend
};

struct FewShotConfig {
  prompting::FewShotSpec spec;
  std::string pool;          // corpus id the exemplars come from; empty = the cell's corpus
  std::string weights_from;  // "intrinsic": the model's intrinsic O-SB on the cell's corpus
};

struct CellConfig {
  std::string corpus;
  prompting::Adaptation adaptation = prompting::Adaptation::kZeroShot;
  std::vector<prompting::DebiasStrategy> strategies{prompting::DebiasStrategy{}};
  std::optional<FewShotConfig> fewshot;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::vector<CorpusConfig> corpora;
  std::vector<ModelConfig> models;
  std::optional<ModelConfig> judge;
  std::vector<CellConfig> cells;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double temperature = 0.7;  // prompted cells; intrinsic scoring always uses 0
  int max_tokens = 64;
  std::size_t concurrency = 8;
  std::string output_dir = "out";
  std::string cache_dir;  // empty = no cache unless BIASAUDIT_CACHE_DIR is set
  std::string occupation_table = "bls2017";
  std::string catalog;  // empty = built-in
  fs::path base_dir;    // where relative paths resolve; not serialized

  static ExperimentConfig from_json(const nlohmann::json& j, const fs::path& base_dir = {});
  static ExperimentConfig load(const fs::path& path);
  nlohmann::json to_json() const;
  // SHA-256 of the serialized config without output_dir, cache_dir and concurrency.
  std::string hash() const;
  fs::path resolve(const std::string& path) const;
  void validate(const prompting::Catalog& catalog) const;
};

// One expanded grid cell: corpus x adaptation x few-shot spec x strategy.
struct Cell {
  std::string corpus;
  prompting::Adaptation adaptation = prompting::Adaptation::kZeroShot;
  prompting::DebiasStrategy strategy;
  std::optional<FewShotConfig> fewshot;

  // "zero_shot", "few_shot[n3-neutral-equal-id]"
  std::string adaptation_label() const;
  // "winobias/zero_shot/none"
  std::string id() const;
};

std::vector<Cell> expand_cells(const ExperimentConfig& config);

struct LoadedCorpus {
  std::string id;
  corpus::OccupationTable table;  // occupations the samples draw from
  std::optional<corpus::CorefSlice> coref;
  std::optional<corpus::QASlice> qa;
};

struct Corpora {
  corpus::OccupationTable table;
  std::map<std::string, LoadedCorpus> by_id;
  const LoadedCorpus& at(const std::string& id) const;
};

Corpora load_corpora(const ExperimentConfig& config);

// A rendered plan for one sample.
struct Job {
  std::size_t cell = 0;
  std::size_t model = 0;
  std::uint64_t seed = 0;
  std::size_t sample = 0;
  prompting::PromptPlan plan;
};

struct JobResult {
  std::vector<std::string> responses;  // one per generation round
  std::optional<std::vector<double>> scores;
  std::string error;                   // backend failure, empty on success
  bool cache_miss = false;
};

struct ExecutionParams {
  double temperature = 0.7;
  int max_tokens = 64;
};

// Runs each job's rounds in order. The parallel version dispatches jobs over
// `concurrency` OpenMP threads and must produce the same results, in the
// same order, as the serial reference.
std::vector<JobResult> execute_serial(const std::vector<Job>& jobs, backend::Backend& backend,
                                      const ExecutionParams& params);
std::vector<JobResult> execute_parallel(const std::vector<Job>& jobs, backend::Backend& backend,
                                        const ExecutionParams& params, std::size_t concurrency);
JobResult execute_job(const Job& job, backend::Backend& backend, const ExecutionParams& params);

struct SeedMetrics {
  std::uint64_t seed = 0;
  std::vector<metrics::Judgment> judgments;
  std::map<std::string, std::vector<metrics::OSBEntry>> osb;  // split: all, type1, type2
  std::map<std::string, double> asb;                         // type1, type2, all, average
  metrics::RPAResult rpa;
  metrics::BBSResult bbs;
  double abstention = 0.0;
  std::map<std::string, std::size_t> status_counts;
};

struct CellResult {
  std::string model;
  Cell cell;
  std::vector<SeedMetrics> seeds;
  std::vector<std::string> warnings;
};

struct TransferRow {
  std::string model;  // "pooled" for the across-model row
  std::string intrinsic_cell;
  std::string adapted_cell;
  std::optional<metrics::TransferStat> stat;  // empty when undefined
  std::string diagnostic;
};

struct ScatterPoint {
  std::string model;
  std::string intrinsic_cell;
  std::string adapted_cell;
  std::string occupation;
  std::uint64_t seed = 0;
  double intrinsic = 0.0;
  double adapted = 0.0;
};

struct QualityScore {
  std::string model;
  std::string cell;
  std::string sample_id;
  std::uint64_t seed = 0;
  std::optional<int> likert;  // empty when the judge gave no usable answer
  std::string judge_backend_id;
};

struct QualitySummary {
  std::string model;
  std::string cell;
  metrics::SeedAggregate likert;  // over scored responses
  std::size_t missing = 0;
};

struct RunLog {
  std::size_t jobs = 0;
  std::size_t backend_errors = 0;
  std::uint64_t cache_hits = 0, cache_misses = 0, cache_writes = 0;
  std::vector<std::string> missing_cells;  // cache-only runs
  double seconds = 0.0;
  nlohmann::json to_json() const;
};

struct Generation {
  std::string model;
  std::string cell;
  std::uint64_t seed = 0;
  std::string sample_id;
  std::string query;     // first user turn
  std::string response;  // final response
  std::string selected;
  std::string status;
};

struct BiasReport {
  std::string config_hash;
  std::string catalog_hash;
  std::string occupation_table;
  std::vector<std::string> occupation_order;  // table order, for bars
  std::map<std::string, corpus::Gender> stereotypes;
  std::vector<CellResult> cells;
  std::vector<TransferRow> transfer;
  std::vector<ScatterPoint> scatter;
  std::vector<Generation> generations;
  std::vector<QualityScore> quality;
  std::vector<QualitySummary> quality_summary;
  std::vector<std::string> warnings;
  RunLog log;
};

struct RunOptions {
  backend::CacheMode cache_mode = backend::CacheMode::kReadWrite;
  bool parallel = true;
  // Overrides config.models[i].backend construction, keyed by model id.
  std::map<std::string, std::shared_ptr<backend::Backend>> backends;
  std::shared_ptr<backend::Backend> judge_backend;
};

BiasReport run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

// Every plan the run would send, one canonical JSON object per line.
std::vector<std::string> dry_run(const ExperimentConfig& config);

// Intrinsic vector replicated across the adapted cell's seeds.
TransferRow transfer_report(const CellResult& intrinsic, const CellResult& adapted,
                            std::vector<ScatterPoint>* scatter = nullptr);
TransferRow transfer_from_points(const std::string& model, const std::string& intrinsic_cell,
                                 const std::string& adapted_cell, const std::vector<double>& x,
                                 const std::vector<double>& y, const std::string& pairing);

// Parses a judge reply into 1..5; anything but a single such integer is empty.
std::optional<int> parse_likert(std::string_view reply);

std::vector<QualityScore> judge_quality(const std::vector<Generation>& generations, backend::Backend& judge,
                                        const prompting::Catalog& catalog, std::size_t concurrency);
std::vector<QualitySummary> summarize_quality(const std::vector<QualityScore>& scores);

std::vector<Generation> read_generations(const fs::path& path);

enum class Format { kCsv, kJsonl };
Format parse_format(std::string_view s);

// Writes metrics, per-occupation O-SB, bars, transfer, scatter, quality,
// generations and summary files; returns the written paths.
std::vector<fs::path> emit_report(const BiasReport& report, const fs::path& dir, Format format = Format::kCsv);

// Human-readable summary with the Table 1-shaped blocks.
std::string summary_text(const BiasReport& report);

// Per-seed O-SB rows read back from osb_per_occupation.csv.
struct OsbRow {
  std::string model, corpus, adaptation, strategy, split, occupation;
  std::uint64_t seed = 0;
  double value = 0.0;
};
std::vector<OsbRow> read_osb_csv(const fs::path& path);
// "file.csv#model/corpus/adaptation/strategy"; each part may be "*" or empty.
std::vector<OsbRow> select_osb(const std::string& spec);

}  // namespace biasaudit::harness
