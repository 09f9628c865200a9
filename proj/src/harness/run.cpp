// Copyright 2026 The biasaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <chrono>
#include <exception>
#include <fstream>
#include <functional>
#include <set>

#include <fmt/format.h>

#include "biasaudit/harness.hpp"
#include "biasaudit/util/error.hpp"
#include "biasaudit/util/hash.hpp"
#include "biasaudit/util/rng.hpp"

namespace biasaudit::harness {

using backend::Backend;
using nlohmann::json;
using prompting::Adaptation;
using prompting::PlanMode;

// ------------------------------------------------------------------ execute

JobResult execute_job(const Job& job, Backend& backend, const ExecutionParams& params) {
  JobResult r;
  try {
    if (job.plan.mode == PlanMode::kScoreOptions) {
      const auto req = backend::request_for(job.plan, 0, {}, 0.0, params.max_tokens);
      const auto resp = backend.call(req);
      backend::check_response(req, resp);
      r.scores = resp.scores;
    } else {
      const std::size_t rounds = job.plan.generation_turns();
      for (std::size_t round = 0; round < rounds; ++round) {
        const auto req = backend::request_for(job.plan, round, r.responses, params.temperature, params.max_tokens);
        const auto resp = backend.call(req);
        backend::check_response(req, resp);
        r.responses.push_back(*resp.text);
      }
    }
  } catch (const backend::CacheMiss& e) {
    r.cache_miss = true;
    r.error = e.what();
  } catch (const backend::BackendError& e) {
    r.error = e.what();
  }
  return r;
}

std::vector<JobResult> execute_serial(const std::vector<Job>& jobs, Backend& backend, const ExecutionParams& params) {
  std::vector<JobResult> out;
  out.reserve(jobs.size());
  for (const auto& j : jobs) out.push_back(execute_job(j, backend, params));
  return out;
}

std::vector<JobResult> execute_parallel(const std::vector<Job>& jobs, Backend& backend, const ExecutionParams& params,
                                        std::size_t concurrency) {
  if (concurrency <= 1) return execute_serial(jobs, backend, params);
  std::vector<JobResult> out(jobs.size());
  std::exception_ptr failure;
  const auto n = static_cast<std::ptrdiff_t>(jobs.size());
#pragma omp parallel for num_threads(static_cast<int>(concurrency)) schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = execute_job(jobs[i], backend, params);
    } catch (...) {
#pragma omp critical(biasaudit_execute_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

// ------------------------------------------------------------------ metrics

namespace {

using corpus::Ambiguity;

void add_coref_split(SeedMetrics& m, const std::string& name, const std::vector<corpus::CorefSample>& samples,
                     const std::vector<metrics::Judgment>& judgments, std::vector<std::string>& warnings) {
  const auto occupations = metrics::scorable_occupations(samples);
  if (occupations.empty()) {
    warnings.push_back("O-SB split '" + name + "' has no occupation seen with both pronoun genders");
    return;
  }
  m.osb[name] = metrics::osb_table(samples, judgments, occupations);
  m.asb[name] = metrics::compute_asb(m.osb[name]);
}

SeedMetrics coref_seed_metrics(std::uint64_t seed, const std::vector<corpus::CorefSample>& samples,
                               std::vector<metrics::Judgment> judgments, std::vector<std::string>& warnings) {
  SeedMetrics m;
  m.seed = seed;
  add_coref_split(m, "all", samples, judgments, warnings);
  for (const Ambiguity a : {Ambiguity::kType1, Ambiguity::kType2}) {
    std::vector<corpus::CorefSample> s;
    std::vector<metrics::Judgment> j;
    for (std::size_t i = 0; i < samples.size(); ++i)
      if (samples[i].ambiguity == a) {
        s.push_back(samples[i]);
        j.push_back(judgments[i]);
      }
    if (!s.empty()) add_coref_split(m, std::string(corpus::to_string(a)), s, j, warnings);
  }
  if (m.asb.count("type1") && m.asb.count("type2")) m.asb["average"] = (m.asb["type1"] + m.asb["type2"]) / 2.0;
  m.rpa = metrics::compute_rpa(samples, judgments);
  m.abstention = metrics::abstention_rate(judgments);
  for (const auto& j : judgments) ++m.status_counts[std::string(metrics::to_string(j.status))];
  m.judgments = std::move(judgments);
  return m;
}

SeedMetrics qa_seed_metrics(std::uint64_t seed, const std::vector<corpus::QASample>& samples,
                            std::vector<metrics::Judgment> judgments) {
  SeedMetrics m;
  m.seed = seed;
  m.rpa = metrics::compute_rpa(samples, judgments);
  m.bbs = metrics::compute_bbs(samples, judgments);
  m.abstention = metrics::abstention_rate(judgments);
  for (const auto& j : judgments) ++m.status_counts[std::string(metrics::to_string(j.status))];
  m.judgments = std::move(judgments);
  return m;
}

void merge_warnings(std::vector<std::string>& into, const std::vector<std::string>& more) {
  for (const auto& w : more)
    if (std::find(into.begin(), into.end(), w) == into.end()) into.push_back(w);
}

// ---------------------------------------------------------------- rendering

std::vector<std::uint64_t> cell_seeds(const Cell& cell, const ExperimentConfig& config) {
  if (cell.adaptation == Adaptation::kIntrinsic) return {0};
  return config.seeds;
}

struct FewShotContext {
  prompting::FewShotSpec spec;
  const corpus::CorefSlice* pool = nullptr;
  std::uint64_t seed = 0;
  std::vector<prompting::Exemplar> shared;
};

prompting::PromptPlan render_coref(const Cell& cell, const LoadedCorpus& lc, const corpus::CorefSample& s,
                                   std::uint64_t seed, const FewShotContext* fs, const prompting::Catalog& catalog) {
  prompting::PromptPlan plan;
  switch (cell.adaptation) {
    case Adaptation::kIntrinsic: return prompting::render_intrinsic(s, catalog);
    case Adaptation::kZeroShot: plan = prompting::render_mcq(s, seed, catalog); break;
    case Adaptation::kCot: plan = prompting::render_cot(s, seed, catalog); break;
    case Adaptation::kFewShot: {
      const bool leaks = std::any_of(fs->shared.begin(), fs->shared.end(),
                                     [&](const prompting::Exemplar& e) { return e.sample.id == s.id; });
      if (leaks) {
        const auto own = prompting::compose_fewshot(fs->spec, *fs->pool, fs->seed, {s.id});
        plan = prompting::render_fewshot(s, own, seed, catalog);
      } else {
        plan = prompting::render_fewshot(s, fs->shared, seed, catalog);
      }
      break;
    }
  }
  return prompting::apply_strategy(cell.strategy, plan, prompting::subject_of(s), lc.table, catalog);
}

prompting::PromptPlan render_qa(const Cell& cell, const LoadedCorpus& lc, const corpus::QASample& s, std::uint64_t seed,
                                const prompting::Catalog& catalog) {
  if (cell.adaptation == Adaptation::kIntrinsic) return prompting::render_intrinsic_qa(s, catalog);
  if (cell.adaptation != Adaptation::kZeroShot)
    throw Error("cell " + cell.id() + ": QA corpora support intrinsic and zero_shot only");
  return prompting::apply_strategy(cell.strategy, prompting::render_mcq_qa(s, seed, catalog), prompting::subject_of(s),
                                   lc.table, catalog);
}

using WeightLookup = std::function<std::map<std::string, double>(const Cell&)>;

std::vector<Job> render_jobs(const Cell& cell, std::size_t cell_index, std::size_t model_index,
                             const ExperimentConfig& config, const Corpora& corpora, const prompting::Catalog& catalog,
                             const WeightLookup& weights) {
  const LoadedCorpus& lc = corpora.at(cell.corpus);
  std::vector<Job> jobs;
  for (const std::uint64_t seed : cell_seeds(cell, config)) {
    std::optional<FewShotContext> fs;
    if (cell.adaptation == Adaptation::kFewShot) {
      fs.emplace();
      fs->spec = cell.fewshot->spec;
      if (cell.fewshot->weights_from == "intrinsic") fs->spec.weight_source = weights(cell);
      const std::string pool = cell.fewshot->pool.empty() ? cell.corpus : cell.fewshot->pool;
      fs->pool = &*corpora.at(pool).coref;
      fs->seed = mix_seed({seed, fnv1a64(fs->spec.id())});
      fs->shared = prompting::compose_fewshot(fs->spec, *fs->pool, fs->seed);
    }
    if (lc.coref) {
      const auto& samples = lc.coref->samples;
      for (std::size_t i = 0; i < samples.size(); ++i)
        jobs.push_back({cell_index, model_index, seed, i,
                        render_coref(cell, lc, samples[i], seed, fs ? &*fs : nullptr, catalog)});
    } else {
      const auto& samples = lc.qa->samples;
      for (std::size_t i = 0; i < samples.size(); ++i)
        jobs.push_back({cell_index, model_index, seed, i, render_qa(cell, lc, samples[i], seed, catalog)});
    }
  }
  return jobs;
}

prompting::Catalog load_catalog(const ExperimentConfig& config) {
  return config.catalog.empty() ? prompting::Catalog::builtin() : prompting::Catalog::load(config.resolve(config.catalog));
}

std::string resolve_descriptor(const ExperimentConfig& config, const std::string& descriptor) {
  constexpr std::string_view kSynthetic = "synthetic:";
  if (descriptor.rfind(kSynthetic, 0) == 0)
    return std::string(kSynthetic) + config.resolve(descriptor.substr(kSynthetic.size())).string();
  return descriptor;
}

std::string first_user_text(const prompting::PromptPlan& plan) {
  for (const auto& t : plan.turns)
    if (t.role == prompting::Role::kUser) return t.text;
  return {};
}

}  // namespace

// ----------------------------------------------------------------- transfer

TransferRow transfer_from_points(const std::string& model, const std::string& intrinsic_cell,
                                 const std::string& adapted_cell, const std::vector<double>& x,
                                 const std::vector<double>& y, const std::string& pairing) {
  TransferRow row{model, intrinsic_cell, adapted_cell, std::nullopt, {}};
  try {
    row.stat = metrics::pearson(x, y, pairing);
  } catch (const Error& e) {
    row.diagnostic = e.what();
  }
  return row;
}

TransferRow transfer_report(const CellResult& intrinsic, const CellResult& adapted, std::vector<ScatterPoint>* scatter) {
  if (intrinsic.seeds.empty() || !intrinsic.seeds.front().osb.count("all"))
    return {adapted.model, intrinsic.cell.id(), adapted.cell.id(), std::nullopt, "intrinsic cell has no O-SB values"};
  const auto& base = intrinsic.seeds.front().osb.at("all");
  std::vector<double> x, y;
  std::set<std::string> used;
  for (const auto& seed : adapted.seeds) {
    const auto it = seed.osb.find("all");
    if (it == seed.osb.end()) continue;
    std::map<std::string, double> values;
    for (const auto& e : it->second) values[e.occupation] = e.value;
    for (const auto& e : base) {
      const auto v = values.find(e.occupation);
      if (v == values.end()) continue;
      x.push_back(e.value);
      y.push_back(v->second);
      used.insert(e.occupation);
      if (scatter) scatter->push_back({adapted.model, intrinsic.cell.id(), adapted.cell.id(), e.occupation, seed.seed, e.value, v->second});
    }
  }
  const std::string pairing = fmt::format("{} occupations x {} seeds", used.size(), adapted.seeds.size());
  return transfer_from_points(adapted.model, intrinsic.cell.id(), adapted.cell.id(), x, y, pairing);
}

// ---------------------------------------------------------------------- run

json RunLog::to_json() const {
  return {{"jobs", jobs},
          {"backend_errors", backend_errors},
          {"cache", {{"hits", cache_hits}, {"misses", cache_misses}, {"writes", cache_writes}}},
          {"missing_cells", missing_cells},
          {"seconds", seconds}};
}

namespace {

struct BoundModel {
  std::shared_ptr<Backend> backend;
  std::shared_ptr<backend::CachingBackend> cache;
};

BoundModel bind(std::shared_ptr<Backend> inner, const fs::path& cache_dir, backend::CacheMode mode) {
  if (cache_dir.empty()) {
    if (mode == backend::CacheMode::kCacheOnly) throw Error("cache-only run without a cache directory");
    return {std::move(inner), nullptr};
  }
  auto cache = std::make_shared<backend::CachingBackend>(std::move(inner), cache_dir, mode);
  return {cache, cache};
}

void write_experiment_record(const ExperimentConfig& config, const fs::path& dir) {
  fs::create_directories(dir);
  json j = config.to_json();
  j["base_dir"] = fs::absolute(config.base_dir.empty() ? fs::current_path() : config.base_dir).string();
  std::ofstream(dir / "experiment.json") << j.dump(2) << "\n";
}

}  // namespace

BiasReport run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  const prompting::Catalog catalog = load_catalog(config);
  config.validate(catalog);
  const Corpora corpora = load_corpora(config);
  const std::vector<Cell> cells = expand_cells(config);

  BiasReport report;
  report.config_hash = config.hash();
  report.catalog_hash = catalog.hash();
  report.occupation_table = config.occupation_table;
  std::set<std::string> seen_occ;
  auto note_table = [&](const corpus::OccupationTable& t) {
    for (const auto& r : t.records())
      if (seen_occ.insert(r.name).second) {
        report.occupation_order.push_back(r.name);
        report.stereotypes[r.name] = r.stereotype_gender;
      }
  };
  note_table(corpora.table);
  for (const auto& [id, lc] : corpora.by_id) note_table(lc.table);

  const fs::path cache_dir = backend::CachingBackend::directory_from_env(config.cache_dir);
  if (!cache_dir.empty() && options.cache_mode == backend::CacheMode::kReadWrite)
    write_experiment_record(config, cache_dir);

  backend::BackendOptions bopts;
  bopts.catalog = &catalog;
  const ExecutionParams prompted{config.temperature, config.max_tokens};
  std::set<std::string> missing;

  for (std::size_t mi = 0; mi < config.models.size(); ++mi) {
    const auto& model = config.models[mi];
    std::shared_ptr<Backend> inner;
    if (const auto it = options.backends.find(model.id); it != options.backends.end()) {
      inner = it->second;
    } else {
      inner = backend::make_backend(resolve_descriptor(config, model.backend), bopts);
    }
    if (auto* synthetic = dynamic_cast<backend::SyntheticBackend*>(inner.get())) {
      for (const auto& [id, lc] : corpora.by_id) {
        if (lc.coref) synthetic->add_index(*lc.coref);
        if (lc.qa) synthetic->add_index(*lc.qa);
      }
    }
    BoundModel bound = bind(inner, cache_dir, options.cache_mode);

    std::map<std::string, std::map<std::string, double>> intrinsic_osb;  // corpus -> occupation -> O-SB
    const WeightLookup weights = [&](const Cell& cell) {
      const auto it = intrinsic_osb.find(cell.corpus);
      if (it == intrinsic_osb.end())
        throw Error("cell " + cell.id() + ": no intrinsic O-SB on '" + cell.corpus + "' to weight exemplars by");
      return it->second;
    };

    const std::size_t first_result = report.cells.size();
    std::vector<std::size_t> order;
    for (std::size_t ci = 0; ci < cells.size(); ++ci)
      if (cells[ci].adaptation == Adaptation::kIntrinsic) order.push_back(ci);
    for (std::size_t ci = 0; ci < cells.size(); ++ci)
      if (cells[ci].adaptation != Adaptation::kIntrinsic) order.push_back(ci);

    std::map<std::size_t, CellResult> results;
    for (const std::size_t ci : order) {
      const Cell& cell = cells[ci];
      const LoadedCorpus& lc = corpora.at(cell.corpus);
      const auto jobs = render_jobs(cell, ci, mi, config, corpora, catalog, weights);
      const ExecutionParams params =
          cell.adaptation == Adaptation::kIntrinsic ? ExecutionParams{0.0, config.max_tokens} : prompted;
      const auto out = options.parallel ? execute_parallel(jobs, *bound.backend, params, config.concurrency)
                                        : execute_serial(jobs, *bound.backend, params);
      report.log.jobs += jobs.size();

      CellResult cr;
      cr.model = model.id;
      cr.cell = cell;
      const std::size_t n = lc.coref ? lc.coref->size() : lc.qa->size();
      const auto seeds = cell_seeds(cell, config);
      for (std::size_t si = 0; si < seeds.size(); ++si) {
        std::vector<metrics::Judgment> judgments;
        judgments.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
          const Job& job = jobs[si * n + i];
          const JobResult& r = out[si * n + i];
          const std::string sample_id = job.plan.sample_id;
          metrics::Judgment j;
          if (!r.error.empty()) {
            ++report.log.backend_errors;
            if (r.cache_miss) missing.insert(model.id + ":" + cell.id());
            j = metrics::backend_error_judgment(sample_id);
          } else if (lc.coref) {
            const auto& s = lc.coref->samples[i];
            j = r.scores ? metrics::judge_intrinsic(*r.scores, s)
                         : metrics::judge_generation(r.responses.back(), s, job.plan.permutation, catalog);
          } else {
            const auto& s = lc.qa->samples[i];
            j = r.scores ? metrics::judge_intrinsic(*r.scores, s)
                         : metrics::judge_generation(r.responses.back(), s, job.plan.permutation, catalog);
          }
          j.seed = job.seed;
          j.adaptation = cell.adaptation;
          j.strategy = cell.strategy.id();
          if (cell.adaptation != Adaptation::kIntrinsic) {
            Generation g;
            g.model = model.id;
            g.cell = cell.id();
            g.seed = job.seed;
            g.sample_id = sample_id;
            g.query = first_user_text(job.plan);
            g.response = r.responses.empty() ? std::string() : r.responses.back();
            if (lc.qa && j.selected >= 0)
              g.selected = lc.qa->samples[i].options[static_cast<std::size_t>(j.selected)];
            else
              g.selected = metrics::selected_name(j.selected);
            g.status = std::string(metrics::to_string(j.status));
            report.generations.push_back(std::move(g));
          }
          judgments.push_back(std::move(j));
        }
        if (lc.coref) {
          cr.seeds.push_back(coref_seed_metrics(seeds[si], lc.coref->samples, std::move(judgments), cr.warnings));
        } else {
          cr.seeds.push_back(qa_seed_metrics(seeds[si], lc.qa->samples, std::move(judgments)));
          merge_warnings(cr.warnings, cr.seeds.back().bbs.warnings);
        }
        merge_warnings(cr.warnings, cr.seeds.back().rpa.warnings);
      }
      if (cell.adaptation == Adaptation::kIntrinsic && lc.coref && !intrinsic_osb.count(cell.corpus) &&
          cr.seeds.front().osb.count("all")) {
        for (const auto& e : cr.seeds.front().osb.at("all")) intrinsic_osb[cell.corpus][e.occupation] = e.value;
      }
      for (const auto& w : cr.warnings) report.warnings.push_back(model.id + " " + cell.id() + ": " + w);
      results.emplace(ci, std::move(cr));
    }
    for (auto& [ci, cr] : results) report.cells.push_back(std::move(cr));

    // Per-model transfer: every intrinsic cell against every prompted cell on the same corpus.
    for (std::size_t a = first_result; a < report.cells.size(); ++a) {
      const CellResult& intr = report.cells[a];
      if (intr.cell.adaptation != Adaptation::kIntrinsic || !corpora.at(intr.cell.corpus).coref) continue;
      for (std::size_t b = first_result; b < report.cells.size(); ++b) {
        const CellResult& adapted = report.cells[b];
        if (adapted.cell.adaptation == Adaptation::kIntrinsic || adapted.cell.corpus != intr.cell.corpus) continue;
        report.transfer.push_back(transfer_report(intr, adapted, &report.scatter));
      }
    }
    if (bound.cache) {
      const auto st = bound.cache->stats();
      report.log.cache_hits += st.hits;
      report.log.cache_misses += st.misses;
      report.log.cache_writes += st.writes;
    }
  }

  if (config.models.size() > 1) {
    std::map<std::pair<std::string, std::string>, std::pair<std::vector<double>, std::vector<double>>> pooled;
    std::map<std::pair<std::string, std::string>, std::set<std::string>> pooled_models;
    for (const auto& p : report.scatter) {
      auto& xy = pooled[{p.intrinsic_cell, p.adapted_cell}];
      xy.first.push_back(p.intrinsic);
      xy.second.push_back(p.adapted);
      pooled_models[{p.intrinsic_cell, p.adapted_cell}].insert(p.model);
    }
    for (const auto& [key, xy] : pooled) {
      const std::string pairing =
          fmt::format("{} points from {} models", xy.first.size(), pooled_models[key].size());
      report.transfer.push_back(transfer_from_points("pooled", key.first, key.second, xy.first, xy.second, pairing));
    }
  }

  if (!missing.empty()) {
    report.log.missing_cells.assign(missing.begin(), missing.end());
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw Error("cache-only run is missing responses for: " + list);
  }

  std::shared_ptr<Backend> judge = options.judge_backend;
  if (!judge && config.judge) judge = backend::make_backend(resolve_descriptor(config, config.judge->backend), bopts);
  if (judge && !report.generations.empty()) {
    BoundModel bound = bind(judge, cache_dir, options.cache_mode);
    report.quality = judge_quality(report.generations, *bound.backend, catalog, config.concurrency);
    report.quality_summary = summarize_quality(report.quality);
  }

  report.log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::vector<std::string> dry_run(const ExperimentConfig& config) {
  const prompting::Catalog catalog = load_catalog(config);
  config.validate(catalog);
  const Corpora corpora = load_corpora(config);
  const WeightLookup no_weights = [](const Cell& cell) -> std::map<std::string, double> {
    throw Error("dry run cannot render " + cell.id() +
                ": weights_from=intrinsic needs model scores; give explicit weights instead");
  };
  std::vector<std::string> lines;
  const auto cells = expand_cells(config);
  for (std::size_t ci = 0; ci < cells.size(); ++ci)
    for (const auto& job : render_jobs(cells[ci], ci, 0, config, corpora, catalog, no_weights))
      lines.push_back(json{{"cell", cells[ci].id()}, {"seed", job.seed}, {"plan", job.plan.to_json()}}.dump());
  return lines;
}

}  // namespace biasaudit::harness
