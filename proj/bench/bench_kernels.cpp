// Copyright 2026 The biasaudit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Serial reference vs OpenMP version of the two parallel kernels: the
// per-occupation O-SB table and job execution against the synthetic model.

#include <benchmark/benchmark.h>

#include "biasaudit/backend.hpp"
#include "biasaudit/harness.hpp"
#include "biasaudit/metrics.hpp"
#include "biasaudit/util/rng.hpp"

namespace ba = biasaudit;

namespace {

ba::corpus::CorefSlice corpus_of(std::size_t per_cell) {
  ba::corpus::SyntheticCorpusSpec spec;
  spec.pairs = ba::corpus::cross_gender_pairs(ba::corpus::OccupationTable::bls2017(), 0);
  spec.per_cell = per_cell;
  return ba::corpus::generate_coref_corpus(spec, ba::corpus::OccupationTable::bls2017());
}

struct OsbInput {
  ba::corpus::CorefSlice slice;
  std::vector<ba::metrics::Judgment> judgments;
  std::vector<std::string> occupations;
};

OsbInput osb_input(std::size_t per_cell) {
  OsbInput in{corpus_of(per_cell), {}, {}};
  ba::Rng rng(1);
  for (const auto& s : in.slice.samples) {
    ba::metrics::Judgment j;
    j.sample_id = s.id;
    j.selected = static_cast<int>(rng.uniform_index(3));
    in.judgments.push_back(j);
  }
  in.occupations = ba::metrics::scorable_occupations(in.slice.samples);
  return in;
}

void BM_OsbSerial(benchmark::State& state) {
  const auto in = osb_input(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(ba::metrics::osb_table_serial(in.slice.samples, in.judgments, in.occupations));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(in.slice.size()));
}

void BM_OsbParallel(benchmark::State& state) {
  const auto in = osb_input(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(ba::metrics::osb_table_parallel(in.slice.samples, in.judgments, in.occupations));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(in.slice.size()));
}

std::vector<ba::harness::Job> jobs_of(const ba::corpus::CorefSlice& slice) {
  std::vector<ba::harness::Job> jobs;
  for (std::size_t i = 0; i < slice.size(); ++i) {
    ba::harness::Job j;
    j.sample = i;
    j.seed = 1;
    j.plan = ba::prompting::render_mcq(slice.samples[i], 1);
    jobs.push_back(std::move(j));
  }
  return jobs;
}

ba::backend::SyntheticBackend& model() {
  static ba::backend::SyntheticBackend m([] {
    ba::backend::SyntheticModelConfig c;
    for (const auto& r : ba::corpus::OccupationTable::bls2017().records())
      c.type1[r.name] = r.stereotype_gender == ba::corpus::Gender::kMale ? ba::backend::OccupationRates{0.6, 0.3}
                                                                  : ba::backend::OccupationRates{0.3, 0.6};
    return c;
  }());
  return m;
}

void BM_ExecuteSerial(benchmark::State& state) {
  const auto jobs = jobs_of(corpus_of(2));
  for (auto _ : state) benchmark::DoNotOptimize(ba::harness::execute_serial(jobs, model(), {}));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(jobs.size()));
}

void BM_ExecuteParallel(benchmark::State& state) {
  const auto jobs = jobs_of(corpus_of(2));
  for (auto _ : state)
    benchmark::DoNotOptimize(
        ba::harness::execute_parallel(jobs, model(), {}, static_cast<std::size_t>(state.range(0))));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(jobs.size()));
}

}  // namespace

BENCHMARK(BM_OsbSerial)->Arg(10)->Arg(100);
BENCHMARK(BM_OsbParallel)->Arg(10)->Arg(100);
BENCHMARK(BM_ExecuteSerial);
BENCHMARK(BM_ExecuteParallel)->Arg(2)->Arg(4)->Arg(8);

BENCHMARK_MAIN();
