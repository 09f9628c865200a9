// Copyright 2026 The biasaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <set>

#include "biasaudit/harness.hpp"
#include "biasaudit/util/error.hpp"
#include "biasaudit/util/hash.hpp"
#include "biasaudit/util/text.hpp"

namespace biasaudit::harness {

using nlohmann::json;
using prompting::Adaptation;
using prompting::StrategyKind;

namespace {

std::string_view to_string(CorpusKind k) {
  switch (k) {
    case CorpusKind::kCoref: return "coref";
    case CorpusKind::kQA: return "qa";
    case CorpusKind::kWinogender: return "winogender";
  }
  return "coref";
}

CorpusKind parse_kind(const std::string& s) {
  if (s == "coref") return CorpusKind::kCoref;
  if (s == "qa") return CorpusKind::kQA;
  if (s == "winogender") return CorpusKind::kWinogender;
  throw Error("config: unknown corpus kind '" + s + "' (coref, qa, winogender)");
}

ModelConfig model_from(const json& j) { return {j.at("id").get<std::string>(), j.at("backend").get<std::string>()}; }

json fewshot_to(const FewShotConfig& f) {
  json j = {{"n", f.spec.n},
            {"makeup", prompting::to_string(f.spec.makeup)},
            {"representation", prompting::to_string(f.spec.representation)},
            {"occupation_source", prompting::to_string(f.spec.occupation_source)}};
  if (!f.pool.empty()) j["pool"] = f.pool;
  if (!f.weights_from.empty()) j["weights_from"] = f.weights_from;
  if (!f.spec.weight_source.empty() && f.weights_from.empty()) j["weights"] = f.spec.weight_source;
  return j;
}

FewShotConfig fewshot_from(const json& j) {
  FewShotConfig f;
  f.spec.n = j.value("n", 3);
  f.spec.makeup = prompting::parse_makeup(j.value("makeup", std::string("neutral")));
  f.spec.representation = prompting::parse_representation(j.value("representation", std::string("equal")));
  f.spec.occupation_source =
      prompting::parse_occupation_source(j.value("occupation_source", std::string("in_distribution")));
  f.pool = j.value("pool", std::string());
  f.weights_from = j.value("weights_from", std::string());
  if (const auto it = j.find("weights"); it != j.end()) f.spec.weight_source = it->get<std::map<std::string, double>>();
  if (!f.weights_from.empty() && f.weights_from != "intrinsic")
    throw Error("config: few-shot weights_from must be \"intrinsic\", got '" + f.weights_from + "'");
  return f;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j, const fs::path& base_dir) {
  ExperimentConfig c;
  c.base_dir = base_dir;
  try {
    c.name = j.value("name", c.name);
    c.occupation_table = j.value("occupation_table", c.occupation_table);
    c.catalog = j.value("catalog", std::string());
    for (const auto& cj : j.at("corpora")) {
      CorpusConfig cc;
      cc.id = cj.at("id").get<std::string>();
      cc.kind = parse_kind(cj.value("kind", std::string("coref")));
      cc.paths = cj.value("paths", std::vector<std::string>{});
      cc.filter = cj.value("filter", std::vector<std::string>{});
      cc.table = cj.value("table", std::string());
      cc.seed = cj.value("seed", std::uint64_t{0});
      if (const auto it = cj.find("synthetic"); it != cj.end()) {
        SyntheticSource s;
        s.pairs = it->value("pairs", std::size_t{0});
        s.per_cell = it->value("per_cell", std::size_t{1});
        s.seed = it->value("seed", std::uint64_t{0});
        if (const auto p = it->find("explicit_pairs"); p != it->end())
          s.explicit_pairs = p->get<std::vector<std::pair<std::string, std::string>>>();
        cc.synthetic = s;
      }
      c.corpora.push_back(std::move(cc));
    }
    for (const auto& mj : j.at("models")) c.models.push_back(model_from(mj));
    if (const auto it = j.find("judge"); it != j.end() && !it->is_null()) c.judge = model_from(*it);
    for (const auto& cj : j.at("cells")) {
      CellConfig cell;
      cell.corpus = cj.at("corpus").get<std::string>();
      cell.adaptation = prompting::parse_adaptation(cj.at("adaptation").get<std::string>());
      if (const auto it = cj.find("strategies"); it != cj.end()) {
        cell.strategies.clear();
        for (const auto& s : *it) cell.strategies.push_back(prompting::DebiasStrategy::parse(s.get<std::string>()));
      }
      if (const auto it = cj.find("fewshot"); it != cj.end()) cell.fewshot = fewshot_from(*it);
      c.cells.push_back(std::move(cell));
    }
    if (const auto it = j.find("seeds"); it != j.end()) c.seeds = it->get<std::vector<std::uint64_t>>();
    c.temperature = j.value("temperature", c.temperature);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    c.concurrency = j.value("concurrency", c.concurrency);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.cache_dir = j.value("cache_dir", c.cache_dir);
  } catch (const json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("config " + path.string() + ": " + e.what());
  }
  fs::path base = fs::absolute(path).parent_path();
  if (const auto it = j.find("base_dir"); it != j.end()) base = it->get<std::string>();
  return from_json(j, base);
}

json ExperimentConfig::to_json() const {
  json corpora_j = json::array();
  for (const auto& cc : corpora) {
    json cj = {{"id", cc.id}, {"kind", to_string(cc.kind)}};
    if (!cc.paths.empty()) cj["paths"] = cc.paths;
    if (!cc.filter.empty()) cj["filter"] = cc.filter;
    if (!cc.table.empty()) cj["table"] = cc.table;
    if (cc.kind == CorpusKind::kWinogender) cj["seed"] = cc.seed;
    if (cc.synthetic) {
      json s = {{"pairs", cc.synthetic->pairs}, {"per_cell", cc.synthetic->per_cell}, {"seed", cc.synthetic->seed}};
      if (!cc.synthetic->explicit_pairs.empty()) s["explicit_pairs"] = cc.synthetic->explicit_pairs;
      cj["synthetic"] = s;
    }
    corpora_j.push_back(cj);
  }
  json models_j = json::array();
  for (const auto& m : models) models_j.push_back({{"id", m.id}, {"backend", m.backend}});
  json cells_j = json::array();
  for (const auto& cell : cells) {
    json strategies = json::array();
    for (const auto& s : cell.strategies) strategies.push_back(s.id());
    json cj = {{"corpus", cell.corpus}, {"adaptation", prompting::to_string(cell.adaptation)}, {"strategies", strategies}};
    if (cell.fewshot) cj["fewshot"] = fewshot_to(*cell.fewshot);
    cells_j.push_back(cj);
  }
  json j = {{"name", name},
            {"occupation_table", occupation_table},
            {"corpora", corpora_j},
            {"models", models_j},
            {"cells", cells_j},
            {"seeds", seeds},
            {"temperature", temperature},
            {"max_tokens", max_tokens},
            {"concurrency", concurrency},
            {"output_dir", output_dir},
            {"cache_dir", cache_dir}};
  if (!catalog.empty()) j["catalog"] = catalog;
  if (judge) j["judge"] = {{"id", judge->id}, {"backend", judge->backend}};
  return j;
}

std::string ExperimentConfig::hash() const {
  // Where results go and how fast they are produced do not change them.
  json j = to_json();
  for (const char* key : {"output_dir", "cache_dir", "concurrency"}) j.erase(key);
  return sha256_hex(j.dump());
}

fs::path ExperimentConfig::resolve(const std::string& path) const {
  const fs::path p(path);
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

void ExperimentConfig::validate(const prompting::Catalog& catalog) const {
  if (seeds.empty()) throw Error("config: seeds must not be empty");
  if (models.empty()) throw Error("config: no models");
  if (cells.empty()) throw Error("config: no cells");
  if (concurrency == 0) throw Error("config: concurrency must be >= 1");
  if (!(temperature >= 0.0)) throw Error("config: temperature must be nonnegative");
  std::map<std::string, CorpusKind> kinds;
  for (const auto& c : corpora) {
    if (!kinds.emplace(c.id, c.kind).second) throw Error("config: duplicate corpus id '" + c.id + "'");
    if (c.paths.empty() && !c.synthetic) throw Error("config: corpus '" + c.id + "' has no paths");
    if (c.synthetic && c.kind != CorpusKind::kCoref)
      throw Error("config: corpus '" + c.id + "': only coref corpora can be synthetic");
  }
  std::set<std::string> model_ids;
  for (const auto& m : models)
    if (!model_ids.insert(m.id).second) throw Error("config: duplicate model id '" + m.id + "'");
  std::set<std::string> intrinsic_corpora;
  for (const auto& cell : cells)
    if (cell.adaptation == Adaptation::kIntrinsic) intrinsic_corpora.insert(cell.corpus);

  for (const auto& cell : cells) {
    const auto kind = kinds.find(cell.corpus);
    if (kind == kinds.end()) throw Error("config: cell refers to unknown corpus '" + cell.corpus + "'");
    const bool qa = kind->second == CorpusKind::kQA;
    if (cell.strategies.empty()) throw Error("config: cell on '" + cell.corpus + "' lists no strategies");
    for (const auto& s : cell.strategies) {
      catalog.check(s);
      if (cell.adaptation == Adaptation::kIntrinsic && s.kind != StrategyKind::kNone)
        throw Error("config: intrinsic cells take no debiasing strategy (got " + s.id() + ")");
      if (qa && (s.kind == StrategyKind::kAntiStereoAll || s.kind == StrategyKind::kAntiStereoMost))
        throw Error("config: " + s.id() + " needs a coreference corpus");
    }
    if (cell.adaptation == Adaptation::kCot)
      for (const auto& s : cell.strategies)
        if (s.kind != StrategyKind::kNone)
          throw Error("config: cot cells already use two rounds and take no debiasing strategy (got " + s.id() + ")");
    if (qa && (cell.adaptation == Adaptation::kFewShot || cell.adaptation == Adaptation::kCot))
      throw Error("config: " + std::string(prompting::to_string(cell.adaptation)) +
                  " cells need a coreference corpus");
    if (cell.adaptation == Adaptation::kFewShot) {
      if (!cell.fewshot) throw Error("config: few_shot cell on '" + cell.corpus + "' has no fewshot spec");
      const std::string pool = cell.fewshot->pool.empty() ? cell.corpus : cell.fewshot->pool;
      const auto pk = kinds.find(pool);
      if (pk == kinds.end()) throw Error("config: few-shot pool '" + pool + "' is not a configured corpus");
      if (pk->second == CorpusKind::kQA) throw Error("config: few-shot pool '" + pool + "' is not a coreference corpus");
      if (cell.fewshot->weights_from == "intrinsic" && !intrinsic_corpora.count(cell.corpus))
        throw Error("config: few-shot weights_from=intrinsic needs an intrinsic cell on '" + cell.corpus + "'");
      prompting::FewShotSpec probe = cell.fewshot->spec;
      if (probe.representation == prompting::Representation::kOsbWeighted && !cell.fewshot->weights_from.empty())
        probe.weight_source = {{"placeholder", 1.0}};
      probe.validate();
    } else if (cell.fewshot) {
      throw Error("config: fewshot spec given on a " + std::string(prompting::to_string(cell.adaptation)) + " cell");
    }
  }
}

std::string Cell::adaptation_label() const {
  std::string out(prompting::to_string(adaptation));
  if (fewshot) {
    out += "[" + fewshot->spec.id();
    if (!fewshot->pool.empty() && fewshot->pool != corpus) out += "@" + fewshot->pool;
    out += "]";
  }
  return out;
}

std::string Cell::id() const { return corpus + "/" + adaptation_label() + "/" + strategy.id(); }

std::vector<Cell> expand_cells(const ExperimentConfig& config) {
  std::vector<Cell> out;
  std::set<std::string> seen;
  for (const auto& c : config.cells) {
    for (const auto& s : c.strategies) {
      Cell cell{c.corpus, c.adaptation, s, c.fewshot};
      if (!seen.insert(cell.id()).second) throw Error("config: cell " + cell.id() + " listed twice");
      out.push_back(std::move(cell));
    }
  }
  return out;
}

const LoadedCorpus& Corpora::at(const std::string& id) const {
  const auto it = by_id.find(id);
  if (it == by_id.end()) throw Error("unknown corpus '" + id + "'");
  return it->second;
}

namespace {

corpus::OccupationTable table_named(const ExperimentConfig& config, const std::string& name) {
  if (name.empty() || name == "bls2017") return corpus::OccupationTable::bls2017();
  if (name == "winogender_ood") return corpus::OccupationTable::winogender_ood();
  return corpus::OccupationTable::load_csv(config.resolve(name));
}

}  // namespace

Corpora load_corpora(const ExperimentConfig& config) {
  Corpora out;
  out.table = table_named(config, config.occupation_table);
  for (const auto& cc : config.corpora) {
    LoadedCorpus lc;
    lc.id = cc.id;
    lc.table = out.table;
    switch (cc.kind) {
      case CorpusKind::kCoref: {
        corpus::CorefSlice slice;
        if (cc.synthetic) {
          corpus::SyntheticCorpusSpec spec;
          spec.pairs = cc.synthetic->explicit_pairs.empty() ? corpus::cross_gender_pairs(out.table, cc.synthetic->pairs)
                                                            : cc.synthetic->explicit_pairs;
          spec.per_cell = cc.synthetic->per_cell;
          spec.seed = cc.synthetic->seed;
          spec.id_prefix = cc.id;
          slice = corpus::generate_coref_corpus(spec, out.table);
        } else {
          std::vector<fs::path> paths;
          for (const auto& p : cc.paths) paths.push_back(config.resolve(p));
          slice = corpus::load_coref_corpora(paths, out.table);
        }
        if (!cc.filter.empty()) slice = corpus::select(slice, corpus::CorefFilter::parse(cc.filter));
        lc.coref = std::move(slice);
        break;
      }
      case CorpusKind::kWinogender: {
        const corpus::OccupationTable table = table_named(config, cc.table.empty() ? "winogender_ood" : cc.table);
        lc.table = table;
        corpus::CorefSlice slice;
        slice.provenance.dataset_id = cc.id;
        slice.provenance.format = "winogender-tsv";
        slice.provenance.seed = cc.seed;
        for (const auto& p : cc.paths) {
          std::ifstream in(config.resolve(p));
          if (!in) throw Error("cannot open " + config.resolve(p).string());
          for (const auto& raw : corpus::parse_winogender_tsv(in, p))
            slice.samples.push_back(corpus::reformat_winogender(raw, table, cc.seed));
        }
        if (!cc.filter.empty()) slice = corpus::select(slice, corpus::CorefFilter::parse(cc.filter));
        lc.coref = std::move(slice);
        break;
      }
      case CorpusKind::kQA: {
        corpus::QASlice slice;
        for (const auto& p : cc.paths) {
          auto part = corpus::load_qa_corpus(config.resolve(p));
          if (slice.samples.empty()) slice.provenance = part.provenance;
          for (auto& s : part.samples) slice.samples.push_back(std::move(s));
        }
        slice.provenance.dataset_id = cc.id;
        lc.qa = std::move(slice);
        break;
      }
    }
    out.by_id.emplace(cc.id, std::move(lc));
  }
  return out;
}

}  // namespace biasaudit::harness
