// Copyright 2026 The biasaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "biasaudit/harness.hpp"
#include "biasaudit/util/error.hpp"
#include "biasaudit/util/text.hpp"

namespace biasaudit::harness {

using nlohmann::json;

Format parse_format(std::string_view s) {
  if (s == "csv") return Format::kCsv;
  if (s == "jsonl") return Format::kJsonl;
  throw Error("unknown format '" + std::string(s) + "' (csv, jsonl)");
}

namespace {

struct Value {
  std::string text;
  bool number = false;
};

Value num(double v, int precision = 2) {
  std::string s = fmt::format("{:.{}f}", v, precision);
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);  // no "-0.00"
  return {s, true};
}
Value sig(double v) { return {fmt::format("{:.6g}", v), true}; }
Value integer(std::uint64_t v) { return {std::to_string(v), true}; }
Value str(std::string s) { return {std::move(s), false}; }
Value boolean(bool b) { return {b ? "true" : "false", true}; }

struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<Value>> rows;
};

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

fs::path write_table(const Table& t, const fs::path& dir, Format format, const std::string& provenance) {
  const fs::path path = dir / (t.name + (format == Format::kCsv ? ".csv" : ".jsonl"));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  if (format == Format::kCsv) {
    out << "# " << provenance << "\n";
    for (std::size_t i = 0; i < t.header.size(); ++i) out << (i ? "," : "") << t.header[i];
    out << "\n";
    for (const auto& row : t.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_field(row[i].text);
      out << "\n";
    }
  } else {
    for (const auto& row : t.rows) {
      json j = json::object();
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (!row[i].number || row[i].text.empty())
          j[t.header[i]] = row[i].text;
        else
          j[t.header[i]] = json::parse(row[i].text);
      }
      out << j.dump() << "\n";
    }
  }
  return path;
}

std::string corpus_of(const CellResult& c) { return c.cell.corpus; }

std::vector<std::string> cell_key(const CellResult& c) {
  return {c.model, corpus_of(c), c.cell.adaptation_label(), c.cell.strategy.id()};
}

std::vector<Value> key_values(const CellResult& c) {
  std::vector<Value> v;
  for (auto& s : cell_key(c)) v.push_back(str(s));
  return v;
}

template <class F>
metrics::SeedAggregate over_seeds(const CellResult& c, F&& value_of) {
  std::vector<double> values;
  for (const auto& s : c.seeds)
    if (const std::optional<double> v = value_of(s)) values.push_back(*v);
  return metrics::aggregate_seeds(values);
}

const std::vector<std::string> kAsbSplits{"type1", "type2", "average", "all"};
const std::vector<std::string> kRpaSplits{"pro", "anti", "male", "female", "average"};

std::optional<double> asb_of(const SeedMetrics& s, const std::string& split) {
  const auto it = s.asb.find(split);
  return it == s.asb.end() ? std::nullopt : std::optional<double>(it->second);
}

std::optional<double> rpa_of(const SeedMetrics& s, const std::string& split) {
  const auto it = s.rpa.splits.find(split);
  return it == s.rpa.splits.end() ? std::nullopt : std::optional<double>(it->second.percent());
}

std::optional<double> bbs_of(const SeedMetrics& s, const std::string& cls) {
  for (const auto& e : s.bbs.entries)
    if (e.label_class == cls) return e.score;
  return std::nullopt;
}

Table metrics_table(const BiasReport& r) {
  Table t{"metrics", {"model", "corpus", "adaptation", "strategy", "split", "metric", "value", "sd", "seed_count"}, {}};
  for (const auto& c : r.cells) {
    auto add = [&](const std::string& split, const std::string& metric, const metrics::SeedAggregate& a,
                   int precision) {
      if (a.count == 0) return;
      auto row = key_values(c);
      row.push_back(str(split));
      row.push_back(str(metric));
      row.push_back(num(a.mean, precision));
      row.push_back(num(a.sd, precision));
      row.push_back(integer(a.count));
      t.rows.push_back(std::move(row));
    };
    for (const auto& split : kAsbSplits)
      add(split, "asb", over_seeds(c, [&](const SeedMetrics& s) { return asb_of(s, split); }), 2);
    for (const auto& split : kRpaSplits)
      add(split, "rpa", over_seeds(c, [&](const SeedMetrics& s) { return rpa_of(s, split); }), 2);
    std::set<std::string> classes;
    for (const auto& s : c.seeds)
      for (const auto& e : s.bbs.entries) classes.insert(e.label_class);
    for (const auto& cls : classes)
      add(cls, "bbs", over_seeds(c, [&](const SeedMetrics& s) { return bbs_of(s, cls); }), 4);
    add("all", "abstention_rate", over_seeds(c, [](const SeedMetrics& s) { return std::optional(s.abstention); }), 2);
    std::set<std::string> statuses;
    for (const auto& s : c.seeds)
      for (const auto& [k, n] : s.status_counts) statuses.insert(k);
    for (const auto& st : statuses)
      add(st, "status_rate", over_seeds(c, [&](const SeedMetrics& s) -> std::optional<double> {
            const auto it = s.status_counts.find(st);
            const double n = it == s.status_counts.end() ? 0.0 : static_cast<double>(it->second);
            return s.judgments.empty() ? 0.0 : 100.0 * n / static_cast<double>(s.judgments.size());
          }), 2);
  }
  return t;
}

std::string stereotype_of(const BiasReport& r, const std::string& occ) {
  const auto it = r.stereotypes.find(occ);
  return it == r.stereotypes.end() ? std::string() : std::string(corpus::to_string(it->second));
}

Table osb_table(const BiasReport& r) {
  Table t{"osb_per_occupation",
          {"model", "corpus", "adaptation", "strategy", "split", "seed", "occupation", "stereotype_gender", "value",
           "n_male", "n_female", "selected_male", "selected_female"},
          {}};
  for (const auto& c : r.cells)
    for (const auto& s : c.seeds)
      for (const auto& [split, entries] : s.osb)
        for (const auto& e : entries) {
          auto row = key_values(c);
          row.insert(row.end(), {str(split), integer(s.seed), str(e.occupation), str(stereotype_of(r, e.occupation)),
                                 num(e.value), integer(e.n_male), integer(e.n_female), integer(e.selected_male),
                                 integer(e.selected_female)});
          t.rows.push_back(std::move(row));
        }
  return t;
}

Table bars_table(const BiasReport& r) {
  Table t{"osb_bars",
          {"model", "corpus", "adaptation", "strategy", "occupation", "stereotype_gender", "value", "sd", "seed_count"},
          {}};
  std::map<std::string, std::size_t> rank;
  for (std::size_t i = 0; i < r.occupation_order.size(); ++i) rank.emplace(r.occupation_order[i], i);
  for (const auto& c : r.cells) {
    std::map<std::string, std::vector<double>> values;
    for (const auto& s : c.seeds)
      if (const auto it = s.osb.find("all"); it != s.osb.end())
        for (const auto& e : it->second) values[e.occupation].push_back(e.value);
    std::vector<std::string> occs;
    for (const auto& [o, v] : values) occs.push_back(o);
    std::stable_sort(occs.begin(), occs.end(), [&](const std::string& a, const std::string& b) {
      const auto ra = rank.count(a) ? rank[a] : rank.size(), rb = rank.count(b) ? rank[b] : rank.size();
      return ra < rb;
    });
    for (const auto& o : occs) {
      const auto a = metrics::aggregate_seeds(values[o]);
      auto row = key_values(c);
      row.insert(row.end(), {str(o), str(stereotype_of(r, o)), num(a.mean), num(a.sd), integer(a.count)});
      t.rows.push_back(std::move(row));
    }
  }
  return t;
}

Table transfer_table(const BiasReport& r) {
  Table t{"transfer",
          {"model", "intrinsic_cell", "adapted_cell", "rho", "p_value", "n_points", "classification", "significant",
           "pairing", "diagnostic"},
          {}};
  for (const auto& row : r.transfer) {
    std::vector<Value> v{str(row.model), str(row.intrinsic_cell), str(row.adapted_cell)};
    if (row.stat) {
      v.insert(v.end(), {num(row.stat->rho, 6), sig(row.stat->p_value), integer(row.stat->n_points),
                         str(row.stat->classification), boolean(row.stat->significant), str(row.stat->pairing)});
    } else {
      v.insert(v.end(), {Value{"", true}, Value{"", true}, Value{"", true}, str(""), Value{"", true}, str("")});
    }
    v.push_back(str(row.diagnostic));
    t.rows.push_back(std::move(v));
  }
  return t;
}

Table scatter_table(const BiasReport& r) {
  Table t{"scatter", {"model", "intrinsic_cell", "adapted_cell", "occupation", "seed", "intrinsic_osb", "adapted_osb"}, {}};
  for (const auto& p : r.scatter)
    t.rows.push_back({str(p.model), str(p.intrinsic_cell), str(p.adapted_cell), str(p.occupation), integer(p.seed),
                      num(p.intrinsic), num(p.adapted)});
  return t;
}

Table quality_table(const BiasReport& r) {
  Table t{"quality", {"model", "cell", "likert_mean", "likert_sd", "scored", "missing"}, {}};
  for (const auto& q : r.quality_summary)
    t.rows.push_back({str(q.model), str(q.cell), num(q.likert.mean, 3), num(q.likert.sd, 3), integer(q.likert.count),
                      integer(q.missing)});
  return t;
}

Table quality_scores_table(const BiasReport& r) {
  Table t{"quality_scores", {"model", "cell", "seed", "sample_id", "likert", "judge"}, {}};
  for (const auto& q : r.quality)
    t.rows.push_back({str(q.model), str(q.cell), integer(q.seed), str(q.sample_id),
                      q.likert ? integer(static_cast<std::uint64_t>(*q.likert)) : Value{"", true},
                      str(q.judge_backend_id)});
  return t;
}

std::string cell_text(const metrics::SeedAggregate& a, int precision = 2) {
  if (a.count == 0) return "-";
  if (a.count == 1) return num(a.mean, precision).text;
  return num(a.mean, precision).text + " ± " + num(a.sd, precision).text;
}

// Pads by code points so "±" does not skew the columns.
std::string pad(const std::string& s, std::size_t width) {
  std::size_t cp = 0;
  for (unsigned char c : s) cp += (c & 0xC0) != 0x80;
  return cp >= width ? s : s + std::string(width - cp, ' ');
}

std::string render_grid(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size(); ++i) {
      std::size_t cp = 0;
      for (unsigned char c : r[i]) cp += (c & 0xC0) != 0x80;
      if (width.size() <= i) width.push_back(0);
      width[i] = std::max(width[i], cp);
    }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t i = 0; i < r.size(); ++i) line += pad(r[i], width[i] + 2);
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += "  " + line + "\n";
  }
  return out;
}

}  // namespace

std::string summary_text(const BiasReport& r) {
  std::string out;
  out += "biasaudit report\n";
  out += "config sha256:  " + r.config_hash + "\n";
  out += "catalog sha256: " + r.catalog_hash + "\n";
  out += "occupation table: " + r.occupation_table + "\n";

  std::vector<std::pair<std::string, std::string>> groups;
  for (const auto& c : r.cells) {
    const auto key = std::make_pair(c.model, c.cell.corpus);
    if (std::find(groups.begin(), groups.end(), key) == groups.end()) groups.push_back(key);
  }
  for (const auto& [model, corpus_id] : groups) {
    out += fmt::format("\n[{} on {}]\n", model, corpus_id);
    bool qa = false;
    for (const auto& c : r.cells)
      if (c.model == model && c.cell.corpus == corpus_id && c.seeds.size() && !c.seeds.front().bbs.entries.empty())
        qa = true;
    std::vector<std::vector<std::string>> rows;
    if (!qa) {
      rows.push_back({"adaptation", "strategy", "RPA pro", "RPA anti", "RPA male", "RPA female", "RPA avg", "A-SB t1",
                      "A-SB t2", "A-SB avg", "abstain %"});
    } else {
      rows.push_back({"adaptation", "strategy", "accuracy", "abstain %", "BBS by class"});
    }
    for (const auto& c : r.cells) {
      if (c.model != model || c.cell.corpus != corpus_id) continue;
      std::vector<std::string> row{c.cell.adaptation_label(), c.cell.strategy.id()};
      if (!qa) {
        for (const auto& split : kRpaSplits)
          row.push_back(cell_text(over_seeds(c, [&](const SeedMetrics& s) { return rpa_of(s, split); })));
        for (const auto& split : {"type1", "type2", "average"})
          row.push_back(cell_text(over_seeds(c, [&](const SeedMetrics& s) { return asb_of(s, split); })));
      } else {
        row.push_back(cell_text(over_seeds(c, [](const SeedMetrics& s) { return rpa_of(s, "average"); })));
      }
      row.push_back(cell_text(over_seeds(c, [](const SeedMetrics& s) { return std::optional(s.abstention); })));
      if (qa) {
        std::set<std::string> classes;
        for (const auto& s : c.seeds)
          for (const auto& e : s.bbs.entries) classes.insert(e.label_class);
        std::string b;
        for (const auto& cls : classes)
          b += (b.empty() ? "" : ", ") + cls + " " +
               cell_text(over_seeds(c, [&](const SeedMetrics& s) { return bbs_of(s, cls); }), 3);
        row.push_back(b.empty() ? "-" : b);
      }
      rows.push_back(std::move(row));
    }
    out += render_grid(rows);
  }

  if (!r.transfer.empty()) {
    out += "\n[intrinsic-to-extrinsic transfer]\n";
    std::vector<std::vector<std::string>> rows{
        {"model", "intrinsic", "adapted", "rho", "p", "class", "significant", "pairing"}};
    for (const auto& t : r.transfer) {
      if (t.stat)
        rows.push_back({t.model, t.intrinsic_cell, t.adapted_cell, num(t.stat->rho, 3).text,
                        fmt::format("{:.3g}", t.stat->p_value), t.stat->classification,
                        t.stat->significant ? "yes" : "no", t.stat->pairing});
      else
        rows.push_back({t.model, t.intrinsic_cell, t.adapted_cell, "-", "-", "undefined", "-", t.diagnostic});
    }
    out += render_grid(rows);
  }

  if (!r.quality_summary.empty()) {
    out += "\n[response quality, Likert 1-5]\n";
    std::vector<std::vector<std::string>> rows{{"model", "cell", "mean", "scored", "missing"}};
    for (const auto& q : r.quality_summary)
      rows.push_back({q.model, q.cell, cell_text(q.likert, 2), std::to_string(q.likert.count),
                      std::to_string(q.missing)});
    out += render_grid(rows);
  }

  std::size_t max_seeds = 0;
  for (const auto& c : r.cells)
    if (c.cell.adaptation != prompting::Adaptation::kIntrinsic) max_seeds = std::max(max_seeds, c.seeds.size());
  out += "\nnotes\n";
  out += fmt::format("  prompted cells: mean ± population sd over {} seeds; intrinsic cells are one deterministic pass.\n",
                     max_seeds);
  out += "  abstentions (no option, or more than one, named) count as incorrect in RPA and stay in O-SB denominators.\n";
  out += "  A-SB avg = (A-SB type1 + A-SB type2) / 2.\n";
  out += "  rho: Pearson over occupations x seeds, intrinsic values replicated per seed; strong >= 0.7, moderate >= 0.4.\n";
  if (!r.warnings.empty()) {
    out += "\nwarnings\n";
    for (const auto& w : r.warnings) out += "  " + w + "\n";
  }
  return out;
}

std::vector<fs::path> emit_report(const BiasReport& r, const fs::path& dir, Format format) {
  fs::create_directories(dir);
  const std::string provenance = "config_sha256=" + r.config_hash + " catalog_sha256=" + r.catalog_hash;
  std::vector<fs::path> written;
  std::vector<Table> tables{metrics_table(r), osb_table(r), bars_table(r), transfer_table(r), scatter_table(r)};
  if (!r.quality.empty()) {
    tables.push_back(quality_table(r));
    tables.push_back(quality_scores_table(r));
  }
  for (const auto& t : tables) written.push_back(write_table(t, dir, format, provenance));

  {
    const fs::path p = dir / "generations.jsonl";
    std::ofstream out(p, std::ios::binary);
    for (const auto& g : r.generations)
      out << json{{"model", g.model},       {"cell", g.cell},         {"seed", g.seed},
                  {"sample_id", g.sample_id}, {"query", g.query},     {"response", g.response},
                  {"selected", g.selected},   {"status", g.status}}
                 .dump()
          << "\n";
    written.push_back(p);
  }
  {
    const fs::path p = dir / "provenance.json";
    std::ofstream(p) << json{{"config_sha256", r.config_hash},
                             {"catalog_sha256", r.catalog_hash},
                             {"occupation_table", r.occupation_table},
                             {"warnings", r.warnings}}
                            .dump(2)
                     << "\n";
    written.push_back(p);
  }
  {
    const fs::path p = dir / "summary.txt";
    std::ofstream(p, std::ios::binary) << summary_text(r);
    written.push_back(p);
  }
  {
    // Timings and cache counters change between runs, so they live apart from the report.
    const fs::path p = dir / "run_log.json";
    std::ofstream(p) << r.log.to_json().dump(2) << "\n";
    written.push_back(p);
  }
  return written;
}

// ------------------------------------------------------------------ read back

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else if (c != '\r') {
      out.back() += c;
    }
  }
  return out;
}

}  // namespace

std::vector<OsbRow> read_osb_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::vector<std::string> header;
  std::vector<OsbRow> out;
  std::size_t n = 0;
  std::map<std::string, std::size_t> col;
  auto need = [&](const char* name) {
    const auto it = col.find(name);
    if (it == col.end()) throw ParseError(path.string(), n, std::string("missing column '") + name + "'");
    return it->second;
  };
  std::size_t c_model = 0, c_corpus = 0, c_adapt = 0, c_strategy = 0, c_split = 0, c_seed = 0, c_occ = 0, c_value = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_csv_line(line);
    if (header.empty()) {
      header = fields;
      for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
      c_model = need("model");
      c_corpus = need("corpus");
      c_adapt = need("adaptation");
      c_strategy = need("strategy");
      c_split = need("split");
      c_seed = need("seed");
      c_occ = need("occupation");
      c_value = need("value");
      continue;
    }
    if (fields.size() != header.size())
      throw ParseError(path.string(), n, fmt::format("{} fields, header has {}", fields.size(), header.size()));
    OsbRow r;
    r.model = fields[c_model];
    r.corpus = fields[c_corpus];
    r.adaptation = fields[c_adapt];
    r.strategy = fields[c_strategy];
    r.split = fields[c_split];
    r.occupation = fields[c_occ];
    try {
      r.seed = std::stoull(fields[c_seed]);
      r.value = std::stod(fields[c_value]);
    } catch (const std::exception&) {
      throw ParseError(path.string(), n, "bad seed or value");
    }
    out.push_back(std::move(r));
  }
  if (header.empty()) throw ParseError(path.string(), 0, "no header");
  return out;
}

std::vector<OsbRow> select_osb(const std::string& spec) {
  const auto hash = spec.rfind('#');
  const std::string file = hash == std::string::npos ? spec : spec.substr(0, hash);
  std::vector<std::string> parts = hash == std::string::npos ? std::vector<std::string>{} : text::split(spec.substr(hash + 1), '/');
  if (parts.size() > 4) throw Error("selector '" + spec + "': expected model/corpus/adaptation/strategy");
  parts.resize(4);
  auto ok = [](const std::string& want, const std::string& have) { return want.empty() || want == "*" || want == have; };
  std::vector<OsbRow> out;
  for (auto& r : read_osb_csv(file))
    if (r.split == "all" && ok(parts[0], r.model) && ok(parts[1], r.corpus) && ok(parts[2], r.adaptation) &&
        ok(parts[3], r.strategy))
      out.push_back(std::move(r));
  if (out.empty()) throw Error("selector '" + spec + "' matched no O-SB rows");
  return out;
}

}  // namespace biasaudit::harness
