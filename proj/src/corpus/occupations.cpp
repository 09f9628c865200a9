// Copyright 2026 The biasaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <sstream>

#include "biasaudit/corpus.hpp"
#include "biasaudit/embedded_data.hpp"
#include "biasaudit/util/error.hpp"
#include "biasaudit/util/text.hpp"

namespace biasaudit::corpus {

std::string_view to_string(Gender g) { return g == Gender::kMale ? "male" : "female"; }

std::string_view to_string(Ambiguity a) { return a == Ambiguity::kType1 ? "type1" : "type2"; }

std::string_view to_string(Referent r) {
  switch (r) {
    case Referent::kA: return "a";
    case Referent::kB: return "b";
    case Referent::kUnknown: return "unknown";
  }
  return "unknown";
}

std::string_view to_string(Orientation o) {
  switch (o) {
    case Orientation::kPro: return "pro";
    case Orientation::kAnti: return "anti";
    case Orientation::kNotApplicable: return "not_applicable";
  }
  return "not_applicable";
}

Gender parse_gender(std::string_view s) {
  const std::string l = text::to_lower(text::trim(s));
  if (l == "male" || l == "m") return Gender::kMale;
  if (l == "female" || l == "f") return Gender::kFemale;
  throw Error("unknown gender '" + std::string(s) + "'");
}

Ambiguity parse_ambiguity(std::string_view s) {
  const std::string l = text::to_lower(text::trim(s));
  if (l == "type1" || l == "1") return Ambiguity::kType1;
  if (l == "type2" || l == "2") return Ambiguity::kType2;
  throw Error("unknown ambiguity '" + std::string(s) + "'");
}

Referent parse_referent(std::string_view s) {
  const std::string l = text::to_lower(text::trim(s));
  if (l == "a") return Referent::kA;
  if (l == "b") return Referent::kB;
  if (l == "unknown") return Referent::kUnknown;
  throw Error("unknown referent '" + std::string(s) + "'");
}

Gender opposite(Gender g) { return g == Gender::kMale ? Gender::kFemale : Gender::kMale; }

std::optional<Gender> pronoun_gender(std::string_view word) {
  const std::string l = text::to_lower(text::trim(word));
  if (l == "he" || l == "him" || l == "his" || l == "himself") return Gender::kMale;
  if (l == "she" || l == "her" || l == "hers" || l == "herself") return Gender::kFemale;
  return std::nullopt;
}

OccupationTable::OccupationTable(std::vector<OccupationRecord> records) : records_(std::move(records)) {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    auto& r = records_[i];
    r.name = text::to_lower(text::trim(r.name));
    if (r.name.empty()) throw Error("occupation table: empty occupation name");
    if (!index_.emplace(r.name, i).second) throw Error("occupation table: duplicate occupation '" + r.name + "'");
  }
}

OccupationTable OccupationTable::from_csv(std::string_view csv, std::string_view source) {
  std::vector<OccupationRecord> records;
  std::size_t line_no = 0;
  for (const std::string& raw : text::split(csv, '\n')) {
    ++line_no;
    const std::string_view line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = text::split(line, ',');
    if (fields.size() != 2) throw ParseError(std::string(source), line_no, "expected 'name,stereotype_gender'");
    if (line_no == 1 && text::iequals(text::trim(fields[0]), "name")) continue;
    try {
      records.push_back({std::string(text::trim(fields[0])), parse_gender(fields[1])});
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(std::string(source), line_no, e.what());
    }
  }
  return OccupationTable(std::move(records));
}

OccupationTable OccupationTable::load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open occupation table " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_csv(ss.str(), path.string());
}

const OccupationTable& OccupationTable::bls2017() {
  static const OccupationTable table =
      from_csv(*embedded::file("bls2017_occupations.csv"), "bls2017_occupations.csv");
  return table;
}

const OccupationTable& OccupationTable::winogender_ood() {
  static const OccupationTable table =
      from_csv(*embedded::file("winogender_ood_occupations.csv"), "winogender_ood_occupations.csv");
  return table;
}

const OccupationRecord* OccupationTable::find(std::string_view name) const {
  const auto it = index_.find(text::to_lower(text::trim(name)));
  return it == index_.end() ? nullptr : &records_[it->second];
}

Gender OccupationTable::stereotype(std::string_view name) const {
  const OccupationRecord* r = find(name);
  if (!r) throw Error("occupation '" + std::string(name) + "' is not in the occupation table");
  return r->stereotype_gender;
}

std::vector<std::string> OccupationTable::names_with_gender(Gender g) const {
  std::vector<std::string> out;
  for (const auto& r : records_)
    if (r.stereotype_gender == g) out.push_back(r.name);
  return out;
}

std::vector<std::string> OccupationTable::names() const {
  std::vector<std::string> out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.push_back(r.name);
  return out;
}

std::vector<std::string> OccupationTable::find_mentions(std::string_view text) const {
  std::vector<std::string> out;
  const std::vector<std::string> all = names();
  for (const auto& m : text::find_phrases(text, all)) out.push_back(all[m.candidate]);
  return out;
}

std::string OccupationTable::to_csv() const {
  std::string out = "name,stereotype_gender\n";
  for (const auto& r : records_) {
    out += r.name;
    out += ',';
    out += to_string(r.stereotype_gender);
    out += '\n';
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> winogender_synonyms() {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t line_no = 0;
  for (const std::string& raw : text::split(*embedded::file("winogender_synonyms.csv"), '\n')) {
    ++line_no;
    const std::string_view line = text::trim(raw);
    if (line.empty() || line_no == 1) continue;
    const auto f = text::split(line, ',');
    if (f.size() != 2) throw ParseError("winogender_synonyms.csv", line_no, "expected two fields");
    out.emplace_back(text::to_lower(text::trim(f[0])), text::to_lower(text::trim(f[1])));
  }
  return out;
}

OccupationTable remove_overlap(const OccupationTable& candidates, const OccupationTable& reference,
                               const std::vector<std::pair<std::string, std::string>>& synonyms) {
  std::vector<OccupationRecord> kept;
  for (const auto& r : candidates.records()) {
    if (reference.find(r.name)) continue;
    bool synonym = false;
    for (const auto& [alias, target] : synonyms)
      if (alias == r.name && reference.find(target)) synonym = true;
    if (!synonym) kept.push_back(r);
  }
  return OccupationTable(std::move(kept));
}

}  // namespace biasaudit::corpus
