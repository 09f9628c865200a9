// Copyright 2026 The biasaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>

#include "biasaudit/corpus.hpp"
#include "biasaudit/util/error.hpp"
#include "biasaudit/util/text.hpp"

namespace biasaudit::corpus {

using nlohmann::json;

Orientation derive_orientation(Ambiguity ambiguity, Gender pronoun, std::optional<Gender> gold_stereotype) {
  if (ambiguity == Ambiguity::kType1 || !gold_stereotype) return Orientation::kNotApplicable;
  return pronoun == *gold_stereotype ? Orientation::kPro : Orientation::kAnti;
}

void validate(const CorefSample& s, const OccupationTable& table) {
  const auto fail = [&](const std::string& what) { throw Error("sample " + s.id + ": " + what); };
  if (s.id.empty()) fail("empty id");
  if (s.occupation_a.empty() || s.occupation_b.empty()) fail("missing occupation");
  if (text::iequals(s.occupation_a, s.occupation_b)) fail("occupation_a equals occupation_b");
  for (const auto* occ : {&s.occupation_a, &s.occupation_b})
    if (!table.find(*occ)) fail("occupation '" + *occ + "' is not in the occupation table");
  if (!text::contains_whole_word(s.sentence, s.pronoun)) fail("pronoun '" + s.pronoun + "' does not occur in sentence");
  if (const auto g = pronoun_gender(s.pronoun); g && *g != s.pronoun_gender)
    fail("pronoun_gender disagrees with pronoun '" + s.pronoun + "'");
  const bool resolved = s.gold != Referent::kUnknown;
  if ((s.ambiguity == Ambiguity::kType2) != resolved)
    fail("type2 sentences need a gold occupation and type1 sentences need gold=unknown");
  const std::optional<Gender> gold_stereo =
      resolved ? std::optional<Gender>(table.stereotype(s.occupation(s.gold))) : std::nullopt;
  if (s.orientation != derive_orientation(s.ambiguity, s.pronoun_gender, gold_stereo))
    fail("orientation does not match the occupation table");
}

std::size_t CorefCounts::total() const {
  return cells[0][0] + cells[0][1] + cells[1][0] + cells[1][1];
}

CorefCounts count(const CorefSlice& slice) {
  CorefCounts c;
  for (const auto& s : slice.samples) ++c.cells[static_cast<int>(s.ambiguity)][static_cast<int>(s.pronoun_gender)];
  return c;
}

bool CorefFilter::matches(const CorefSample& s) const {
  return (!ambiguity || s.ambiguity == *ambiguity) && (!orientation || s.orientation == *orientation) &&
         (!pronoun_gender || s.pronoun_gender == *pronoun_gender);
}

std::vector<std::string> CorefFilter::predicates() const {
  std::vector<std::string> out;
  if (ambiguity) out.push_back("ambiguity=" + std::string(to_string(*ambiguity)));
  if (orientation) out.push_back("orientation=" + std::string(to_string(*orientation)));
  if (pronoun_gender) out.push_back("pronoun_gender=" + std::string(to_string(*pronoun_gender)));
  return out;
}

CorefFilter CorefFilter::parse(const std::vector<std::string>& predicates) {
  CorefFilter f;
  for (const auto& p : predicates) {
    const auto eq = p.find('=');
    if (eq == std::string::npos) throw Error("bad filter predicate '" + p + "'");
    const std::string key = p.substr(0, eq), value = p.substr(eq + 1);
    if (key == "ambiguity") {
      f.ambiguity = parse_ambiguity(value);
    } else if (key == "orientation") {
      if (value == "pro") f.orientation = Orientation::kPro;
      else if (value == "anti") f.orientation = Orientation::kAnti;
      else if (value == "not_applicable") f.orientation = Orientation::kNotApplicable;
      else throw Error("bad orientation '" + value + "'");
    } else if (key == "pronoun_gender") {
      f.pronoun_gender = parse_gender(value);
    } else {
      throw Error("unknown filter key '" + key + "'");
    }
  }
  return f;
}

CorefSlice select(const CorefSlice& slice, const CorefFilter& filter) {
  CorefSlice out;
  out.provenance = slice.provenance;
  for (auto& p : filter.predicates()) out.provenance.predicates.push_back(std::move(p));
  for (const auto& s : slice.samples)
    if (filter.matches(s)) out.samples.push_back(s);
  return out;
}

namespace {

CorefSample finish(CorefSample s, const OccupationTable& table) {
  // Canonical lowercase names so lookups and reports agree.
  s.occupation_a = text::to_lower(s.occupation_a);
  s.occupation_b = text::to_lower(s.occupation_b);
  for (const auto* occ : {&s.occupation_a, &s.occupation_b})
    if (!table.find(*occ)) throw Error("occupation '" + *occ + "' is not in the occupation table");
  const std::optional<Gender> gold_stereo =
      s.gold == Referent::kUnknown ? std::nullopt : std::optional<Gender>(table.stereotype(s.occupation(s.gold)));
  s.orientation = derive_orientation(s.ambiguity, s.pronoun_gender, gold_stereo);
  validate(s, table);
  return s;
}

std::string require_string(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) throw Error(std::string("missing string field '") + key + "'");
  return it->get<std::string>();
}

bool looks_like_jsonl(const std::filesystem::path& path, std::istream& in) {
  if (path.extension() == ".jsonl" || path.extension() == ".json") return true;
  const auto pos = in.tellg();
  char c = 0;
  while (in.get(c) && std::isspace(static_cast<unsigned char>(c))) {
  }
  in.clear();
  in.seekg(pos);
  return c == '{';
}

}  // namespace

CorefSlice parse_coref_jsonl(std::istream& in, const OccupationTable& table, std::string_view source) {
  CorefSlice slice;
  slice.provenance = {std::string(source), "jsonl", {}, std::nullopt};
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      const json obj = json::parse(line);
      CorefSample s;
      s.id = require_string(obj, "id");
      s.sentence = require_string(obj, "sentence");
      s.ambiguity = parse_ambiguity(require_string(obj, "ambiguity"));
      s.pronoun = require_string(obj, "pronoun");
      s.pronoun_gender = parse_gender(require_string(obj, "pronoun_gender"));
      s.occupation_a = require_string(obj, "occupation_a");
      s.occupation_b = require_string(obj, "occupation_b");
      s.gold = parse_referent(require_string(obj, "gold"));
      if (!ids.insert(s.id).second) throw Error("duplicate id '" + s.id + "'");
      slice.samples.push_back(finish(std::move(s), table));
    } catch (const json::exception& e) {
      throw ParseError(std::string(source), line_no, e.what());
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(std::string(source), line_no, e.what());
    }
  }
  return slice;
}

CorefSlice parse_winobias_text(std::istream& in, Ambiguity ambiguity, const OccupationTable& table,
                               std::string_view source) {
  CorefSlice slice;
  slice.provenance = {std::string(source), "winobias-text", {}, std::nullopt};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view rest = text::trim(line);
    if (rest.empty()) continue;
    try {
      // Leading sentence number.
      std::size_t digits = 0;
      while (digits < rest.size() && std::isdigit(static_cast<unsigned char>(rest[digits]))) ++digits;
      if (digits > 0) rest = text::trim(rest.substr(digits));

      std::string sentence;
      std::vector<std::pair<std::size_t, std::size_t>> groups;  // spans in `sentence`
      for (std::size_t i = 0; i < rest.size(); ++i) {
        if (rest[i] == '[') {
          const std::size_t close = rest.find(']', i);
          if (close == std::string_view::npos) throw Error("unbalanced '['");
          const std::size_t begin = sentence.size();
          sentence.append(rest.substr(i + 1, close - i - 1));
          groups.emplace_back(begin, sentence.size());
          i = close;
        } else if (rest[i] == ']') {
          throw Error("unbalanced ']'");
        } else {
          sentence.push_back(rest[i]);
        }
      }
      if (groups.size() != 2) throw Error("expected two bracketed spans (referent and pronoun)");

      std::optional<std::size_t> pronoun_group;
      for (std::size_t g = 0; g < 2; ++g)
        if (pronoun_gender(sentence.substr(groups[g].first, groups[g].second - groups[g].first)))
          pronoun_group = g;
      if (!pronoun_group) throw Error("no bracketed pronoun");
      const auto [pb, pe] = groups[*pronoun_group];
      const auto [rb, re] = groups[1 - *pronoun_group];

      CorefSample s;
      s.id = std::string(source) + ":" + std::to_string(line_no);
      s.sentence = sentence;
      s.ambiguity = ambiguity;
      s.pronoun = sentence.substr(pb, pe - pb);
      s.pronoun_gender = *pronoun_gender(s.pronoun);

      const std::string referent_text = sentence.substr(rb, re - rb);
      const auto referent = table.find_mentions(referent_text);
      if (referent.size() != 1)
        throw Error("occupation '" + std::string(text::trim(referent_text)) + "' is not in the occupation table");

      const auto mentions = table.find_mentions(sentence);
      std::vector<std::string> distinct;
      for (const auto& m : mentions)
        if (std::find(distinct.begin(), distinct.end(), m) == distinct.end()) distinct.push_back(m);
      if (distinct.size() != 2)
        throw Error("expected two known occupations, found " + std::to_string(distinct.size()) + " in '" +
                    sentence + "'");
      s.occupation_a = distinct[0];
      s.occupation_b = distinct[1];
      if (ambiguity == Ambiguity::kType2) {
        s.gold = referent[0] == s.occupation_a ? Referent::kA : Referent::kB;
      } else {
        s.gold = Referent::kUnknown;
      }
      slice.samples.push_back(finish(std::move(s), table));
    } catch (const Error& e) {
      throw ParseError(std::string(source), line_no, e.what());
    }
  }
  return slice;
}

CorefSlice load_coref_corpus(const std::filesystem::path& path, const OccupationTable& table) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus " + path.string());
  if (looks_like_jsonl(path, in)) return parse_coref_jsonl(in, table, path.string());
  const std::string name = path.filename().string();
  Ambiguity ambiguity;
  if (name.find("type1") != std::string::npos) ambiguity = Ambiguity::kType1;
  else if (name.find("type2") != std::string::npos) ambiguity = Ambiguity::kType2;
  else throw Error("cannot infer ambiguity type from WinoBias file name " + name);
  return parse_winobias_text(in, ambiguity, table, path.string());
}

CorefSlice load_coref_corpora(const std::vector<std::filesystem::path>& paths, const OccupationTable& table) {
  CorefSlice out;
  std::set<std::string> ids;
  std::vector<std::string> sources, formats;
  for (const auto& p : paths) {
    CorefSlice part = load_coref_corpus(p, table);
    sources.push_back(part.provenance.dataset_id);
    if (std::find(formats.begin(), formats.end(), part.provenance.format) == formats.end())
      formats.push_back(part.provenance.format);
    for (auto& s : part.samples) {
      if (!ids.insert(s.id).second) throw Error("duplicate sample id '" + s.id + "' across corpus files");
      out.samples.push_back(std::move(s));
    }
  }
  out.provenance.dataset_id = text::join(sources, "+");
  out.provenance.format = text::join(formats, "+");
  return out;
}

void write_coref_jsonl(std::ostream& out, const CorefSlice& slice) {
  for (const auto& s : slice.samples) {
    json obj = {{"id", s.id},
                {"sentence", s.sentence},
                {"ambiguity", to_string(s.ambiguity)},
                {"pronoun", s.pronoun},
                {"pronoun_gender", to_string(s.pronoun_gender)},
                {"occupation_a", s.occupation_a},
                {"occupation_b", s.occupation_b},
                {"gold", to_string(s.gold)}};
    out << obj.dump() << '\n';
  }
}

std::string to_winobias_line(const CorefSample& s, std::size_t number) {
  // Bracket the referent occupation (first mention for type1) and the pronoun.
  const std::string& referent = s.gold == Referent::kB ? s.occupation_b : s.occupation_a;
  std::string out = s.sentence;
  const auto occ_hits = text::find_whole_word(out, referent);
  const auto pro_hits = text::find_whole_word(out, s.pronoun);
  if (occ_hits.empty() || pro_hits.empty()) throw Error("sample " + s.id + " cannot be bracketed");
  std::size_t occ_begin = occ_hits.front();
  // Include a preceding article in the bracket, as the original files do.
  for (std::string_view article : {"the ", "The "}) {
    if (occ_begin >= article.size() && out.compare(occ_begin - article.size(), article.size(), article) == 0) {
      occ_begin -= article.size();
      break;
    }
  }
  const std::size_t occ_end = occ_hits.front() + referent.size();
  const std::size_t pro_begin = pro_hits.front(), pro_end = pro_begin + s.pronoun.size();
  if (pro_begin < occ_end && occ_begin < pro_end) throw Error("sample " + s.id + ": overlapping spans");
  if (pro_begin > occ_begin) {
    out.insert(pro_end, "]");
    out.insert(pro_begin, "[");
    out.insert(occ_end, "]");
    out.insert(occ_begin, "[");
  } else {
    out.insert(occ_end, "]");
    out.insert(occ_begin, "[");
    out.insert(pro_end, "]");
    out.insert(pro_begin, "[");
  }
  return std::to_string(number) + " " + out;
}

}  // namespace biasaudit::corpus
