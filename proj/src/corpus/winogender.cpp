// Copyright 2026 The biasaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include <istream>

#include "biasaudit/corpus.hpp"
#include "biasaudit/util/error.hpp"
#include "biasaudit/util/rng.hpp"
#include "biasaudit/util/text.hpp"

namespace biasaudit::corpus {

std::vector<WinogenderSample> parse_winogender_tsv(std::istream& in, std::string_view source) {
  std::vector<WinogenderSample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(std::string(source), line_no, "expected 'sentid<TAB>sentence'");
    const std::string sentid(text::trim(std::string_view(line).substr(0, tab)));
    if (line_no == 1 && sentid == "sentid") continue;
    const auto parts = text::split(sentid, '.');
    if (parts.size() < 4) throw ParseError(std::string(source), line_no, "malformed sentid '" + sentid + "'");
    if (parts[3] == "neutral") continue;
    WinogenderSample s;
    s.id = sentid;
    s.sentence = std::string(text::trim(std::string_view(line).substr(tab + 1)));
    s.occupation = text::to_lower(parts[0]);
    s.participant = text::to_lower(parts[1]);
    if (parts[2] != "0" && parts[2] != "1")
      throw ParseError(std::string(source), line_no, "answer field must be 0 or 1 in '" + sentid + "'");
    s.refers_to_occupation = parts[2] == "0";
    for (const std::string& word : text::split(s.sentence, ' ')) {
      std::string w;
      for (char c : word)
        if (std::isalpha(static_cast<unsigned char>(c))) w.push_back(c);
      if (pronoun_gender(w)) {
        s.pronoun = w;
        break;
      }
    }
    if (s.pronoun.empty()) throw ParseError(std::string(source), line_no, "no gendered pronoun in sentence");
    out.push_back(std::move(s));
  }
  return out;
}

CorefSample reformat_winogender(const WinogenderSample& raw, const OccupationTable& table, std::uint64_t seed) {
  const Gender occ_gender = table.stereotype(raw.occupation);
  std::vector<std::string> eligible;
  for (const auto& name : table.names_with_gender(opposite(occ_gender)))
    if (name != text::to_lower(raw.occupation)) eligible.push_back(name);
  if (eligible.empty())
    throw Error("no occupation of the opposite stereotype gender available to replace '" + raw.participant + "'");

  Rng rng(mix_seed({fnv1a64(raw.id), seed}));
  const std::string& replacement = eligible[rng.uniform_index(eligible.size())];

  // Swap the participant for the new occupation, keeping or adding an article.
  const auto hits = text::find_whole_word(raw.sentence, raw.participant);
  if (hits.empty()) throw Error("participant '" + raw.participant + "' does not occur in '" + raw.sentence + "'");
  std::string sentence;
  std::size_t cursor = 0;
  for (std::size_t pos : hits) {
    sentence.append(raw.sentence, cursor, pos - cursor);
    const bool has_article = pos >= 4 && text::iequals(std::string_view(raw.sentence).substr(pos - 4, 4), "the ");
    if (!has_article) sentence.append(pos == 0 ? "The " : "the ");
    sentence.append(replacement);
    cursor = pos + raw.participant.size();
  }
  sentence.append(raw.sentence, cursor, std::string::npos);

  CorefSample s;
  s.id = raw.id + "/" + replacement;
  s.sentence = std::move(sentence);
  s.ambiguity = Ambiguity::kType2;
  s.pronoun = raw.pronoun;
  s.pronoun_gender = *pronoun_gender(raw.pronoun);
  const std::string occupation = text::to_lower(raw.occupation);
  const auto occ_pos = text::find_whole_word(s.sentence, occupation);
  const auto rep_pos = text::find_whole_word(s.sentence, replacement);
  if (occ_pos.empty() || rep_pos.empty()) throw Error("reformatted sentence lost an occupation: " + s.sentence);
  const bool occupation_first = occ_pos.front() < rep_pos.front();
  s.occupation_a = occupation_first ? occupation : replacement;
  s.occupation_b = occupation_first ? replacement : occupation;
  const std::string& gold_name = raw.refers_to_occupation ? occupation : replacement;
  s.gold = gold_name == s.occupation_a ? Referent::kA : Referent::kB;
  s.orientation = derive_orientation(s.ambiguity, s.pronoun_gender, table.stereotype(gold_name));
  validate(s, table);
  return s;
}

}  // namespace biasaudit::corpus
