// Copyright 2026 The biasaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace biasaudit::corpus {

enum class Gender { kMale, kFemale };
enum class Ambiguity { kType1, kType2 };  // type1 = syntactically ambiguous
enum class Referent { kA, kB, kUnknown };
enum class Orientation { kPro, kAnti, kNotApplicable };

std::string_view to_string(Gender g);
std::string_view to_string(Ambiguity a);
std::string_view to_string(Referent r);
std::string_view to_string(Orientation o);
Gender parse_gender(std::string_view s);
Ambiguity parse_ambiguity(std::string_view s);
Referent parse_referent(std::string_view s);
Gender opposite(Gender g);

// Gender of an English third-person pronoun ("he", "Her", "himself"...).
std::optional<Gender> pronoun_gender(std::string_view word);

struct OccupationRecord {
  std::string name;  // lowercase
  Gender stereotype_gender;

  bool operator==(const OccupationRecord&) const = default;
};

class OccupationTable {
 public:
  OccupationTable() = default;
  // Lowercases names; throws on empty or duplicate names.
  explicit OccupationTable(std::vector<OccupationRecord> records);

  // CSV with header "name,stereotype_gender".
  static OccupationTable from_csv(std::string_view text, std::string_view source = "<csv>");
  static OccupationTable load_csv(const std::filesystem::path& path);

  // The 40 WinoBias occupations with their 2017 BLS majority gender.
  static const OccupationTable& bls2017();
  // Winogender occupations minus WinoBias duplicates and synonyms.
  static const OccupationTable& winogender_ood();

  const std::vector<OccupationRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  const OccupationRecord* find(std::string_view name) const;
  // Throws biasaudit::Error naming the occupation when absent.
  Gender stereotype(std::string_view name) const;
  std::vector<std::string> names_with_gender(Gender g) const;
  std::vector<std::string> names() const;

  // Whole-word, case-insensitive occupation mentions in `text`, in order of
  // appearance. Multi-word names match as exact phrases.
  std::vector<std::string> find_mentions(std::string_view text) const;

  std::string to_csv() const;

 private:
  std::vector<OccupationRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Synonym pairs (winogender_name -> winobias_name) removed from the OOD set.
std::vector<std::pair<std::string, std::string>> winogender_synonyms();

// Drops entries of `candidates` that duplicate `reference` or are listed
// synonyms of a reference occupation.
OccupationTable remove_overlap(const OccupationTable& candidates, const OccupationTable& reference,
                               const std::vector<std::pair<std::string, std::string>>& synonyms);

struct CorefSample {
  std::string id;
  std::string sentence;
  Ambiguity ambiguity = Ambiguity::kType2;
  std::string pronoun;  // surface form as it occurs in the sentence
  Gender pronoun_gender = Gender::kMale;
  std::string occupation_a;
  std::string occupation_b;
  Referent gold = Referent::kUnknown;
  Orientation orientation = Orientation::kNotApplicable;

  const std::string& occupation(Referent r) const { return r == Referent::kA ? occupation_a : occupation_b; }
  bool operator==(const CorefSample&) const = default;
};

// Orientation is fixed by the pronoun gender and the gold referent's
// stereotype; type1 sentences have none.
Orientation derive_orientation(Ambiguity ambiguity, Gender pronoun, std::optional<Gender> gold_stereotype);

// Throws biasaudit::Error describing the first violated invariant.
void validate(const CorefSample& s, const OccupationTable& table);

enum class Polarity { kNegative, kNonNegative };
enum class ContextCondition { kAmbiguous, kUnambiguous };

std::string_view to_string(Polarity p);
std::string_view to_string(ContextCondition c);

inline constexpr std::string_view kUnknownClass = "unknown";

struct QASample {
  std::string id;
  std::string context;
  std::string question;
  std::vector<std::string> options;
  Polarity polarity = Polarity::kNonNegative;
  std::string category;
  std::vector<std::string> option_classes;  // parallel to options
  int gold_option = 0;
  ContextCondition condition = ContextCondition::kUnambiguous;

  bool operator==(const QASample&) const = default;
};

void validate(const QASample& s);

struct Provenance {
  std::string dataset_id;
  std::string format;                    // "jsonl", "winobias-text", "bbq-jsonl", ...
  std::vector<std::string> predicates;   // applied filters, in order
  std::optional<std::uint64_t> seed;

  bool operator==(const Provenance&) const = default;
};

template <class Sample>
struct Slice {
  std::vector<Sample> samples;
  Provenance provenance;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

using CorefSlice = Slice<CorefSample>;
using QASlice = Slice<QASample>;

// counts[ambiguity][pronoun_gender]
struct CorefCounts {
  std::array<std::array<std::size_t, 2>, 2> cells{};
  std::size_t total() const;
  std::size_t of(Ambiguity a, Gender g) const {
    return cells[static_cast<int>(a)][static_cast<int>(g)];
  }
};
CorefCounts count(const CorefSlice& slice);

struct CorefFilter {
  std::optional<Ambiguity> ambiguity;
  std::optional<Orientation> orientation;
  std::optional<Gender> pronoun_gender;

  bool matches(const CorefSample& s) const;
  // "ambiguity=type2" style predicates; empty filter -> no predicates.
  std::vector<std::string> predicates() const;
  static CorefFilter parse(const std::vector<std::string>& predicates);
};

CorefSlice select(const CorefSlice& slice, const CorefFilter& filter);
QASlice select_condition(const QASlice& slice, ContextCondition condition);

// Normalized JSONL or bracket-annotated WinoBias text. For the text format
// the ambiguity type is taken from "type1"/"type2" in the file name.
CorefSlice load_coref_corpus(const std::filesystem::path& path, const OccupationTable& table);
// Loads several files into one slice; ids must stay unique.
CorefSlice load_coref_corpora(const std::vector<std::filesystem::path>& paths, const OccupationTable& table);

CorefSlice parse_coref_jsonl(std::istream& in, const OccupationTable& table, std::string_view source);
CorefSlice parse_winobias_text(std::istream& in, Ambiguity ambiguity, const OccupationTable& table,
                               std::string_view source);
void write_coref_jsonl(std::ostream& out, const CorefSlice& slice);
// One WinoBias-style line for a type1/type2 sample: "N [The nurse] ... [she] ...".
std::string to_winobias_line(const CorefSample& s, std::size_t number);

// BBQ-style JSONL: example_id, context, question, ans0..ansK, label, category,
// context_condition ("ambig"|"disambig"), question_polarity ("neg"|"nonneg"),
// answer_info {"ansK": [surface, class]}.
QASlice load_qa_corpus(const std::filesystem::path& path);
QASlice parse_qa_jsonl(std::istream& in, std::string_view source);
void write_qa_jsonl(std::ostream& out, const QASlice& slice);

// A Winogender sentence: one occupation, one semantically bleached
// participant ("the teenager"), a gendered pronoun.
struct WinogenderSample {
  std::string id;
  std::string sentence;
  std::string occupation;
  std::string participant;
  std::string pronoun;
  bool refers_to_occupation = true;
};

// Winogender all_sentences.tsv ("sentid<TAB>sentence"); sentids look like
// "technician.customer.1.male.txt". Neutral-pronoun rows are skipped.
std::vector<WinogenderSample> parse_winogender_tsv(std::istream& in, std::string_view source);

// Replaces the participant with an occupation of the opposite stereotype
// gender drawn uniformly from `table` under `seed`.
CorefSample reformat_winogender(const WinogenderSample& raw, const OccupationTable& table, std::uint64_t seed);

// WinoBias-shaped synthetic corpus. Every (pair, pronoun gender, type) cell
// gets `per_cell` sentences; type2 sentences alternate the gold referent so
// that pro and anti orientations are balanced.
struct SyntheticCorpusSpec {
  std::vector<std::pair<std::string, std::string>> pairs;  // (occupation_a, occupation_b)
  std::size_t per_cell = 1;
  std::uint64_t seed = 0;
  std::string id_prefix = "syn";
};
CorefSlice generate_coref_corpus(const SyntheticCorpusSpec& spec, const OccupationTable& table);

// `count` distinct (male-stereotyped, female-stereotyped) pairs; 0 means one
// pair per occupation of the larger gender group.
std::vector<std::pair<std::string, std::string>> cross_gender_pairs(const OccupationTable& table,
                                                                    std::size_t count = 0);

}  // namespace biasaudit::corpus
