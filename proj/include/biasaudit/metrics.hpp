// Copyright 2026 The biasaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "biasaudit/corpus.hpp"
#include "biasaudit/prompting.hpp"

namespace biasaudit::metrics {

enum class ParseStatus { kOk, kAmbiguousMention, kNoMention, kBackendError };
std::string_view to_string(ParseStatus s);
ParseStatus parse_status(std::string_view s);

inline constexpr int kAbstain = -1;

struct Judgment {
  std::string sample_id;
  int selected = kAbstain;  // canonical option id; for coreference 0 = a, 1 = b, 2 = unknown
  ParseStatus status = ParseStatus::kOk;
  std::optional<bool> correct;  // type2 / QA only
  std::uint64_t seed = 0;
  prompting::Adaptation adaptation = prompting::Adaptation::kZeroShot;
  std::string strategy = "none";

  bool abstained() const { return selected == kAbstain; }
  bool operator==(const Judgment&) const = default;
};

// "a", "b", "unknown", "abstain" for coreference ids.
std::string selected_name(int selected);

// Which canonical option `text` names. Option names match whole-word and
// case-insensitively, longest phrase first; a shown letter counts when
// written "(b)" or when it is the whole response. More than one distinct
// option -> ambiguous_mention; none -> no_mention.
struct Mention {
  int selected = kAbstain;
  ParseStatus status = ParseStatus::kNoMention;
};
Mention find_selection(std::string_view text, const std::vector<std::string>& canonical_options,
                       const std::vector<int>& permutation,
                       const prompting::Catalog& catalog = prompting::Catalog::builtin());

Judgment judge_generation(std::string_view text, const corpus::CorefSample& sample, const std::vector<int>& permutation,
                          const prompting::Catalog& catalog = prompting::Catalog::builtin());
Judgment judge_generation(std::string_view text, const corpus::QASample& sample, const std::vector<int>& permutation,
                          const prompting::Catalog& catalog = prompting::Catalog::builtin());

// Argmax over the occupation scores; an exact tie abstains (wrong for
// type2), a non-finite score is a backend error.
Judgment judge_intrinsic(const std::vector<double>& scores, const corpus::CorefSample& sample);
Judgment judge_intrinsic(const std::vector<double>& scores, const corpus::QASample& sample);

Judgment backend_error_judgment(const std::string& sample_id);

struct OSBEntry {
  std::string occupation;
  double value = 0.0;  // percentage points, positive = male-leaning
  std::size_t n_male = 0, n_female = 0;
  std::size_t selected_male = 0, selected_female = 0;
  std::uint64_t seed = 0;
};

// `judgments[i]` belongs to `samples[i]`. Throws when either gender has no
// sentence with the occupation.
OSBEntry compute_osb(const std::vector<corpus::CorefSample>& samples, const std::vector<Judgment>& judgments,
                     const std::string& occupation);

// One entry per occupation, in the order given. Throws naming the first
// occupation with an empty denominator. The parallel version splits the
// samples over OpenMP threads and must agree exactly with the serial one.
std::vector<OSBEntry> osb_table_serial(const std::vector<corpus::CorefSample>& samples,
                                       const std::vector<Judgment>& judgments,
                                       const std::vector<std::string>& occupations);
std::vector<OSBEntry> osb_table_parallel(const std::vector<corpus::CorefSample>& samples,
                                         const std::vector<Judgment>& judgments,
                                         const std::vector<std::string>& occupations);
inline std::vector<OSBEntry> osb_table(const std::vector<corpus::CorefSample>& samples,
                                       const std::vector<Judgment>& judgments,
                                       const std::vector<std::string>& occupations) {
  return osb_table_parallel(samples, judgments, occupations);
}

// Occupations that appear with both pronoun genders in `samples`, sorted.
std::vector<std::string> scorable_occupations(const std::vector<corpus::CorefSample>& samples);

// Mean |O-SB|. Throws on empty input.
double compute_asb(const std::vector<OSBEntry>& entries);
double compute_asb(const std::vector<double>& values);

struct Accuracy {
  std::size_t correct = 0;
  std::size_t total = 0;
  double percent() const { return total ? 100.0 * static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

struct RPAResult {
  // "average" (all type2 samples), "pro", "anti", "male", "female"; empty splits omitted.
  std::map<std::string, Accuracy> splits;
  std::vector<std::string> warnings;
};

// Type2 samples only; abstentions are incorrect. Other samples are ignored.
RPAResult compute_rpa(const std::vector<corpus::CorefSample>& samples, const std::vector<Judgment>& judgments);
// Gold-labelled QA accuracy under the "average" split.
RPAResult compute_rpa(const std::vector<corpus::QASample>& samples, const std::vector<Judgment>& judgments);

// Share of abstaining judgments, in percent.
double abstention_rate(const std::vector<Judgment>& judgments);

struct BBSEntry {
  std::string label_class;
  double score = 0.0;
  std::size_t negative_selections = 0;
  std::size_t total_selections = 0;
};

struct BBSResult {
  std::vector<BBSEntry> entries;  // sorted by class; unknown class excluded
  std::vector<std::string> warnings;
};

BBSResult compute_bbs(const std::vector<corpus::QASample>& samples, const std::vector<Judgment>& judgments,
                      const std::vector<std::string>& classes = {});

struct TransferStat {
  double rho = 0.0;
  double p_value = 1.0;
  std::size_t n_points = 0;
  std::string pairing;
  std::string classification;  // strong, moderate, weak, moderate_negative, strong_negative
  bool significant = false;    // p < 0.05
};

// "strong" when rho >= 0.7, "moderate" when 0.4 <= rho < 0.7, "weak"
// otherwise; negative correlations get the mirrored *_negative labels.
std::string classify(double rho);

// Two-sided p-value of the sample correlation under t with n - 2 dof.
double pearson_p_value(double rho, std::size_t n);

// Sample Pearson correlation. Throws on length mismatch, n < 3 or a
// zero-variance vector.
TransferStat pearson(const std::vector<double>& x, const std::vector<double>& y, std::string pairing = {});

struct SeedAggregate {
  double mean = 0.0;
  double sd = 0.0;  // population standard deviation
  std::size_t count = 0;
};

SeedAggregate aggregate_seeds(const std::vector<double>& values);

}  // namespace biasaudit::metrics
