// Copyright 2026 The biasaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace biasaudit::text {

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool iequals(std::string_view a, std::string_view b);

// Byte offsets of case-insensitive occurrences of `phrase` in `haystack`
// bounded by non-alphanumeric characters (or the string ends).
std::vector<std::size_t> find_whole_word(std::string_view haystack, std::string_view phrase);
bool contains_whole_word(std::string_view haystack, std::string_view phrase);

struct Match {
  std::size_t candidate;  // index into the candidate list
  std::size_t begin;
  std::size_t end;
};

// Whole-word matches of every candidate phrase. Where matches overlap the
// longer phrase wins, so "construction worker" shadows "worker". Sorted by
// position.
std::vector<Match> find_phrases(std::string_view haystack, const std::vector<std::string>& candidates);

// Replaces every whole-word occurrence of `phrase`.
std::string replace_whole_word(std::string_view haystack, std::string_view phrase,
                               std::string_view replacement);

// Substitutes {name} placeholders. Throws biasaudit::Error on a placeholder
// with no binding.
std::string render(std::string_view tmpl, const std::vector<std::pair<std::string, std::string>>& vars);

// Inverse of render: placeholder captures when the whole of `text` matches
// `tmpl`. Captures are lazy except the last, which runs to the final literal.
std::optional<std::vector<std::pair<std::string, std::string>>> match_template(std::string_view tmpl,
                                                                               std::string_view text);

}  // namespace biasaudit::text
