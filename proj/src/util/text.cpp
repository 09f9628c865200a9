// Copyright 2026 The biasaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include "biasaudit/util/text.hpp"

#include <algorithm>
#include <cctype>

#include "biasaudit/util/error.hpp"

namespace biasaudit::text {
namespace {

unsigned char lower(char c) { return static_cast<unsigned char>(std::tolower(static_cast<unsigned char>(c))); }

bool is_word_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) || u >= 0x80;
}

}  // namespace

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(lower(c));
  return out;
}

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      return out;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) { return lower(x) == lower(y); });
}

std::vector<std::size_t> find_whole_word(std::string_view haystack, std::string_view phrase) {
  std::vector<std::size_t> out;
  if (phrase.empty() || phrase.size() > haystack.size()) return out;
  for (std::size_t i = 0; i + phrase.size() <= haystack.size(); ++i) {
    if (i > 0 && is_word_char(haystack[i - 1]) && is_word_char(phrase.front())) continue;
    if (!iequals(haystack.substr(i, phrase.size()), phrase)) continue;
    const std::size_t end = i + phrase.size();
    if (end < haystack.size() && is_word_char(haystack[end]) && is_word_char(phrase.back())) continue;
    out.push_back(i);
  }
  return out;
}

bool contains_whole_word(std::string_view haystack, std::string_view phrase) {
  return !find_whole_word(haystack, phrase).empty();
}

std::vector<Match> find_phrases(std::string_view haystack, const std::vector<std::string>& candidates) {
  std::vector<Match> all;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    for (std::size_t pos : find_whole_word(haystack, candidates[c])) {
      all.push_back({c, pos, pos + candidates[c].size()});
    }
  }
  // Longest first, then leftmost; claim spans greedily.
  std::sort(all.begin(), all.end(), [](const Match& a, const Match& b) {
    const std::size_t la = a.end - a.begin, lb = b.end - b.begin;
    if (la != lb) return la > lb;
    if (a.begin != b.begin) return a.begin < b.begin;
    return a.candidate < b.candidate;
  });
  std::vector<Match> kept;
  for (const Match& m : all) {
    const bool overlaps = std::any_of(kept.begin(), kept.end(), [&](const Match& k) {
      return m.begin < k.end && k.begin < m.end;
    });
    if (!overlaps) kept.push_back(m);
  }
  std::sort(kept.begin(), kept.end(), [](const Match& a, const Match& b) { return a.begin < b.begin; });
  return kept;
}

std::string replace_whole_word(std::string_view haystack, std::string_view phrase,
                               std::string_view replacement) {
  const auto hits = find_whole_word(haystack, phrase);
  std::string out;
  std::size_t cursor = 0;
  for (std::size_t pos : hits) {
    if (pos < cursor) continue;
    out.append(haystack.substr(cursor, pos - cursor));
    out.append(replacement);
    cursor = pos + phrase.size();
  }
  out.append(haystack.substr(cursor));
  return out;
}

std::string render(std::string_view tmpl, const std::vector<std::pair<std::string, std::string>>& vars) {
  std::string out;
  out.reserve(tmpl.size() + 64);
  std::size_t i = 0;
  while (i < tmpl.size()) {
    const char c = tmpl[i];
    if (c != '{') {
      out.push_back(c);
      ++i;
      continue;
    }
    const std::size_t close = tmpl.find('}', i);
    if (close == std::string_view::npos) throw Error("unterminated placeholder in template: " + std::string(tmpl));
    const std::string_view name = tmpl.substr(i + 1, close - i - 1);
    const auto it = std::find_if(vars.begin(), vars.end(), [&](const auto& kv) { return kv.first == name; });
    if (it == vars.end()) throw Error("unbound placeholder {" + std::string(name) + "} in template");
    out += it->second;
    i = close + 1;
  }
  return out;
}

std::optional<std::vector<std::pair<std::string, std::string>>> match_template(std::string_view tmpl,
                                                                               std::string_view text) {
  // Split into literal, {name}, literal, {name}, ..., literal.
  std::vector<std::string> literals{""};
  std::vector<std::string> names;
  for (std::size_t i = 0; i < tmpl.size();) {
    if (tmpl[i] == '{') {
      const std::size_t close = tmpl.find('}', i);
      if (close == std::string_view::npos) throw Error("unterminated placeholder in template: " + std::string(tmpl));
      names.emplace_back(tmpl.substr(i + 1, close - i - 1));
      literals.emplace_back();
      i = close + 1;
    } else {
      literals.back().push_back(tmpl[i++]);
    }
  }
  if (names.empty()) {
    if (text != tmpl) return std::nullopt;
    return std::vector<std::pair<std::string, std::string>>{};
  }
  if (text.substr(0, literals[0].size()) != literals[0]) return std::nullopt;
  std::size_t pos = literals[0].size();
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t k = 0; k < names.size(); ++k) {
    const std::string& lit = literals[k + 1];
    const bool last = k + 1 == names.size();
    std::size_t hit;
    if (last) {
      if (text.size() < lit.size() || text.size() - lit.size() < pos) return std::nullopt;
      hit = text.size() - lit.size();
      if (text.substr(hit) != lit) return std::nullopt;
    } else {
      hit = lit.empty() ? pos : text.find(lit, pos);
      if (hit == std::string_view::npos) return std::nullopt;
    }
    out.emplace_back(names[k], std::string(text.substr(pos, hit - pos)));
    pos = hit + lit.size();
  }
  return out;
}

}  // namespace biasaudit::text
