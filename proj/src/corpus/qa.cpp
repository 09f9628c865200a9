// Copyright 2026 The biasaudit Authors
// SPDX-License-Identifier: Apache-2.0

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

std::string_view to_string(Polarity p) { return p == Polarity::kNegative ? "neg" : "nonneg"; }

std::string_view to_string(ContextCondition c) {
  return c == ContextCondition::kAmbiguous ? "ambig" : "disambig";
}

void validate(const QASample& s) {
  const auto fail = [&](const std::string& what) { throw Error("sample " + s.id + ": " + what); };
  if (s.id.empty()) fail("empty id");
  if (s.options.size() < 2) fail("needs at least two options");
  if (s.option_classes.size() != s.options.size()) fail("option classes do not match options");
  if (s.gold_option < 0 || static_cast<std::size_t>(s.gold_option) >= s.options.size())
    fail("gold option out of range");
  if (s.category.empty()) fail("missing category");
}

QASlice select_condition(const QASlice& slice, ContextCondition condition) {
  QASlice out;
  out.provenance = slice.provenance;
  out.provenance.predicates.push_back("context_condition=" + std::string(to_string(condition)));
  for (const auto& s : slice.samples)
    if (s.condition == condition) out.samples.push_back(s);
  return out;
}

QASlice parse_qa_jsonl(std::istream& in, std::string_view source) {
  QASlice slice;
  slice.provenance = {std::string(source), "bbq-jsonl", {}, std::nullopt};
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      const json obj = json::parse(line);
      QASample s;
      const json& id = obj.at("example_id");
      s.id = id.is_string() ? id.get<std::string>() : std::to_string(id.get<long long>());
      s.context = obj.at("context").get<std::string>();
      s.question = obj.at("question").get<std::string>();
      s.category = obj.at("category").get<std::string>();
      const std::string polarity = obj.at("question_polarity").get<std::string>();
      if (polarity == "neg") s.polarity = Polarity::kNegative;
      else if (polarity == "nonneg") s.polarity = Polarity::kNonNegative;
      else throw Error("question_polarity must be 'neg' or 'nonneg'");
      const std::string condition = obj.at("context_condition").get<std::string>();
      if (condition == "ambig") s.condition = ContextCondition::kAmbiguous;
      else if (condition == "disambig") s.condition = ContextCondition::kUnambiguous;
      else throw Error("context_condition must be 'ambig' or 'disambig'");
      const json& info = obj.at("answer_info");
      for (int k = 0;; ++k) {
        const std::string key = "ans" + std::to_string(k);
        if (!obj.contains(key)) break;
        s.options.push_back(obj.at(key).get<std::string>());
        const json& entry = info.at(key);
        std::string cls = entry.is_array() && entry.size() >= 2 ? entry[1].get<std::string>() : entry.get<std::string>();
        s.option_classes.push_back(text::to_lower(cls));
      }
      s.gold_option = obj.at("label").get<int>();
      validate(s);
      if (!ids.insert(s.id).second) throw Error("duplicate id '" + s.id + "'");
      slice.samples.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw ParseError(std::string(source), line_no, e.what());
    } catch (const Error& e) {
      throw ParseError(std::string(source), line_no, e.what());
    }
  }
  return slice;
}

QASlice load_qa_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open QA corpus " + path.string());
  return parse_qa_jsonl(in, path.string());
}

void write_qa_jsonl(std::ostream& out, const QASlice& slice) {
  for (const auto& s : slice.samples) {
    json obj = {{"example_id", s.id},
                {"context", s.context},
                {"question", s.question},
                {"category", s.category},
                {"question_polarity", to_string(s.polarity)},
                {"context_condition", to_string(s.condition)},
                {"label", s.gold_option}};
    json info = json::object();
    for (std::size_t k = 0; k < s.options.size(); ++k) {
      const std::string key = "ans" + std::to_string(k);
      obj[key] = s.options[k];
      info[key] = json::array({s.options[k], s.option_classes[k]});
    }
    obj["answer_info"] = std::move(info);
    out << obj.dump() << '\n';
  }
}

}  // namespace biasaudit::corpus
