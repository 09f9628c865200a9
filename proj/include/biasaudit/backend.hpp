// Copyright 2026 The biasaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "biasaudit/corpus.hpp"
#include "biasaudit/prompting.hpp"
#include "biasaudit/util/error.hpp"

namespace biasaudit::backend {

using prompting::PlanMode;
using prompting::Role;
using prompting::Turn;

// One call on the wire. Assistant turns carry earlier responses.
struct Request {
  PlanMode mode = PlanMode::kGenerate;
  std::vector<Turn> turns;
  std::vector<std::string> options;  // score mode only
  int max_tokens = 64;
  double temperature = 0.0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static Request from_json(const nlohmann::json& j);
  std::string canonical() const;
  bool operator==(const Request&) const = default;
};

struct Response {
  std::optional<std::vector<double>> scores;
  std::optional<std::string> text;
  std::string backend_id;
  std::string raw_ref;  // cache key when served through a cache

  nlohmann::json to_json() const;
  // Throws ProtocolError unless exactly one of scores/text is present.
  static Response from_json(const nlohmann::json& j);
  bool operator==(const Response&) const = default;
};

// Scores must match the request's options; text must be present in generate mode.
void check_response(const Request& req, const Response& resp);

class BackendError : public Error {
 public:
  BackendError(const std::string& what, bool retryable, std::string payload = {})
      : Error(what), retryable_(retryable), payload_(std::move(payload)) {}
  bool retryable() const { return retryable_; }
  const std::string& payload() const { return payload_; }

 private:
  bool retryable_;
  std::string payload_;
};

// Connection failures, timeouts, 429 and 5xx.
class TransportError : public BackendError {
 public:
  explicit TransportError(const std::string& what, std::string payload = {})
      : BackendError(what, true, std::move(payload)) {}
};

// Malformed or contract-violating payloads; never retried.
class ProtocolError : public BackendError {
 public:
  explicit ProtocolError(const std::string& what, std::string payload = {})
      : BackendError(what, false, std::move(payload)) {}
};

// Raised in cache-only mode for a request with no cached response.
class CacheMiss : public BackendError {
 public:
  CacheMiss(std::string key) : BackendError("no cached response for " + key, false), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

// Backends must be safe for concurrent calls.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string id() const = 0;
  virtual Response score_options(const Request& req) = 0;
  virtual Response generate(const Request& req) = 0;

  Response call(const Request& req) {
    return req.mode == PlanMode::kScoreOptions ? score_options(req) : generate(req);
  }
};

// Request for generation round `round` (0-based) of `plan`, with the
// responses of earlier rounds filled in. Score-mode plans take round 0.
Request request_for(const prompting::PromptPlan& plan, std::size_t round, const std::vector<std::string>& responses,
                    double temperature, int max_tokens);

// ---------------------------------------------------------------- synthetic

struct OccupationRates {
  double male = 0.0;    // p(select occupation | male pronoun)
  double female = 0.0;  // p(select occupation | female pronoun)
  bool operator==(const OccupationRates&) const = default;
};

enum class ScoreNoise { kNone, kGumbel };

struct SyntheticModelConfig {
  std::string name = "synthetic";
  std::map<std::string, OccupationRates> type1;
  std::map<std::string, OccupationRates> type2;  // falls back to type1 when empty
  OccupationRates default_rates{0.45, 0.45};    // for occupations absent from the tables
  double instruction_fidelity = 1.0;
  // Multiplier on every (male - female) gap, keyed by strategy id
  // ("inline_pp:pp3") or kind ("inline_pp"); -1 flips the sign.
  std::map<std::string, double> strategy_response;
  // Same, keyed by adaptation name ("zero_shot", "few_shot", "cot", "intrinsic").
  std::map<std::string, double> adaptation_response;
  ScoreNoise score_noise = ScoreNoise::kGumbel;
  // QA: class -> p(select an option of that class | negative / non-negative question).
  std::map<std::string, std::pair<double, double>> qa_rates;
  // Weights of Likert answers 1..5 when asked the quality-judge prompt.
  std::array<double, 5> likert{0, 0, 1, 2, 1};

  static SyntheticModelConfig from_json(const nlohmann::json& j);
  static SyntheticModelConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  // Throws biasaudit::Error when a probability is outside [0, 1].
  void validate() const;

  const OccupationRates& rates(std::string_view occupation, corpus::Ambiguity a) const;
  // 100 * (p_male - p_female) for the occupation.
  double expected_osb(std::string_view occupation, corpus::Ambiguity a) const;
  double multiplier(const prompting::DebiasStrategy& s) const;
  double adaptation_multiplier(prompting::Adaptation a) const;
};

// Scales every gap around its midpoint: p' = mid +/- k * gap / 2, clamped to [0, 1].
SyntheticModelConfig scale_gaps(const SyntheticModelConfig& config, double k);
// The configuration the synthetic model answers with under `strategy`.
SyntheticModelConfig synthetic_apply_strategy(const SyntheticModelConfig& config,
                                              const prompting::DebiasStrategy& strategy);

// What the synthetic model reads off a request.
struct RequestAnalysis {
  prompting::Adaptation adaptation = prompting::Adaptation::kZeroShot;
  prompting::DebiasStrategy strategy;
  bool final_round = true;     // false when the last user turn asks for reasoning only
  bool quality_judge = false;
  std::string sentence;        // the query sentence or QA context
  std::string question;        // QA question, when known
};

RequestAnalysis analyze_request(const Request& req, const prompting::Catalog& catalog);

class SyntheticBackend : public Backend {
 public:
  explicit SyntheticBackend(SyntheticModelConfig config, const prompting::Catalog& catalog = prompting::Catalog::builtin());

  // Ground truth the model may look up by sentence (ambiguity) and by
  // context + question (QA polarity and option classes).
  void add_index(const corpus::CorefSlice& slice);
  void add_index(const corpus::QASlice& slice);

  std::string id() const override { return id_; }
  Response score_options(const Request& req) override;
  Response generate(const Request& req) override;

  const SyntheticModelConfig& config() const { return config_; }
  std::uint64_t calls() const { return calls_.load(); }

 private:
  void refresh_id();

  SyntheticModelConfig config_;
  const prompting::Catalog& catalog_;
  std::string id_;
  std::uint64_t index_digest_ = 0;
  std::vector<std::string> occupations_;  // names the model recognizes in text
  std::map<std::string, corpus::CorefSample> sentence_index_;
  std::map<std::string, corpus::QASample> qa_index_;
  mutable std::atomic<std::uint64_t> calls_{0};
};

// ------------------------------------------------------------------- remote

struct HttpOptions {
  std::chrono::milliseconds connect_timeout{5000};
  std::chrono::milliseconds read_timeout{60000};
  std::size_t max_in_flight = 8;
};

// Speaks POST /v1/eval.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(std::string base_url, HttpOptions options = {});
  ~HttpBackend() override;

  std::string id() const override;
  Response score_options(const Request& req) override { return post(req); }
  Response generate(const Request& req) override { return post(req); }

 private:
  Response post(const Request& req);
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// OpenAI-compatible server: chat/completions for generation, completions
// with echo + logprobs for option scoring.
class OpenAIBackend : public Backend {
 public:
  OpenAIBackend(std::string base_url, std::string model, std::string api_key, HttpOptions options = {});
  ~OpenAIBackend() override;

  std::string id() const override;
  Response score_options(const Request& req) override;
  Response generate(const Request& req) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Serves a backend over /v1/eval. Used by `audit serve-synthetic` and tests.
class EvalServer {
 public:
  explicit EvalServer(Backend& backend);
  ~EvalServer();
  // Binds and starts serving on a background thread; returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Blocks serving on the calling thread.
  void listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// ------------------------------------------------------------------ wrappers

struct CacheStats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t writes = 0;
};

enum class CacheMode { kReadWrite, kCacheOnly };

// Content-addressed response store: <dir>/<key[0:2]>/<key>.json with
// key = sha256(backend id + "\n" + canonical request).
class CachingBackend : public Backend {
 public:
  CachingBackend(std::shared_ptr<Backend> inner, std::filesystem::path dir, CacheMode mode = CacheMode::kReadWrite);

  static std::string key(const std::string& backend_id, const Request& req);
  // BIASAUDIT_CACHE_DIR when set, else `fallback`.
  static std::filesystem::path directory_from_env(const std::filesystem::path& fallback);

  std::string id() const override { return inner_->id(); }
  Response score_options(const Request& req) override { return lookup(req); }
  Response generate(const Request& req) override { return lookup(req); }

  CacheStats stats() const { return {hits_.load(), misses_.load(), writes_.load()}; }
  const std::filesystem::path& dir() const { return dir_; }
  std::optional<Response> peek(const Request& req) const;

 private:
  Response lookup(const Request& req);
  std::filesystem::path path_for(const std::string& key) const;

  std::shared_ptr<Backend> inner_;
  std::filesystem::path dir_;
  CacheMode mode_;
  std::string inner_id_;
  std::atomic<std::uint64_t> hits_{0}, misses_{0}, writes_{0};
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds base_delay{200};
};

// Retries retryable errors with exponential backoff; rethrows the last one.
class RetryingBackend : public Backend {
 public:
  RetryingBackend(std::shared_ptr<Backend> inner, RetryPolicy policy = {});
  std::string id() const override { return inner_->id(); }
  Response score_options(const Request& req) override { return with_retry(req); }
  Response generate(const Request& req) override { return with_retry(req); }
  std::uint64_t retries() const { return retries_.load(); }

 private:
  Response with_retry(const Request& req);
  std::shared_ptr<Backend> inner_;
  RetryPolicy policy_;
  std::atomic<std::uint64_t> retries_{0};
};

struct BackendOptions {
  const prompting::Catalog* catalog = &prompting::Catalog::builtin();
  HttpOptions http;
  RetryPolicy retry;
};

// "synthetic:<config.json>", "http://host:port", "openai:<model>@<base url>".
// The OpenAI key is read from OPENAI_API_KEY.
std::shared_ptr<Backend> make_backend(const std::string& descriptor, const BackendOptions& options = {});

}  // namespace biasaudit::backend
