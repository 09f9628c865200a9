// Copyright 2026 The biasaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "biasaudit/backend.hpp"
#include "biasaudit/util/hash.hpp"
#include "biasaudit/util/rng.hpp"

namespace biasaudit::backend {

namespace fs = std::filesystem;
using nlohmann::json;

CachingBackend::CachingBackend(std::shared_ptr<Backend> inner, fs::path dir, CacheMode mode)
    : inner_(std::move(inner)), dir_(std::move(dir)), mode_(mode), inner_id_(inner_->id()) {}

std::string CachingBackend::key(const std::string& backend_id, const Request& req) {
  return sha256_hex(backend_id + "\n" + req.canonical());
}

fs::path CachingBackend::directory_from_env(const fs::path& fallback) {
  const char* env = std::getenv("BIASAUDIT_CACHE_DIR");
  return env && *env ? fs::path(env) : fallback;
}

fs::path CachingBackend::path_for(const std::string& key) const { return dir_ / key.substr(0, 2) / (key + ".json"); }

std::optional<Response> CachingBackend::peek(const Request& req) const {
  const std::string k = key(inner_id_, req);
  std::ifstream in(path_for(k));
  if (!in) return std::nullopt;
  try {
    const json j = json::parse(in);
    Response r = Response::from_json(j.at("response"));
    check_response(req, r);
    r.raw_ref = k;
    return r;
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable entries count as misses and get rewritten
  }
}

Response CachingBackend::lookup(const Request& req) {
  if (auto hit = peek(req)) {
    ++hits_;
    return *hit;
  }
  ++misses_;
  const std::string k = key(inner_id_, req);
  if (mode_ == CacheMode::kCacheOnly) throw CacheMiss(k);

  Response r = inner_->call(req);
  check_response(req, r);
  r.raw_ref.clear();
  const json entry = {{"key", k}, {"backend_id", inner_id_}, {"request", req.to_json()}, {"response", r.to_json()}};

  const fs::path target = path_for(k);
  std::error_code ec;
  fs::create_directories(target.parent_path(), ec);
  std::ostringstream tmp_name;
  tmp_name << target.filename().string() << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id());
  const fs::path tmp = target.parent_path() / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write cache entry " + tmp.string());
    out << entry.dump() << '\n';
  }
  fs::rename(tmp, target, ec);
  if (ec) throw Error("cannot store cache entry " + target.string() + ": " + ec.message());
  ++writes_;
  r.raw_ref = k;
  return r;
}

RetryingBackend::RetryingBackend(std::shared_ptr<Backend> inner, RetryPolicy policy)
    : inner_(std::move(inner)), policy_(policy) {}

Response RetryingBackend::with_retry(const Request& req) {
  auto delay = policy_.base_delay;
  for (int attempt = 1;; ++attempt) {
    try {
      return inner_->call(req);
    } catch (const BackendError& e) {
      if (!e.retryable() || attempt >= policy_.attempts) throw;
      ++retries_;
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
}

std::shared_ptr<Backend> make_backend(const std::string& descriptor, const BackendOptions& options) {
  if (descriptor.rfind("synthetic:", 0) == 0)
    return std::make_shared<SyntheticBackend>(SyntheticModelConfig::load(descriptor.substr(10)), *options.catalog);
  if (descriptor.rfind("http://", 0) == 0 || descriptor.rfind("https://", 0) == 0)
    return std::make_shared<RetryingBackend>(std::make_shared<HttpBackend>(descriptor, options.http), options.retry);
  if (descriptor.rfind("openai:", 0) == 0) {
    const std::string rest = descriptor.substr(7);
    const auto at = rest.find('@');
    if (at == std::string::npos || at == 0)
      throw Error("openai backend descriptor must look like openai:<model>@<base url>, got " + descriptor);
    const char* key = std::getenv("OPENAI_API_KEY");
    return std::make_shared<RetryingBackend>(
        std::make_shared<OpenAIBackend>(rest.substr(at + 1), rest.substr(0, at), key ? key : "", options.http),
        options.retry);
  }
  throw Error("unknown backend descriptor '" + descriptor + "'");
}

}  // namespace biasaudit::backend
