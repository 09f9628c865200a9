// Copyright 2026 The biasaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include <httplib.h>

#include <semaphore>
#include <thread>

#include "biasaudit/backend.hpp"

namespace biasaudit::backend {
namespace {

using nlohmann::json;

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;    // without trailing slash
};

Url split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error("backend URL needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  Url u{url.substr(0, slash), slash == std::string::npos ? std::string() : url.substr(slash)};
  while (!u.path.empty() && u.path.back() == '/') u.path.pop_back();
  return u;
}

std::unique_ptr<httplib::Client> make_client(const std::string& origin, const HttpOptions& o) {
  auto c = std::make_unique<httplib::Client>(origin);
  c->set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(o.connect_timeout));
  c->set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(o.read_timeout));
  c->set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(o.read_timeout));
  return c;
}

// Posts JSON and maps failures onto the retryable / fatal split.
json post_json(const std::string& origin, const std::string& path, const json& body, const HttpOptions& o,
               const httplib::Headers& headers = {}) {
  auto client = make_client(origin, o);
  const auto res = client->Post(path, headers, body.dump(), "application/json");
  if (!res) throw TransportError("POST " + origin + path + " failed: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500)
    throw TransportError("POST " + origin + path + " returned HTTP " + std::to_string(res->status), res->body);
  if (res->status != 200)
    throw BackendError("POST " + origin + path + " returned HTTP " + std::to_string(res->status), false, res->body);
  try {
    return json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("response is not JSON: ") + e.what(), res->body);
  }
}

class InFlight {
 public:
  explicit InFlight(std::counting_semaphore<>& s) : s_(s) { s_.acquire(); }
  ~InFlight() { s_.release(); }

 private:
  std::counting_semaphore<>& s_;
};

std::size_t code_points(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

}  // namespace

struct HttpBackend::Impl {
  Url url;
  std::string base;
  HttpOptions options;
  std::counting_semaphore<> slots;

  Impl(std::string b, HttpOptions o)
      : url(split_url(b)), base(std::move(b)), options(o),
        slots(static_cast<std::ptrdiff_t>(std::max<std::size_t>(o.max_in_flight, 1))) {}
};

HttpBackend::HttpBackend(std::string base_url, HttpOptions options)
    : impl_(std::make_unique<Impl>(std::move(base_url), options)) {}
HttpBackend::~HttpBackend() = default;

std::string HttpBackend::id() const { return "http:" + impl_->base; }

Response HttpBackend::post(const Request& req) {
  InFlight guard(impl_->slots);
  const json body = post_json(impl_->url.origin, impl_->url.path + "/v1/eval", req.to_json(), impl_->options);
  Response r = Response::from_json(body);
  check_response(req, r);
  if (r.backend_id.empty()) r.backend_id = id();
  return r;
}

struct OpenAIBackend::Impl {
  Url url;
  std::string base, model, key;
  HttpOptions options;
  std::counting_semaphore<> slots;

  Impl(std::string b, std::string m, std::string k, HttpOptions o)
      : url(split_url(b)), base(std::move(b)), model(std::move(m)), key(std::move(k)), options(o),
        slots(static_cast<std::ptrdiff_t>(std::max<std::size_t>(o.max_in_flight, 1))) {}

  httplib::Headers headers() const {
    if (key.empty()) return {};
    return {{"Authorization", "Bearer " + key}};
  }
};

OpenAIBackend::OpenAIBackend(std::string base_url, std::string model, std::string api_key, HttpOptions options)
    : impl_(std::make_unique<Impl>(std::move(base_url), std::move(model), std::move(api_key), options)) {}
OpenAIBackend::~OpenAIBackend() = default;

std::string OpenAIBackend::id() const { return "openai:" + impl_->model + "@" + impl_->base; }

Response OpenAIBackend::generate(const Request& req) {
  InFlight guard(impl_->slots);
  json messages = json::array();
  for (const auto& t : req.turns) {
    const char* role = t.role == Role::kSystem ? "system" : t.role == Role::kUser ? "user" : "assistant";
    messages.push_back({{"role", role}, {"content", t.text}});
  }
  const json body = {{"model", impl_->model},
                     {"messages", messages},
                     {"max_tokens", req.max_tokens},
                     {"temperature", req.temperature},
                     {"seed", req.seed}};
  const json out = post_json(impl_->url.origin, impl_->url.path + "/chat/completions", body, impl_->options,
                             impl_->headers());
  try {
    Response r{std::nullopt, out.at("choices").at(0).at("message").at("content").get<std::string>(), id(), {}};
    return r;
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("unexpected chat/completions payload: ") + e.what(), out.dump());
  }
}

Response OpenAIBackend::score_options(const Request& req) {
  std::string prefix;
  for (const auto& t : req.turns) prefix += t.text;
  std::vector<double> scores;
  for (const auto& option : req.options) {
    InFlight guard(impl_->slots);
    const std::string full = prefix + option;
    const json body = {{"model", impl_->model}, {"prompt", full}, {"max_tokens", 1},
                       {"echo", true},          {"logprobs", 0},  {"temperature", 0.0}};
    const json out =
        post_json(impl_->url.origin, impl_->url.path + "/completions", body, impl_->options, impl_->headers());
    try {
      const json& lp = out.at("choices").at(0).at("logprobs");
      const auto& offsets = lp.at("text_offset");
      const auto& values = lp.at("token_logprobs");
      const std::size_t lo = code_points(prefix), hi = code_points(full);
      double total = 0.0;
      std::size_t used = 0;
      for (std::size_t i = 0; i < offsets.size() && i < values.size(); ++i) {
        const auto off = offsets[i].get<std::size_t>();
        if (off < lo || off >= hi || values[i].is_null()) continue;
        total += values[i].get<double>();
        ++used;
      }
      if (used == 0) throw ProtocolError("no option tokens in echoed logprobs", out.dump());
      scores.push_back(total);
    } catch (const json::exception& e) {
      throw ProtocolError(std::string("unexpected completions payload: ") + e.what(), out.dump());
    }
  }
  return {std::move(scores), std::nullopt, id(), {}};
}

struct EvalServer::Impl {
  Backend& backend;
  httplib::Server server;
  std::thread thread;

  explicit Impl(Backend& b) : backend(b) {
    server.Post("/v1/eval", [this](const httplib::Request& hreq, httplib::Response& hres) {
      auto fail = [&](int status, const std::string& what) {
        hres.status = status;
        hres.set_content(json{{"error", what}}.dump(), "application/json");
      };
      try {
        const Request req = Request::from_json(json::parse(hreq.body));
        hres.set_content(backend.call(req).to_json().dump(), "application/json");
      } catch (const json::parse_error& e) {
        fail(400, e.what());
      } catch (const ProtocolError& e) {
        fail(400, e.what());
      } catch (const BackendError& e) {
        fail(e.retryable() ? 503 : 500, e.what());
      } catch (const std::exception& e) {
        fail(500, e.what());
      }
    });
  }
};

EvalServer::EvalServer(Backend& backend) : impl_(std::make_unique<Impl>(backend)) {}

EvalServer::~EvalServer() { stop(); }

int EvalServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0)
    bound = impl_->server.bind_to_any_port(host);
  else if (!impl_->server.bind_to_port(host, port))
    bound = -1;
  if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void EvalServer::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
}

void EvalServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace biasaudit::backend
