#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "dblex/embedder.hpp"
#include "dblex/error.hpp"

namespace dblex::embeddings {

using nlohmann::json;

HttpEmbedderClient::HttpEmbedderClient(std::string base_url, RetryPolicy retry,
                                       std::chrono::seconds timeout)
    : base_url_(std::move(base_url)), retry_(retry), timeout_(timeout) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
  if (retry_.max_attempts < 1) retry_.max_attempts = 1;
}

namespace {

template <typename Call>
httplib::Result with_retry(const RetryPolicy& retry, const std::string& what, Call&& call) {
  std::string last_error;
  for (int attempt = 1; attempt <= retry.max_attempts; ++attempt) {
    httplib::Result res = call();
    if (res && res->status < 500) {
      if (res->status == 200) return res;
      throw Error(Errc::http_failure, what + " returned HTTP " + std::to_string(res->status) +
                                          " (attempt " + std::to_string(attempt) + "): " +
                                          res->body);
    }
    last_error = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
    if (attempt < retry.max_attempts) std::this_thread::sleep_for(retry.backoff * attempt);
  }
  throw Error(Errc::http_failure, what + " failed after " + std::to_string(retry.max_attempts) +
                                      " attempts: " + last_error);
}

}  // namespace

void HttpEmbedderClient::fetch_info() const {
  if (dim_ != 0) return;
  httplib::Client client(base_url_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  auto res = with_retry(retry_, "GET /info", [&] { return client.Get("/info"); });
  try {
    const json info = json::parse(res->body);
    embedder_id_ = info.at("embedder_id").get<std::string>();
    dim_ = info.at("dim").get<std::size_t>();
  } catch (const json::exception& e) {
    throw Error(Errc::http_failure, std::string("GET /info: bad body: ") + e.what());
  }
  if (dim_ == 0) throw Error(Errc::dim_mismatch, "provider reports dim 0");
}

std::string HttpEmbedderClient::embedder_id() const {
  fetch_info();
  return embedder_id_;
}

std::size_t HttpEmbedderClient::dim() const {
  fetch_info();
  return dim_;
}

EmbeddingMatrix HttpEmbedderClient::embed(std::span<const std::string> texts, Level level,
                                          Pooling pooling) {
  const json body = {{"texts", std::vector<std::string>(texts.begin(), texts.end())},
                     {"level", to_string(level)},
                     {"pooling", to_string(pooling)}};
  const std::string payload = body.dump();
  // A fresh client per call keeps concurrent embed() calls independent.
  httplib::Client client(base_url_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  auto res = with_retry(retry_, "POST /embed",
                        [&] { return client.Post("/embed", payload, "application/json"); });
  EmbeddingMatrix m = decode(res->body, dim_ != 0 ? std::optional(dim_) : std::nullopt);
  if (m.level() != level) throw Error(Errc::http_failure, "provider returned the wrong level");
  return m;
}

struct EmbeddingService::Impl {
  std::shared_ptr<Embedder> embedder;
  std::mutex embed_mutex;
  httplib::Server server;
  std::thread thread;
};

EmbeddingService::EmbeddingService(std::shared_ptr<Embedder> embedder)
    : impl_(std::make_unique<Impl>()) {
  impl_->embedder = std::move(embedder);
  auto& server = impl_->server;
  Impl* impl = impl_.get();

  auto fail = [](httplib::Response& res, int status, const std::string& msg) {
    res.status = status;
    res.set_content(json{{"error", msg}}.dump(), "application/json");
  };

  server.Get("/info", [impl](const httplib::Request&, httplib::Response& res) {
    const json info = {{"embedder_id", impl->embedder->embedder_id()},
                       {"dim", impl->embedder->dim()}};
    res.set_content(info.dump(), "application/json");
  });

  server.Post("/embed", [impl, fail](const httplib::Request& req, httplib::Response& res) {
    std::vector<std::string> texts;
    Level level{};
    Pooling pooling{};
    try {
      const json body = json::parse(req.body);
      texts = body.at("texts").get<std::vector<std::string>>();
      level = parse_level(body.at("level").get<std::string>());
      pooling = parse_pooling(body.value("pooling", std::string("cls")));
    } catch (const std::exception& e) {
      return fail(res, 400, e.what());
    }
    if (texts.empty()) return fail(res, 400, "texts is empty");
    try {
      // Request-serial inference, as a model sidecar would do.
      std::lock_guard lock(impl->embed_mutex);
      res.set_content(encode(impl->embedder->embed(texts, level, pooling)),
                      "application/octet-stream");
    } catch (const Error& e) {
      fail(res, 400, e.what());
    }
  });
}

EmbeddingService::~EmbeddingService() { stop(); }

int EmbeddingService::start(const std::string& host, int port) {
  auto& server = impl_->server;
  const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(Errc::io_error, "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([&server] { server.listen_after_bind(); });
  server.wait_until_ready();
  return bound;
}

void EmbeddingService::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) {
    throw Error(Errc::io_error, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void EmbeddingService::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace dblex::embeddings
