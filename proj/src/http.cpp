#include <httplib.h>

#include "gg/http.hpp"

#include <cmath>
#include <mutex>
#include <thread>

#include "gg/log.hpp"

namespace gg::http {
namespace {

class HttplibTransport final : public Transport {
 public:
  HttplibTransport(const std::string& base_url, std::chrono::milliseconds timeout) {
    auto [host, prefix] = split_base_url(base_url);
    client_ = std::make_unique<httplib::Client>(host);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client_->set_connection_timeout(secs.count(), usecs.count());
    client_->set_read_timeout(secs.count(), usecs.count());
    client_->set_write_timeout(secs.count(), usecs.count());
  }

  Response post(const std::string& path, const std::string& body, const Headers& headers) override {
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client_->Post(path, h, body, "application/json");
    if (!res) {
      throw TransportError(0, true, "POST " + path + " failed: " + httplib::to_string(res.error()));
    }
    return {res->status, res->body};
  }

 private:
  std::unique_ptr<httplib::Client> client_;
};

std::mutex g_factory_mutex;

TransportFactory default_factory() {
  return [](const std::string& base_url, std::chrono::milliseconds timeout) -> std::unique_ptr<Transport> {
    return std::make_unique<HttplibTransport>(base_url, timeout);
  };
}

TransportFactory& factory_slot() {
  static TransportFactory factory = default_factory();
  return factory;
}

}  // namespace

TransportFactory set_transport_factory(TransportFactory factory) {
  std::lock_guard lock(g_factory_mutex);
  TransportFactory previous = std::move(factory_slot());
  factory_slot() = factory ? std::move(factory) : default_factory();
  return previous;
}

std::unique_ptr<Transport> make_transport(const std::string& base_url, std::chrono::milliseconds timeout) {
  TransportFactory factory;
  {
    std::lock_guard lock(g_factory_mutex);
    factory = factory_slot();
  }
  return factory(base_url, timeout);
}

std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos || scheme_end == 0) {
    throw ConfigError("base URL must start with http:// or https://: \"" + base_url + "\"");
  }
  const auto path_start = base_url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {base_url, ""};
  std::string prefix = base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {base_url.substr(0, path_start), prefix};
}

std::chrono::milliseconds RetryPolicy::backoff_before(int attempt) const {
  const double ms = static_cast<double>(initial_backoff.count()) * std::pow(backoff_factor, attempt - 2);
  return std::chrono::milliseconds(static_cast<long long>(ms));
}

bool is_retryable_status(int status) {
  return status == 408 || status == 425 || status == 429 || (status >= 500 && status <= 599);
}

JsonClient::JsonClient(ClientOptions options)
    : options_(std::move(options)),
      in_flight_(static_cast<std::ptrdiff_t>(options_.max_in_flight == 0 ? 1 : options_.max_in_flight)) {
  if (options_.retry.max_attempts < 1) throw ConfigError("retry attempts must be at least 1");
  path_prefix_ = split_base_url(options_.base_url).second;
}

nlohmann::json JsonClient::post(const std::string& path, const nlohmann::json& body) {
  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{in_flight_};

  const std::string full_path = path_prefix_ + path;
  const std::string payload = body.dump();
  Headers headers;
  if (!options_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + options_.api_key);

  const int max_attempts = options_.retry.max_attempts;
  for (int attempt = 1;; ++attempt) {
    if (attempt > 1) {
      const auto delay = options_.retry.backoff_before(attempt);
      std::this_thread::sleep_for(delay);
    }
    ++attempts_;
    try {
      auto transport = make_transport(options_.base_url, options_.timeout);
      Response res = transport->post(full_path, payload, headers);
      if (res.status >= 200 && res.status < 300) {
        try {
          return nlohmann::json::parse(res.body);
        } catch (const nlohmann::json::parse_error& e) {
          throw TransportError(res.status, false, "POST " + full_path + ": response is not JSON: " + e.what());
        }
      }
      std::string snippet = res.body.substr(0, 200);
      throw TransportError(res.status, is_retryable_status(res.status),
                           "POST " + full_path + " returned HTTP " + std::to_string(res.status) + ": " + snippet);
    } catch (const TransportError& e) {
      if (!e.retryable() || attempt >= max_attempts) throw;
      ++retries_;
      log::warn("retrying POST " + full_path + " (attempt " + std::to_string(attempt + 1) + "/" +
                std::to_string(max_attempts) + ") after " +
                std::to_string(options_.retry.backoff_before(attempt + 1).count()) + " ms: " + e.what());
    }
  }
}

}  // namespace gg::http
