#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <functional>
#include <memory>
#include <semaphore>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gg/errors.hpp"

namespace gg::http {

struct Response {
  int status = 0;
  std::string body;
};

using Headers = std::vector<std::pair<std::string, std::string>>;

/// One POST of a JSON body. Implementations throw TransportError(0, true, ...)
/// when no HTTP response was received.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual Response post(const std::string& path, const std::string& body, const Headers& headers) = 0;
};

using TransportFactory =
    std::function<std::unique_ptr<Transport>(const std::string& base_url, std::chrono::milliseconds timeout)>;

/// Swaps the process-wide factory used by every remote backend; returns the
/// previous one. Passing an empty function restores the cpp-httplib default.
TransportFactory set_transport_factory(TransportFactory factory);

std::unique_ptr<Transport> make_transport(const std::string& base_url, std::chrono::milliseconds timeout);

/// "https://host:8080/v1" -> {"https://host:8080", "/v1"}. Throws ConfigError
/// for URLs without a scheme.
std::pair<std::string, std::string> split_base_url(const std::string& base_url);

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  double backoff_factor = 2.0;

  std::chrono::milliseconds backoff_before(int attempt) const;  // attempt >= 2
};

/// 408, 425, 429 and every 5xx are worth retrying.
bool is_retryable_status(int status);

struct ClientOptions {
  std::string base_url;
  std::string api_key;
  RetryPolicy retry;
  std::size_t max_in_flight = 4;
  std::chrono::milliseconds timeout{120000};
};

/// JSON-over-HTTP client with bounded concurrency and retry on transient
/// failures. Safe to share between threads.
class JsonClient {
 public:
  explicit JsonClient(ClientOptions options);

  /// POSTs `body` to base_url + path and returns the parsed 2xx response.
  nlohmann::json post(const std::string& path, const nlohmann::json& body);

  std::size_t attempts() const { return attempts_.load(); }
  std::size_t retries() const { return retries_.load(); }
  const ClientOptions& options() const { return options_; }

 private:
  ClientOptions options_;
  std::string path_prefix_;
  std::counting_semaphore<> in_flight_;
  std::atomic<std::size_t> attempts_{0};
  std::atomic<std::size_t> retries_{0};
};

}  // namespace gg::http
