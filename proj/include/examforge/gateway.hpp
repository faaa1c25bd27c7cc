#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace examforge {

enum class BackendType : std::uint8_t { OpenAiCompatible, Mock };

struct BackendSpec {
  std::string id;
  BackendType type = BackendType::OpenAiCompatible;
  /// Full URL of the chat-completions endpoint, e.g.
  /// https://api.openai.com/v1/chat/completions. Unused by mock backends.
  std::string endpoint;
  std::string model_name;
  /// Environment variable holding the bearer token; empty means no auth.
  std::string auth_env_var;
  std::size_t max_in_flight = 4;
  double timeout_seconds = 60.0;
  /// Mock backends: canned-response fixture file.
  std::string fixture;
};

BackendSpec backend_from_json(const nlohmann::json& j);
nlohmann::ordered_json backend_to_json(const BackendSpec& b);
/// Accepts a bare list of backends or an object with a "backends" list.
/// Throws std::invalid_argument on duplicate ids or max_in_flight < 1.
std::vector<BackendSpec> load_backends(const std::filesystem::path& path);
std::vector<BackendSpec> backends_from_json(const nlohmann::json& j);

struct ChatRequest {
  std::string system;
  std::string user;
  double temperature = 0.0;
  std::size_t max_output_tokens = 1024;
  std::optional<std::uint64_t> seed;
};

struct ChatResponse {
  std::string text;
  std::string backend_id;
  double latency_seconds = 0.0;
  bool cached = false;
  int attempts = 0;
};

enum class GatewayErrorKind : std::uint8_t { Auth, TimeoutExhausted, MalformedResponse, Transient };

std::string_view to_string(GatewayErrorKind k);

class GatewayError : public std::runtime_error {
 public:
  GatewayError(GatewayErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  GatewayErrorKind kind() const { return kind_; }

 private:
  GatewayErrorKind kind_;
};

/// Hex SHA-256 over the canonical JSON of (backend id, model, system, user,
/// temperature, max output tokens, seed). Used as the cache key and as the
/// mock fixture key.
std::string request_hash(const ChatRequest& req, const BackendSpec& backend);

/// Sends one request, without retries or caching. Throws GatewayError;
/// Transient marks failures worth retrying.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::string send(const ChatRequest& req, const BackendSpec& backend) = 0;
};

/// OpenAI-compatible POST of {model, messages, temperature, max_tokens,
/// seed}; reads choices[0].message.content.
class HttpTransport final : public Transport {
 public:
  std::string send(const ChatRequest& req, const BackendSpec& backend) override;
};

/// Serves canned responses from a fixture {"responses": {hash: text},
/// "default": text}. Unknown hashes without a default are malformed.
class MockTransport final : public Transport {
 public:
  explicit MockTransport(const std::filesystem::path& fixture);
  MockTransport(std::map<std::string, std::string> responses, std::optional<std::string> fallback);
  std::string send(const ChatRequest& req, const BackendSpec& backend) override;

 private:
  std::map<std::string, std::string> responses_;
  std::optional<std::string> default_;
};

/// Content-addressed store: <dir>/<h[0:2]>/<h>.json. Writes go through a
/// temporary file and rename, so concurrent readers never see partial
/// records and concurrent writers of the same key leave one complete copy.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);
  std::optional<std::string> get(const std::string& hash) const;
  void put(const std::string& hash, const nlohmann::ordered_json& request, const std::string& text) const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path path_for(const std::string& hash) const;
  std::filesystem::path dir_;
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{8000};
};

struct GatewayOptions {
  /// Empty disables caching.
  std::filesystem::path cache_dir;
  RetryPolicy retry;
};

/// Environment variable that overrides GatewayOptions::cache_dir when set.
inline constexpr const char* kCacheDirEnv = "EXAMFORGE_CACHE_DIR";

struct BackendResult {
  std::string backend_id;
  std::optional<ChatResponse> response;
  std::optional<GatewayErrorKind> error_kind;
  std::string error;

  bool ok() const { return response.has_value(); }
};

class Gateway {
 public:
  explicit Gateway(GatewayOptions options = {});
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Overrides the transport chosen from the backend type.
  void set_transport(const std::string& backend_id, std::shared_ptr<Transport> transport);

  /// Cached when possible; otherwise sends with exponential backoff on
  /// transient failures. At most backend.max_in_flight calls per backend run
  /// at once. Throws std::invalid_argument for an invalid request,
  /// GatewayError otherwise.
  ChatResponse complete(const ChatRequest& req, const BackendSpec& backend);

  /// One result per backend, run concurrently; failures are reported per
  /// entry. Throws std::invalid_argument on an empty backend list.
  std::vector<BackendResult> fan_out(const ChatRequest& req, const std::vector<BackendSpec>& backends);

  const GatewayOptions& options() const { return options_; }

 private:
  class Limiter;

  std::shared_ptr<Transport> transport_for(const BackendSpec& backend);
  Limiter& limiter_for(const BackendSpec& backend);

  GatewayOptions options_;
  std::optional<ResponseCache> cache_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Transport>> transports_;
  std::map<std::string, std::unique_ptr<Limiter>> limiters_;
};

}  // namespace examforge
