#include "examforge/gateway.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <future>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "examforge/hash.hpp"
#include "httplib.h"

namespace examforge {

std::string_view to_string(GatewayErrorKind k) {
  switch (k) {
    case GatewayErrorKind::Auth: return "AuthError";
    case GatewayErrorKind::TimeoutExhausted: return "TimeoutExhausted";
    case GatewayErrorKind::MalformedResponse: return "MalformedResponse";
    case GatewayErrorKind::Transient: return "Transient";
  }
  return "Transient";
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

BackendSpec backend_from_json(const nlohmann::json& j) {
  BackendSpec b;
  b.id = j.at("id").get<std::string>();
  const std::string type = j.value("type", std::string("openai"));
  if (type == "openai") {
    b.type = BackendType::OpenAiCompatible;
  } else if (type == "mock") {
    b.type = BackendType::Mock;
  } else {
    throw std::invalid_argument("backend " + b.id + ": unknown type '" + type + "'");
  }
  b.endpoint = j.value("endpoint", std::string{});
  b.model_name = j.value("model_name", std::string{});
  b.auth_env_var = j.value("auth_env_var", std::string{});
  const auto in_flight = j.value("max_in_flight", 4LL);
  if (in_flight < 1) throw std::invalid_argument("backend " + b.id + ": max_in_flight must be >= 1");
  b.max_in_flight = static_cast<std::size_t>(in_flight);
  b.timeout_seconds = j.value("timeout", 60.0);
  if (!(b.timeout_seconds > 0)) throw std::invalid_argument("backend " + b.id + ": timeout must be > 0");
  b.fixture = j.value("fixture", std::string{});
  if (b.type == BackendType::OpenAiCompatible && b.endpoint.empty())
    throw std::invalid_argument("backend " + b.id + ": endpoint is required");
  return b;
}

nlohmann::ordered_json backend_to_json(const BackendSpec& b) {
  nlohmann::ordered_json j;
  j["id"] = b.id;
  j["type"] = b.type == BackendType::Mock ? "mock" : "openai";
  j["endpoint"] = b.endpoint;
  j["model_name"] = b.model_name;
  j["auth_env_var"] = b.auth_env_var;
  j["max_in_flight"] = b.max_in_flight;
  j["timeout"] = b.timeout_seconds;
  if (!b.fixture.empty()) j["fixture"] = b.fixture;
  return j;
}

std::vector<BackendSpec> backends_from_json(const nlohmann::json& j) {
  const nlohmann::json* list = &j;
  if (j.is_object()) {
    if (!j.contains("backends")) throw std::invalid_argument("backend configuration has no 'backends' list");
    list = &j.at("backends");
  }
  if (!list->is_array()) throw std::invalid_argument("backends must be a JSON array");
  std::vector<BackendSpec> out;
  std::set<std::string> ids;
  for (const auto& jb : *list) {
    out.push_back(backend_from_json(jb));
    if (!ids.insert(out.back().id).second) throw std::invalid_argument("duplicate backend id: " + out.back().id);
  }
  return out;
}

std::vector<BackendSpec> load_backends(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open backend configuration: " + path.string());
  auto specs = backends_from_json(nlohmann::json::parse(in));
  // Relative fixture paths are resolved against the configuration file.
  for (auto& b : specs) {
    if (!b.fixture.empty() && std::filesystem::path(b.fixture).is_relative())
      b.fixture = (path.parent_path() / b.fixture).string();
  }
  return specs;
}

std::string request_hash(const ChatRequest& req, const BackendSpec& backend) {
  nlohmann::json j;  // sorted keys
  j["backend_id"] = backend.id;
  j["model_name"] = backend.model_name;
  j["system"] = req.system;
  j["user"] = req.user;
  j["temperature"] = req.temperature;
  j["max_output_tokens"] = req.max_output_tokens;
  j["seed"] = req.seed ? nlohmann::json(*req.seed) : nlohmann::json(nullptr);
  return sha256_hex(j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace));
}

// ---------------------------------------------------------------------------
// Transports
// ---------------------------------------------------------------------------

namespace {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Url split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("endpoint is not an absolute URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

void set_timeout(httplib::Client& cli, double seconds) {
  const auto sec = static_cast<time_t>(seconds);
  const auto usec = static_cast<time_t>((seconds - static_cast<double>(sec)) * 1e6);
  cli.set_connection_timeout(sec, usec);
  cli.set_read_timeout(sec, usec);
  cli.set_write_timeout(sec, usec);
}

}  // namespace

std::string HttpTransport::send(const ChatRequest& req, const BackendSpec& backend) {
  httplib::Headers headers;
  if (!backend.auth_env_var.empty()) {
    const char* key = std::getenv(backend.auth_env_var.c_str());
    if (!key || !*key)
      throw GatewayError(GatewayErrorKind::Auth,
                         "backend " + backend.id + ": environment variable " + backend.auth_env_var + " is not set");
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  nlohmann::json body;
  body["model"] = backend.model_name;
  body["messages"] = nlohmann::json::array();
  if (!req.system.empty()) body["messages"].push_back({{"role", "system"}, {"content", req.system}});
  body["messages"].push_back({{"role", "user"}, {"content", req.user}});
  body["temperature"] = req.temperature;
  body["max_tokens"] = req.max_output_tokens;
  if (req.seed) body["seed"] = *req.seed;

  const Url url = split_url(backend.endpoint);
  httplib::Client cli(url.origin);
  set_timeout(cli, backend.timeout_seconds);
  auto res = cli.Post(url.path, headers, body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace),
                      "application/json");
  if (!res) {
    throw GatewayError(GatewayErrorKind::Transient,
                       "backend " + backend.id + ": " + httplib::to_string(res.error()));
  }
  const int status = res->status;
  if (status == 401 || status == 403)
    throw GatewayError(GatewayErrorKind::Auth, "backend " + backend.id + ": HTTP " + std::to_string(status));
  if (status == 408 || status == 429 || status >= 500)
    throw GatewayError(GatewayErrorKind::Transient, "backend " + backend.id + ": HTTP " + std::to_string(status));
  if (status < 200 || status >= 300)
    throw GatewayError(GatewayErrorKind::MalformedResponse,
                       "backend " + backend.id + ": HTTP " + std::to_string(status) + ": " + res->body.substr(0, 200));

  try {
    const auto j = nlohmann::json::parse(res->body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw std::invalid_argument("content is not a string");
    return content.get<std::string>();
  } catch (const std::exception& e) {
    throw GatewayError(GatewayErrorKind::MalformedResponse, "backend " + backend.id + ": " + e.what());
  }
}

MockTransport::MockTransport(const std::filesystem::path& fixture) {
  std::ifstream in(fixture);
  if (!in) throw std::runtime_error("cannot open mock fixture: " + fixture.string());
  const auto j = nlohmann::json::parse(in);
  if (j.contains("responses")) {
    for (const auto& [hash, text] : j.at("responses").items()) responses_[hash] = text.get<std::string>();
  }
  if (j.contains("default") && j.at("default").is_string()) default_ = j.at("default").get<std::string>();
}

MockTransport::MockTransport(std::map<std::string, std::string> responses, std::optional<std::string> fallback)
    : responses_(std::move(responses)), default_(std::move(fallback)) {}

std::string MockTransport::send(const ChatRequest& req, const BackendSpec& backend) {
  const auto hash = request_hash(req, backend);
  if (auto it = responses_.find(hash); it != responses_.end()) return it->second;
  if (default_) return *default_;
  throw GatewayError(GatewayErrorKind::MalformedResponse, "mock backend " + backend.id + ": no canned response for " + hash);
}

// ---------------------------------------------------------------------------
// Cache
// ---------------------------------------------------------------------------

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path ResponseCache::path_for(const std::string& hash) const {
  return dir_ / hash.substr(0, 2) / (hash + ".json");
}

std::optional<std::string> ResponseCache::get(const std::string& hash) const {
  std::ifstream in(path_for(hash), std::ios::binary);
  if (!in) return std::nullopt;
  try {
    const auto j = nlohmann::json::parse(in);
    return j.at("text").get<std::string>();
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void ResponseCache::put(const std::string& hash, const nlohmann::ordered_json& request, const std::string& text) const {
  const auto target = path_for(hash);
  std::filesystem::create_directories(target.parent_path());
  std::ostringstream suffix;
  suffix << ".tmp." << std::this_thread::get_id() << '.' << std::random_device{}();
  const auto tmp = target.string() + suffix.str();
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write cache entry: " + tmp);
    nlohmann::ordered_json j;
    j["hash"] = hash;
    j["request"] = request;
    j["text"] = text;
    out << j.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace) << '\n';
  }
  std::filesystem::rename(tmp, target);
}

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

class Gateway::Limiter {
 public:
  explicit Limiter(std::size_t slots) : free_(slots) {}
  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return free_ > 0; });
    --free_;
  }
  void release() {
    {
      std::lock_guard lock(mu_);
      ++free_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t free_;
};

namespace {

class SlotGuard {
 public:
  template <typename L>
  explicit SlotGuard(L& l) : release_([&l] { l.release(); }) {
    l.acquire();
  }
  ~SlotGuard() { release_(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::function<void()> release_;
};

}  // namespace

Gateway::Gateway(GatewayOptions options) : options_(std::move(options)) {
  if (const char* env = std::getenv(kCacheDirEnv); env && *env) options_.cache_dir = env;
  if (!options_.cache_dir.empty()) cache_.emplace(options_.cache_dir);
  if (options_.retry.max_attempts < 1) throw std::invalid_argument("retry.max_attempts must be >= 1");
}

Gateway::~Gateway() = default;

void Gateway::set_transport(const std::string& backend_id, std::shared_ptr<Transport> transport) {
  std::lock_guard lock(mu_);
  transports_[backend_id] = std::move(transport);
}

std::shared_ptr<Transport> Gateway::transport_for(const BackendSpec& backend) {
  std::lock_guard lock(mu_);
  auto& slot = transports_[backend.id];
  if (!slot) {
    if (backend.type == BackendType::Mock) {
      if (backend.fixture.empty()) throw std::invalid_argument("mock backend " + backend.id + " has no fixture");
      slot = std::make_shared<MockTransport>(backend.fixture);
    } else {
      slot = std::make_shared<HttpTransport>();
    }
  }
  return slot;
}

Gateway::Limiter& Gateway::limiter_for(const BackendSpec& backend) {
  std::lock_guard lock(mu_);
  auto& slot = limiters_[backend.id];
  if (!slot) slot = std::make_unique<Limiter>(std::max<std::size_t>(1, backend.max_in_flight));
  return *slot;
}

ChatResponse Gateway::complete(const ChatRequest& req, const BackendSpec& backend) {
  if (req.user.empty()) throw std::invalid_argument("chat request has an empty user message");
  if (!(req.temperature >= 0)) throw std::invalid_argument("temperature must be >= 0");
  if (req.max_output_tokens == 0) throw std::invalid_argument("max_output_tokens must be > 0");

  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  const std::string hash = request_hash(req, backend);
  if (cache_) {
    if (auto hit = cache_->get(hash)) return ChatResponse{*hit, backend.id, elapsed(), true, 0};
  }

  auto transport = transport_for(backend);
  auto& limiter = limiter_for(backend);
  std::string last_error;
  for (int attempt = 1; attempt <= options_.retry.max_attempts; ++attempt) {
    try {
      std::string text;
      {
        SlotGuard slot(limiter);
        text = transport->send(req, backend);
      }
      if (cache_) {
        nlohmann::ordered_json request;
        request["backend_id"] = backend.id;
        request["model_name"] = backend.model_name;
        request["system"] = req.system;
        request["user"] = req.user;
        request["temperature"] = req.temperature;
        request["max_output_tokens"] = req.max_output_tokens;
        request["seed"] = req.seed ? nlohmann::ordered_json(*req.seed) : nlohmann::ordered_json(nullptr);
        cache_->put(hash, request, text);
      }
      return ChatResponse{std::move(text), backend.id, elapsed(), false, attempt};
    } catch (const GatewayError& e) {
      if (e.kind() != GatewayErrorKind::Transient) throw;
      last_error = e.what();
    }
    if (attempt < options_.retry.max_attempts) {
      auto delay = options_.retry.base_delay * (1LL << std::min(attempt - 1, 20));
      std::this_thread::sleep_for(std::min<std::chrono::milliseconds>(delay, options_.retry.max_delay));
    }
  }
  throw GatewayError(GatewayErrorKind::TimeoutExhausted,
                     "backend " + backend.id + ": gave up after " + std::to_string(options_.retry.max_attempts) +
                         " attempts: " + last_error);
}

std::vector<BackendResult> Gateway::fan_out(const ChatRequest& req, const std::vector<BackendSpec>& backends) {
  if (backends.empty()) throw std::invalid_argument("fan_out needs at least one backend");
  std::vector<std::future<BackendResult>> futures;
  futures.reserve(backends.size());
  for (const auto& backend : backends) {
    futures.push_back(std::async(std::launch::async, [this, &req, &backend] {
      BackendResult r;
      r.backend_id = backend.id;
      try {
        r.response = complete(req, backend);
      } catch (const GatewayError& e) {
        r.error_kind = e.kind();
        r.error = e.what();
      } catch (const std::exception& e) {
        r.error_kind = GatewayErrorKind::MalformedResponse;
        r.error = e.what();
      }
      return r;
    }));
  }
  std::vector<BackendResult> out;
  out.reserve(futures.size());
  for (auto& f : futures) out.push_back(f.get());
  return out;
}

}  // namespace examforge
