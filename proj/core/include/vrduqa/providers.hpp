#pragma once

// Clients for external inference services. Every model (VQA models, OCR,
// captioner, judge, refiner, standardizer, NER, layout detector) is reached
// over HTTP through an Endpoint; ProviderClient adds the shared behavior:
// content-addressed caching, exponential backoff, requests-per-minute limiting
// and a per-provider concurrency bound.

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <utility>
#include <vector>

#include "vrduqa/io.hpp"
#include "vrduqa/rng.hpp"

namespace vrduqa::providers {

enum class ProviderType { OpenAiChat, Ner, Layout };

struct ImageScaling {
  int min_px = 256;
  int max_px = 1440;
};

struct ProviderConfig {
  std::string name;
  ProviderType type = ProviderType::OpenAiChat;
  std::string endpoint;  // full URL of the POST target
  std::string model;     // forwarded as "model" on chat requests
  std::string api_key_env;
  int max_output_tokens = 1024;
  int requests_per_minute = 0;  // 0 = unlimited
  int max_retries = 3;
  double timeout_s = 120;
  int max_concurrency = 4;
  std::optional<ImageScaling> image_scaling;

  /// Throws ConfigError when an invariant is broken.
  void validate() const;
};

void from_json(const json& j, ProviderConfig& c);
void to_json(json& j, const ProviderConfig& c);
std::string_view to_string(ProviderType t);

// ---------------------------------------------------------------------------
// Time

class Clock {
 public:
  virtual ~Clock() = default;
  /// Monotonic seconds.
  virtual double now() = 0;
  virtual void sleep_for(double seconds) = 0;
};

class SystemClock final : public Clock {
 public:
  double now() override;
  void sleep_for(double seconds) override;
};

/// Virtual time: sleeping advances the clock instantly. Thread-safe.
class ManualClock final : public Clock {
 public:
  double now() override;
  void sleep_for(double seconds) override;
  void advance(double seconds);

 private:
  std::mutex mu_;
  double t_ = 0;
};

/// Sliding 60-second window limiter: at most `requests_per_minute` acquisitions
/// in any 60 s interval. Blocks (through the clock) until a slot frees up.
class RateLimiter {
 public:
  RateLimiter(int requests_per_minute, Clock& clock);
  void acquire();
  int limit() const { return rpm_; }

 private:
  int rpm_;
  Clock& clock_;
  std::mutex mu_;
  std::deque<double> stamps_;
};

/// Exponential backoff with jitter: the nominal delay base*2^attempt is capped
/// and then drawn uniformly from [nominal/2, nominal].
struct BackoffPolicy {
  double base_s = 1.0;
  double cap_s = 60.0;

  double delay(int attempt, Rng& rng) const;
};

// ---------------------------------------------------------------------------
// Cache

struct CacheEntry {
  std::string body;  // raw 2xx response body
  double latency_s = 0;
  std::string created_at;
};

/// On-disk content-addressed cache: <dir>/<key[0:2]>/<key>.json. An empty
/// directory disables caching.
class ResponseCache {
 public:
  ResponseCache() = default;
  explicit ResponseCache(fs::path dir);

  bool enabled() const { return !dir_.empty(); }
  std::optional<CacheEntry> lookup(const std::string& key) const;
  void store(const std::string& key, const CacheEntry& entry) const;
  fs::path path_for(const std::string& key) const;

 private:
  fs::path dir_;
};

// ---------------------------------------------------------------------------
// Transport

struct HttpReply {
  int status = 0;  // 0 = transport failure (connect, timeout)
  std::string body;
  std::string error;
};

/// One POST target speaking JSON.
class Endpoint {
 public:
  virtual ~Endpoint() = default;
  virtual HttpReply post(const json& body, const std::map<std::string, std::string>& headers,
                         double timeout_s) = 0;
};

class HttpEndpoint final : public Endpoint {
 public:
  explicit HttpEndpoint(std::string url);
  HttpReply post(const json& body, const std::map<std::string, std::string>& headers,
                 double timeout_s) override;

 private:
  std::string base_;  // scheme://host[:port]
  std::string path_;
};

/// One attempt as seen by the client; kept for diagnostics and tests.
struct AttemptRecord {
  int status = 0;
  double delay_before_s = 0;
};

struct CallResult {
  std::string body;
  double latency_s = 0;
  bool cached = false;
  int attempts = 0;
  std::string cache_key;
  std::string created_at;
};

/// Shared retry/cache/rate-limit wrapper around an Endpoint.
class ProviderClient {
 public:
  ProviderClient(ProviderConfig cfg, std::shared_ptr<Endpoint> endpoint, ResponseCache cache = {},
                 std::shared_ptr<Clock> clock = nullptr, std::uint64_t jitter_seed = 0);

  /// Posts `payload`, keyed in the cache by sha256(provider name + key_material).
  /// Retries transport failures, 429 and 5xx with backoff; other 4xx raise
  /// ProviderConfigError immediately; exhausting retries raises ProviderError.
  CallResult call(const json& payload, const std::string& key_material);
  /// As above; the payload is only built on a cache miss.
  CallResult call(const std::function<json()>& make_payload, const std::string& key_material);

  const ProviderConfig& config() const { return cfg_; }
  std::string cache_key(const std::string& key_material) const;
  /// Number of requests that actually reached the endpoint.
  std::size_t network_calls() const;
  std::vector<AttemptRecord> last_attempts() const;

 private:
  ProviderConfig cfg_;
  std::shared_ptr<Endpoint> endpoint_;
  ResponseCache cache_;
  std::shared_ptr<Clock> clock_;
  RateLimiter limiter_;
  BackoffPolicy backoff_;
  std::counting_semaphore<1024> slots_;
  mutable std::mutex mu_;
  Rng jitter_;
  std::size_t network_calls_ = 0;
  std::vector<AttemptRecord> last_attempts_;
};

// ---------------------------------------------------------------------------
// Chat completions (OpenAI-compatible)

struct ImagePayload {
  std::string bytes;  // encoded PNG/JPEG
  std::string mime = "image/png";
};

struct ChatRequest {
  std::string system;  // optional instruction; sent as a system message when non-empty
  std::string user;
  std::vector<ImagePayload> images;
  /// Distinguishes deliberate re-asks (e.g. a retry after a malformed answer)
  /// in the cache key. Never sent on the wire.
  int cache_salt = 0;
};

struct ChatResponse {
  std::string text;
  double latency_s = 0;
  std::string provider;
  bool cached = false;
  int attempts = 0;
  std::string cache_key;
  std::string created_at;
};

/// Builds the chat-completions request body (messages with text and base64
/// data-URL image parts). No temperature is sent.
json build_chat_payload(const ChatRequest& req, const ProviderConfig& cfg);
/// Extracts choices[0].message.content; throws ProviderError when absent.
std::string parse_chat_response(const std::string& body, const std::string& request_hash);

class ChatClient {
 public:
  explicit ChatClient(std::shared_ptr<ProviderClient> client) : client_(std::move(client)) {}
  ChatResponse complete(const ChatRequest& req);
  /// Cache key `complete` would use for `req`.
  std::string cache_key(const ChatRequest& req) const;
  const ProviderConfig& config() const { return client_->config(); }
  ProviderClient& transport() { return *client_; }

 private:
  std::string key_material(const ChatRequest& req) const;
  std::shared_ptr<ProviderClient> client_;
};

// ---------------------------------------------------------------------------
// NER service: POST {text, labels:[{name, threshold}]}
//              -> {entities:[{label, text, start, end, score}]}

struct NerLabel {
  std::string name;
  double threshold = 0.75;
};

struct NerRequest {
  std::string text;
  std::vector<NerLabel> labels;
};

struct NerSpan {
  std::string fine_type;
  std::string surface;
  std::size_t start = 0;  // byte offsets into the UTF-8 text
  std::size_t end = 0;
  double score = 0;

  friend bool operator==(const NerSpan&, const NerSpan&) = default;
};

/// Maps a service-reported span onto byte offsets of `text`. Services may
/// report code-point offsets; when neither interpretation reproduces the
/// surface the nearest verbatim occurrence is used. nullopt when the surface
/// does not occur at all.
std::optional<std::pair<std::size_t, std::size_t>> resolve_span(const std::string& text,
                                                                const std::string& surface,
                                                                std::size_t start, std::size_t end);

class NerClient {
 public:
  explicit NerClient(std::shared_ptr<ProviderClient> client) : client_(std::move(client)) {}
  /// Spans with score >= their label's threshold, inside the text, sorted by
  /// start. Empty text returns {} without a call. Throws ConfigError on an
  /// empty label list.
  std::vector<NerSpan> extract_entities(const NerRequest& req);
  const ProviderConfig& config() const { return client_->config(); }

 private:
  std::shared_ptr<ProviderClient> client_;
};

}  // namespace vrduqa::providers
