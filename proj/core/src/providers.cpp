#include "vrduqa/providers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <regex>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include "vrduqa/error.hpp"
#include "vrduqa/hashing.hpp"
#include "vrduqa/image.hpp"

namespace vrduqa::providers {

std::string_view to_string(ProviderType t) {
  switch (t) {
    case ProviderType::OpenAiChat: return "openai";
    case ProviderType::Ner: return "ner";
    case ProviderType::Layout: return "layout";
  }
  return "unknown";
}

void ProviderConfig::validate() const {
  if (name.empty()) throw ConfigError("provider without name");
  if (max_output_tokens < 1)
    throw ConfigError(fmt::format("provider '{}': max_output_tokens must be >= 1", name));
  if (max_retries < 0) throw ConfigError(fmt::format("provider '{}': max_retries must be >= 0", name));
  if (requests_per_minute < 0)
    throw ConfigError(fmt::format("provider '{}': requests_per_minute must be >= 0", name));
  if (timeout_s <= 0) throw ConfigError(fmt::format("provider '{}': timeout must be > 0", name));
  if (max_concurrency < 1 || max_concurrency > 1024)
    throw ConfigError(fmt::format("provider '{}': max_concurrency must be in [1, 1024]", name));
  if (image_scaling && (image_scaling->min_px < 1 || image_scaling->min_px > image_scaling->max_px))
    throw ConfigError(fmt::format("provider '{}': image_scaling needs 1 <= min_px <= max_px", name));
}

void from_json(const json& j, ProviderConfig& c) {
  static const std::vector<std::string> kKnown = {
      "name",        "type",    "endpoint",           "model",       "api_key_env",
      "max_output_tokens", "requests_per_minute", "max_retries", "timeout", "max_concurrency",
      "image_scaling"};
  for (const auto& [key, _] : j.items())
    if (std::find(kKnown.begin(), kKnown.end(), key) == kKnown.end())
      throw ConfigError(fmt::format("provider config: unknown key '{}'", key));
  c.name = j.at("name").get<std::string>();
  const std::string type = j.value("type", std::string("openai"));
  if (type == "openai") c.type = ProviderType::OpenAiChat;
  else if (type == "ner") c.type = ProviderType::Ner;
  else if (type == "layout") c.type = ProviderType::Layout;
  else throw ConfigError(fmt::format("provider '{}': unknown type '{}'", c.name, type));
  c.endpoint = j.value("endpoint", std::string{});
  c.model = j.value("model", std::string{});
  c.api_key_env = j.value("api_key_env", std::string{});
  c.max_output_tokens = j.value("max_output_tokens", 1024);
  c.requests_per_minute = j.value("requests_per_minute", 0);
  c.max_retries = j.value("max_retries", 3);
  c.timeout_s = j.value("timeout", 120.0);
  c.max_concurrency = j.value("max_concurrency", 4);
  if (auto it = j.find("image_scaling"); it != j.end() && !it->is_null()) {
    if (!it->is_array() || it->size() != 2)
      throw ConfigError(fmt::format("provider '{}': image_scaling must be [min_px, max_px]", c.name));
    c.image_scaling = ImageScaling{(*it)[0].get<int>(), (*it)[1].get<int>()};
  }
  c.validate();
}

void to_json(json& j, const ProviderConfig& c) {
  j = json{{"name", c.name},
           {"type", to_string(c.type)},
           {"endpoint", c.endpoint},
           {"model", c.model},
           {"api_key_env", c.api_key_env},
           {"max_output_tokens", c.max_output_tokens},
           {"requests_per_minute", c.requests_per_minute},
           {"max_retries", c.max_retries},
           {"timeout", c.timeout_s},
           {"max_concurrency", c.max_concurrency}};
  if (c.image_scaling)
    j["image_scaling"] = json::array({c.image_scaling->min_px, c.image_scaling->max_px});
}

// ---------------------------------------------------------------------------

double SystemClock::now() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

void SystemClock::sleep_for(double seconds) {
  if (seconds > 0) std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

double ManualClock::now() {
  std::lock_guard lock(mu_);
  return t_;
}

void ManualClock::sleep_for(double seconds) { advance(seconds); }

void ManualClock::advance(double seconds) {
  std::lock_guard lock(mu_);
  if (seconds > 0) t_ += seconds;
}

RateLimiter::RateLimiter(int requests_per_minute, Clock& clock)
    : rpm_(requests_per_minute), clock_(clock) {}

void RateLimiter::acquire() {
  if (rpm_ <= 0) return;
  constexpr double kWindow = 60.0;
  std::unique_lock lock(mu_);
  for (;;) {
    const double now = clock_.now();
    while (!stamps_.empty() && stamps_.front() <= now - kWindow) stamps_.pop_front();
    if (static_cast<int>(stamps_.size()) < rpm_) {
      stamps_.push_back(now);
      return;
    }
    const double wait = stamps_.front() + kWindow - now;
    lock.unlock();
    clock_.sleep_for(wait);
    lock.lock();
  }
}

double BackoffPolicy::delay(int attempt, Rng& rng) const {
  const double nominal = std::min(cap_s, base_s * std::ldexp(1.0, std::min(attempt, 30)));
  return nominal * (0.5 + 0.5 * rng.uniform01());
}

// ---------------------------------------------------------------------------

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {
  if (!dir_.empty()) fs::create_directories(dir_);
}

fs::path ResponseCache::path_for(const std::string& key) const {
  return dir_ / key.substr(0, 2) / (key + ".json");
}

std::optional<CacheEntry> ResponseCache::lookup(const std::string& key) const {
  if (!enabled()) return std::nullopt;
  const fs::path p = path_for(key);
  if (!fs::exists(p)) return std::nullopt;
  try {
    const json j = read_json_file(p);
    return CacheEntry{j.at("body").get<std::string>(), j.value("latency", 0.0),
                      j.value("created_at", std::string{})};
  } catch (const std::exception& e) {
    spdlog::warn("ignoring unreadable cache entry {}: {}", p.string(), e.what());
    return std::nullopt;
  }
}

void ResponseCache::store(const std::string& key, const CacheEntry& entry) const {
  if (!enabled()) return;
  write_json_file(path_for(key),
                  json{{"body", entry.body}, {"latency", entry.latency_s}, {"created_at", entry.created_at}});
}

// ---------------------------------------------------------------------------

HttpEndpoint::HttpEndpoint(std::string url) {
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
  std::smatch m;
  if (!std::regex_match(url, m, kUrl)) throw ConfigError(fmt::format("invalid endpoint URL '{}'", url));
  base_ = m[1].str();
  path_ = m[2].matched ? m[2].str() : "/";
}

HttpReply HttpEndpoint::post(const json& body, const std::map<std::string, std::string>& headers,
                             double timeout_s) {
  httplib::Client cli(base_);
  const auto secs = static_cast<time_t>(timeout_s);
  const auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto res = cli.Post(path_, h, body.dump(), "application/json");
  if (!res) return HttpReply{0, {}, httplib::to_string(res.error())};
  return HttpReply{res->status, res->body, {}};
}

// ---------------------------------------------------------------------------

ProviderClient::ProviderClient(ProviderConfig cfg, std::shared_ptr<Endpoint> endpoint,
                               ResponseCache cache, std::shared_ptr<Clock> clock,
                               std::uint64_t jitter_seed)
    : cfg_(std::move(cfg)),
      endpoint_(std::move(endpoint)),
      cache_(std::move(cache)),
      clock_(clock ? std::move(clock) : std::make_shared<SystemClock>()),
      limiter_(cfg_.requests_per_minute, *clock_),
      slots_(cfg_.max_concurrency),
      jitter_(derive_seed(jitter_seed, cfg_.name)) {
  cfg_.validate();
}

std::string ProviderClient::cache_key(const std::string& key_material) const {
  return sha256_hex(cfg_.name + '\x1f' + key_material);
}

std::size_t ProviderClient::network_calls() const {
  std::lock_guard lock(mu_);
  return network_calls_;
}

std::vector<AttemptRecord> ProviderClient::last_attempts() const {
  std::lock_guard lock(mu_);
  return last_attempts_;
}

CallResult ProviderClient::call(const json& payload, const std::string& key_material) {
  return call([&] { return payload; }, key_material);
}

CallResult ProviderClient::call(const std::function<json()>& make_payload,
                                const std::string& key_material) {
  const std::string key = cache_key(key_material);
  if (auto hit = cache_.lookup(key))
    return CallResult{hit->body, hit->latency_s, true, 0, key, hit->created_at};
  const json payload = make_payload();

  std::map<std::string, std::string> headers;
  if (!cfg_.api_key_env.empty()) {
    const char* secret = std::getenv(cfg_.api_key_env.c_str());
    if (!secret || !*secret)
      throw ConfigError(fmt::format("provider '{}': environment variable {} is not set", cfg_.name,
                                    cfg_.api_key_env));
    headers["Authorization"] = std::string("Bearer ") + secret;
  }

  struct SlotGuard {
    std::counting_semaphore<1024>& s;
    explicit SlotGuard(std::counting_semaphore<1024>& sem) : s(sem) { s.acquire(); }
    ~SlotGuard() { s.release(); }
  } slot(slots_);

  std::vector<AttemptRecord> attempts;
  HttpReply reply;
  double delay = 0;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) {
      {
        std::lock_guard lock(mu_);
        delay = backoff_.delay(attempt - 1, jitter_);
      }
      clock_->sleep_for(delay);
    }
    limiter_.acquire();
    const double t0 = clock_->now();
    reply = endpoint_->post(payload, headers, cfg_.timeout_s);
    const double latency = clock_->now() - t0;
    attempts.push_back({reply.status, attempt > 0 ? delay : 0});
    {
      std::lock_guard lock(mu_);
      ++network_calls_;
      last_attempts_ = attempts;
    }
    if (reply.status >= 200 && reply.status < 300) {
      CacheEntry entry{reply.body, latency, utc_timestamp()};
      cache_.store(key, entry);
      return CallResult{reply.body, latency, false, static_cast<int>(attempts.size()), key,
                        entry.created_at};
    }
    const bool retryable = reply.status == 0 || reply.status == 429 || reply.status >= 500;
    if (!retryable)
      throw ProviderConfigError(fmt::format("provider '{}' rejected request with HTTP {}: {}",
                                            cfg_.name, reply.status, reply.body.substr(0, 300)),
                                key, reply.status);
    spdlog::debug("provider '{}' attempt {} failed (status {} {})", cfg_.name, attempt + 1,
                  reply.status, reply.error);
  }
  throw ProviderError(fmt::format("provider '{}' failed after {} attempts (last status {}{})",
                                  cfg_.name, attempts.size(), reply.status,
                                  reply.error.empty() ? "" : ", " + reply.error),
                      key, reply.status);
}

// ---------------------------------------------------------------------------

json build_chat_payload(const ChatRequest& req, const ProviderConfig& cfg) {
  json messages = json::array();
  if (!req.system.empty()) messages.push_back({{"role", "system"}, {"content", req.system}});
  json content = json::array();
  content.push_back({{"type", "text"}, {"text", req.user}});
  for (const auto& img : req.images) {
    std::string bytes = img.bytes;
    std::string mime = img.mime;
    if (cfg.image_scaling) {
      bytes = scale_image(bytes, cfg.image_scaling->min_px, cfg.image_scaling->max_px);
      mime = "image/png";
    }
    content.push_back({{"type", "image_url"},
                       {"image_url", {{"url", "data:" + mime + ";base64," + base64_encode(bytes)}}}});
  }
  messages.push_back({{"role", "user"}, {"content", content}});
  json payload{{"messages", messages}, {"max_tokens", cfg.max_output_tokens}};
  if (!cfg.model.empty()) payload["model"] = cfg.model;
  return payload;
}

std::string parse_chat_response(const std::string& body, const std::string& request_hash) {
  try {
    const json j = json::parse(body);
    const json& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return content.get<std::string>();
    // Some servers return a list of content parts.
    std::string out;
    for (const auto& part : content)
      if (part.value("type", "") == "text") out += part.value("text", "");
    return out;
  } catch (const json::exception& e) {
    throw ProviderError(fmt::format("malformed chat response: {}", e.what()), request_hash);
  }
}

std::string ChatClient::key_material(const ChatRequest& req) const {
  json images = json::array();
  for (const auto& img : req.images) images.push_back(sha256_hex(img.bytes));
  const auto& cfg = client_->config();
  json material{{"model", cfg.model},
                {"max_tokens", cfg.max_output_tokens},
                {"system", req.system},
                {"user", req.user},
                {"images", images},
                {"salt", req.cache_salt}};
  if (cfg.image_scaling)
    material["image_scaling"] = json::array({cfg.image_scaling->min_px, cfg.image_scaling->max_px});
  return material.dump();
}

std::string ChatClient::cache_key(const ChatRequest& req) const {
  return client_->cache_key(key_material(req));
}

ChatResponse ChatClient::complete(const ChatRequest& req) {
  if (req.user.empty()) throw ConfigError("chat request with empty text");
  const std::string material = key_material(req);
  const std::string key = client_->cache_key(material);
  // Payload construction (base64, rescaling) is skipped on cache hits.
  const CallResult res =
      client_->call([&] { return build_chat_payload(req, client_->config()); }, material);
  return ChatResponse{parse_chat_response(res.body, key), res.latency_s, client_->config().name,
                      res.cached, res.attempts, res.cache_key, res.created_at};
}

// ---------------------------------------------------------------------------

namespace {

/// Byte offset of the `cp`-th code point of `text`, or npos past the end.
std::size_t byte_offset_of_codepoint(const std::string& text, std::size_t cp) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if ((static_cast<unsigned char>(text[i]) & 0xC0) == 0x80) continue;
    if (count == cp) return i;
    ++count;
  }
  return count == cp ? text.size() : std::string::npos;
}

}  // namespace

std::optional<std::pair<std::size_t, std::size_t>> resolve_span(const std::string& text,
                                                                const std::string& surface,
                                                                std::size_t start, std::size_t end) {
  if (surface.empty()) return std::nullopt;
  if (start < end && end <= text.size() && text.compare(start, end - start, surface) == 0)
    return std::pair{start, end};
  const std::size_t bs = byte_offset_of_codepoint(text, start);
  const std::size_t be = byte_offset_of_codepoint(text, end);
  if (bs != std::string::npos && be != std::string::npos && bs < be &&
      text.compare(bs, be - bs, surface) == 0)
    return std::pair{bs, be};
  std::optional<std::pair<std::size_t, std::size_t>> best;
  std::size_t best_dist = std::string::npos;
  for (std::size_t pos = text.find(surface); pos != std::string::npos;
       pos = text.find(surface, pos + 1)) {
    const std::size_t dist = pos > start ? pos - start : start - pos;
    if (dist < best_dist) {
      best_dist = dist;
      best = std::pair{pos, pos + surface.size()};
    }
  }
  return best;
}

std::vector<NerSpan> NerClient::extract_entities(const NerRequest& req) {
  if (req.labels.empty()) throw ConfigError("NER request without labels");
  std::map<std::string, double> thresholds;
  for (const auto& l : req.labels) {
    if (!(l.threshold > 0 && l.threshold <= 1))
      throw ConfigError(fmt::format("NER label '{}': threshold {} not in (0, 1]", l.name, l.threshold));
    thresholds[l.name] = l.threshold;
  }
  if (req.text.empty()) return {};

  json labels = json::array();
  for (const auto& l : req.labels) labels.push_back({{"name", l.name}, {"threshold", l.threshold}});
  const json payload{{"text", req.text}, {"labels", labels}};
  const CallResult res = client_->call(payload, payload.dump());

  std::vector<NerSpan> out;
  try {
    const json j = json::parse(res.body);
    for (const auto& e : j.at("entities")) {
      NerSpan span;
      span.fine_type = e.at("label").get<std::string>();
      span.surface = e.at("text").get<std::string>();
      span.score = e.at("score").get<double>();
      auto it = thresholds.find(span.fine_type);
      if (it == thresholds.end() || span.score < it->second) continue;
      auto resolved = resolve_span(req.text, span.surface, e.value("start", std::size_t{0}),
                                   e.value("end", std::size_t{0}));
      if (!resolved) continue;
      std::tie(span.start, span.end) = *resolved;
      out.push_back(std::move(span));
    }
  } catch (const json::exception& e) {
    throw ProviderError(fmt::format("malformed NER response: {}", e.what()), res.cache_key);
  }
  std::stable_sort(out.begin(), out.end(), [](const NerSpan& l, const NerSpan& r) {
    return std::tie(l.start, l.end) < std::tie(r.start, r.end);
  });
  return out;
}

}  // namespace vrduqa::providers
