#include <doctest.h>

#include <httplib.h>

#include <thread>

#include "support.hpp"
#include "vrduqa/error.hpp"
#include "vrduqa/hashing.hpp"
#include "vrduqa/mock.hpp"
#include "vrduqa/providers.hpp"

using namespace vrduqa;
using namespace vrduqa::providers;
using vrduqa::testing::chat_reply;
using vrduqa::testing::StubEndpoint;
using vrduqa::testing::TempDir;

namespace {

/// Local HTTP server replaying a fixed status sequence.
class ScriptedServer {
 public:
  explicit ScriptedServer(std::vector<int> statuses) : statuses_(std::move(statuses)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu_);
      const int status = hits_ < statuses_.size() ? statuses_[hits_] : 200;
      ++hits_;
      auth_ = req.get_header_value("Authorization");
      bodies_.push_back(json::parse(req.body));
      res.status = status;
      if (status == 200) res.set_content(chat_reply("OK").body, "application/json");
      else res.set_content("{\"error\":\"scripted\"}", "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~ScriptedServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
  std::size_t hits() const {
    std::lock_guard lock(mu_);
    return hits_;
  }
  std::string auth() const {
    std::lock_guard lock(mu_);
    return auth_;
  }
  json last_body() const {
    std::lock_guard lock(mu_);
    return bodies_.back();
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::vector<int> statuses_;
  mutable std::mutex mu_;
  std::size_t hits_ = 0;
  std::string auth_;
  std::vector<json> bodies_;
};

ProviderConfig http_config(const std::string& url, int retries) {
  ProviderConfig c = vrduqa::testing::chat_config("http");
  c.endpoint = url;
  c.max_retries = retries;
  c.timeout_s = 5;
  return c;
}

ProviderConfig ner_config(const std::string& name) {
  ProviderConfig c;
  c.name = name;
  c.type = ProviderType::Ner;
  c.endpoint = "http://stub.invalid/ner";
  c.max_retries = 0;
  return c;
}

}  // namespace

TEST_SUITE("providers") {
  TEST_CASE("stub echo passes text through") {
    auto ep = std::make_shared<StubEndpoint>([](const json&) { return chat_reply("OK"); });
    auto chat = vrduqa::testing::stub_chat("echo", ep);
    const auto r = chat->complete({"", "ping", {}, 0});
    CHECK(r.text == "OK");
    CHECK(r.provider == "echo");
    CHECK_FALSE(r.cached);
    CHECK(r.attempts == 1);
  }

  TEST_CASE("identical requests are served from the cache") {
    TempDir tmp;
    auto ep = std::make_shared<StubEndpoint>([](const json& b) { return chat_reply("n=" + vrduqa::testing::request_text(b)); });
    auto chat = vrduqa::testing::stub_chat("cached", ep, tmp / "cache");
    const auto first = chat->complete({"", "hello", {}, 0});
    const auto second = chat->complete({"", "hello", {}, 0});
    CHECK(ep->calls() == 1);
    CHECK(second.cached);
    CHECK(second.text == first.text);
    CHECK(second.latency_s == first.latency_s);
    CHECK(second.created_at == first.created_at);
    CHECK(second.cache_key == first.cache_key);
    CHECK(fs::exists(tmp / "cache" / first.cache_key.substr(0, 2) / (first.cache_key + ".json")));

    // A salted re-ask and a different text miss.
    chat->complete({"", "hello", {}, 1});
    chat->complete({"", "hello!", {}, 0});
    CHECK(ep->calls() == 3);

    // A second client over the same directory sees the entries.
    auto ep2 = std::make_shared<StubEndpoint>([](const json&) { return chat_reply("other"); });
    auto chat2 = vrduqa::testing::stub_chat("cached", ep2, tmp / "cache");
    CHECK(chat2->complete({"", "hello", {}, 0}).text == first.text);
    CHECK(ep2->calls() == 0);
  }

  TEST_CASE("cache key depends on provider, model and images") {
    auto ep = std::make_shared<StubEndpoint>([](const json&) { return chat_reply("x"); });
    auto a = vrduqa::testing::stub_chat("a", ep);
    auto b = vrduqa::testing::stub_chat("b", ep);
    ChatRequest req{"", "same", {}, 0};
    CHECK(a->cache_key(req) != b->cache_key(req));
    ChatRequest with_image = req;
    with_image.images.push_back({"\x89PNG", "image/png"});
    CHECK(a->cache_key(req) != a->cache_key(with_image));
    CHECK(a->cache_key(req) == a->cache_key(ChatRequest{"", "same", {}, 0}));
  }

  TEST_CASE("500, 500, 200 over HTTP succeeds on the third attempt") {
    ScriptedServer server({500, 500, 200});
    auto clock = std::make_shared<ManualClock>();
    auto client = std::make_shared<ProviderClient>(http_config(server.url(), 3), std::make_shared<HttpEndpoint>(server.url()),
                                                   ResponseCache{}, clock, 1);
    ChatClient chat(client);
    const auto r = chat.complete({"", "retry me", {}, 0});
    CHECK(r.text == "OK");
    CHECK(r.attempts == 3);
    CHECK(server.hits() == 3);
    const auto attempts = client->last_attempts();
    REQUIRE(attempts.size() == 3);
    CHECK(attempts[0].status == 500);
    CHECK(attempts[1].status == 500);
    CHECK(attempts[2].status == 200);
    // Backoff: attempt k waits within [base*2^k / 2, base*2^k].
    CHECK(attempts[1].delay_before_s >= 0.5);
    CHECK(attempts[1].delay_before_s <= 1.0);
    CHECK(attempts[2].delay_before_s >= 1.0);
    CHECK(attempts[2].delay_before_s <= 2.0);
    CHECK(clock->now() >= attempts[1].delay_before_s + attempts[2].delay_before_s);
  }

  TEST_CASE("wire request carries model and max_tokens but no temperature") {
    ScriptedServer server({});
    auto client = std::make_shared<ProviderClient>(http_config(server.url(), 0), std::make_shared<HttpEndpoint>(server.url()),
                                                   ResponseCache{}, std::make_shared<ManualClock>());
    ChatClient chat(client);
    chat.complete({"sys", "question", {{"abc", "image/png"}}, 7});
    const json body = server.last_body();
    CHECK(body["model"] == "http-model");
    CHECK(body["max_tokens"] == 1024);
    CHECK_FALSE(body.contains("temperature"));
    CHECK(body.dump().find("\"salt\"") == std::string::npos);
    REQUIRE(body["messages"].size() == 2);
    CHECK(body["messages"][0]["role"] == "system");
    const auto url = body["messages"][1]["content"][1]["image_url"]["url"].get<std::string>();
    CHECK(url == "data:image/png;base64," + base64_encode("abc"));
  }

  TEST_CASE("exhausted retries raise ProviderError with the request hash") {
    ScriptedServer server({503, 503, 503});
    auto client = std::make_shared<ProviderClient>(http_config(server.url(), 2), std::make_shared<HttpEndpoint>(server.url()),
                                                   ResponseCache{}, std::make_shared<ManualClock>());
    ChatClient chat(client);
    const ChatRequest req{"", "fails", {}, 0};
    try {
      chat.complete(req);
      FAIL("expected ProviderError");
    } catch (const ProviderConfigError&) {
      FAIL("5xx must not be a config error");
    } catch (const ProviderError& e) {
      CHECK(e.request_hash() == chat.cache_key(req));
      CHECK(e.status() == 503);
    }
    CHECK(server.hits() == 3);
  }

  TEST_CASE("4xx fails fast, 429 is retried") {
    {
      ScriptedServer server({401});
      auto client = std::make_shared<ProviderClient>(http_config(server.url(), 3), std::make_shared<HttpEndpoint>(server.url()),
                                                     ResponseCache{}, std::make_shared<ManualClock>());
      ChatClient chat(client);
      CHECK_THROWS_AS(chat.complete({"", "x", {}, 0}), ProviderConfigError);
      CHECK(server.hits() == 1);
    }
    {
      ScriptedServer server({429, 200});
      auto client = std::make_shared<ProviderClient>(http_config(server.url(), 3), std::make_shared<HttpEndpoint>(server.url()),
                                                     ResponseCache{}, std::make_shared<ManualClock>());
      ChatClient chat(client);
      CHECK(chat.complete({"", "x", {}, 0}).attempts == 2);
    }
  }

  TEST_CASE("connection failures are retried then reported") {
    auto client = std::make_shared<ProviderClient>(http_config("http://127.0.0.1:9/v1", 1),
                                                   std::make_shared<HttpEndpoint>("http://127.0.0.1:9/v1"), ResponseCache{},
                                                   std::make_shared<ManualClock>());
    ChatClient chat(client);
    CHECK_THROWS_AS(chat.complete({"", "x", {}, 0}), ProviderError);
    CHECK(client->network_calls() == 2);
  }

  TEST_CASE("api key comes from the environment") {
    ScriptedServer server({});
    auto cfg = http_config(server.url(), 0);
    cfg.api_key_env = "VRDUQA_TEST_KEY";
    ::unsetenv("VRDUQA_TEST_KEY");
    {
      ChatClient chat(std::make_shared<ProviderClient>(cfg, std::make_shared<HttpEndpoint>(server.url()), ResponseCache{},
                                                       std::make_shared<ManualClock>()));
      CHECK_THROWS_AS(chat.complete({"", "x", {}, 0}), ConfigError);
    }
    ::setenv("VRDUQA_TEST_KEY", "sekret", 1);
    ChatClient chat(std::make_shared<ProviderClient>(cfg, std::make_shared<HttpEndpoint>(server.url()), ResponseCache{},
                                                     std::make_shared<ManualClock>()));
    chat.complete({"", "x", {}, 0});
    CHECK(server.auth() == "Bearer sekret");
    ::unsetenv("VRDUQA_TEST_KEY");
  }

  TEST_CASE("rate limiter admits at most rpm requests per 60 s window") {
    ManualClock clock;
    RateLimiter limiter(3, clock);
    std::vector<double> stamps;
    for (int i = 0; i < 10; ++i) {
      limiter.acquire();
      stamps.push_back(clock.now());
      clock.advance(1.0);
    }
    for (std::size_t i = 3; i < stamps.size(); ++i) CHECK(stamps[i] - stamps[i - 3] >= 60.0);
    CHECK(stamps[2] == 2.0);
  }

  TEST_CASE("client honours requests_per_minute") {
    auto ep = std::make_shared<StubEndpoint>([](const json&) { return chat_reply("ok"); });
    auto cfg = vrduqa::testing::chat_config("limited");
    cfg.requests_per_minute = 2;
    auto clock = std::make_shared<ManualClock>();
    ChatClient chat(std::make_shared<ProviderClient>(cfg, ep, ResponseCache{}, clock));
    for (int i = 0; i < 5; ++i) chat.complete({"", "q" + std::to_string(i), {}, 0});
    CHECK(clock->now() >= 120.0);
    CHECK(clock->now() < 180.0);
  }

  TEST_CASE("backoff stays within its jitter band and cap") {
    BackoffPolicy p{1.0, 8.0};
    Rng rng(1);
    for (int attempt = 0; attempt < 10; ++attempt)
      for (int k = 0; k < 20; ++k) {
        const double nominal = std::min(8.0, std::ldexp(1.0, attempt));
        const double d = p.delay(attempt, rng);
        REQUIRE(d >= nominal / 2);
        REQUIRE(d <= nominal);
      }
  }

  TEST_CASE("empty user text is a configuration error") {
    auto ep = std::make_shared<StubEndpoint>([](const json&) { return chat_reply("x"); });
    CHECK_THROWS_AS(vrduqa::testing::stub_chat("c", ep)->complete({"", "", {}, 0}), ConfigError);
    CHECK(ep->calls() == 0);
  }

  TEST_CASE("chat responses without content are provider errors") {
    CHECK_THROWS_AS(parse_chat_response("{}", "h"), ProviderError);
    CHECK_THROWS_AS(parse_chat_response("not json", "h"), ProviderError);
    CHECK(parse_chat_response(chat_reply("fine").body, "h") == "fine");
  }

  TEST_CASE("NER spans are thresholded per label") {
    auto ep = std::make_shared<StubEndpoint>([](const json& body) {
      CHECK(body["labels"][0]["name"] == "year_numerical_value");
      json ents = json::array();
      ents.push_back({{"label", "year_numerical_value"}, {"text", "2011"}, {"start", 12}, {"end", 16}, {"score", 0.9}});
      ents.push_back({{"label", "year_numerical_value"}, {"text", "2009"}, {"start", 3}, {"end", 7}, {"score", 0.9}});
      return HttpReply{200, json{{"entities", ents}}.dump(), {}};
    });
    NerClient ner(std::make_shared<ProviderClient>(
        ner_config("ner"), ep));
    const auto spans = ner.extract_entities({"in 2009 and 2011", {{"year_numerical_value", 0.7}}});
    REQUIRE(spans.size() == 2);
    CHECK(spans[0] == NerSpan{"year_numerical_value", "2009", 3, 7, 0.9});
    CHECK(spans[1] == NerSpan{"year_numerical_value", "2011", 12, 16, 0.9});
  }

  TEST_CASE("NER drops spans under the default threshold and skips empty text") {
    auto ep = std::make_shared<StubEndpoint>([](const json&) {
      json ents = json::array({{{"label", "city"}, {"text", "Boston"}, {"start", 0}, {"end", 6}, {"score", 0.74}}});
      return HttpReply{200, json{{"entities", ents}}.dump(), {}};
    });
    auto ner = vrduqa::testing::stub_ner(ep);
    CHECK(ner->extract_entities({"Boston", {{"city", 0.75}}}).empty());
    CHECK(ner->extract_entities({"", {{"city", 0.75}}}).empty());
    CHECK(ep->calls() == 1);
    CHECK_THROWS_AS(ner->extract_entities({"Boston", {}}), ConfigError);
  }

  TEST_CASE("span resolution handles code-point offsets") {
    const std::string text = "Caf\xC3\xA9 in Paris";  // "Café in Paris"
    auto byte = resolve_span(text, "Paris", 9, 14);
    REQUIRE(byte);
    CHECK(*byte == std::pair<std::size_t, std::size_t>{9, 14});
    auto cp = resolve_span(text, "Paris", 8, 13);
    REQUIRE(cp);
    CHECK(text.substr(cp->first, cp->second - cp->first) == "Paris");
    CHECK_FALSE(resolve_span(text, "London", 0, 6));
  }

  TEST_CASE("provider config parsing") {
    const json ok{{"name", "m"}, {"type", "openai"}, {"endpoint", "http://h/v1"}, {"model", "x"}, {"timeout", 30}};
    const auto c = ok.get<ProviderConfig>();
    CHECK(c.timeout_s == 30);
    CHECK(c.type == ProviderType::OpenAiChat);
    json bad = ok;
    bad["temperature"] = 0.2;
    CHECK_THROWS_AS(bad.get<ProviderConfig>(), ConfigError);
    bad = ok;
    bad["max_concurrency"] = 0;
    CHECK_THROWS_AS(bad.get<ProviderConfig>(), ConfigError);
  }

  TEST_CASE("mock endpoint rules") {
    const json script = json::parse(R"js({"providers": {
      "m": {"rules": [
        {"contains": "fail", "status": 500, "times": 1},
        {"contains": "fail", "response": "recovered"},
        {"regex": "name: (\\w+)", "response": "hello $1"},
        {"contains": "pick", "choices": ["a", "b", "c"]},
        {"contains": "coin", "bernoulli": {"rate": 0.5, "yes": ["heads"], "no": ["tails"]}}
      ]},
      "n": {"lexicon": [{"label": "city", "pattern": "Boston|Denver", "score": 0.9}]}
    }})js");
    const auto parsed = mock::MockScript::parse(script);
    auto ep = std::make_shared<mock::MockEndpoint>("m", ProviderType::OpenAiChat, parsed.providers.at("m"));
    auto chat = std::make_shared<ChatClient>(std::make_shared<ProviderClient>(
        vrduqa::testing::chat_config("m"), ep, ResponseCache{}, std::make_shared<ManualClock>()));
    CHECK(chat->complete({"", "name: Ada", {}, 0}).text == "hello Ada");
    const auto p1 = chat->complete({"", "pick one", {}, 0}).text;
    CHECK((p1 == "a" || p1 == "b" || p1 == "c"));
    CHECK(chat->complete({"", "pick one", {}, 1}).text.size() == 1);
    const auto recovered = chat->complete({"", "fail once", {}, 0});
    CHECK(recovered.attempts == 2);
    CHECK(recovered.text == "recovered");
    CHECK_THROWS_AS(chat->complete({"", "nothing matches", {}, 0}), ProviderConfigError);
    int heads = 0;
    for (int i = 0; i < 200; ++i) heads += chat->complete({"", "coin " + std::to_string(i), {}, 0}).text == "heads";
    CHECK(heads > 70);
    CHECK(heads < 130);

    auto nep = std::make_shared<mock::MockEndpoint>("n", ProviderType::Ner, parsed.providers.at("n"));
    NerClient real(std::make_shared<ProviderClient>(
        ner_config("n"), nep));
    const auto spans = real.extract_entities({"From Boston to Denver", {{"city", 0.75}}});
    REQUIRE(spans.size() == 2);
    CHECK(spans[1].surface == "Denver");
    CHECK(spans[1].start == 15);
  }

  TEST_CASE("mock script validation") {
    CHECK_THROWS(mock::MockScript::parse(json::parse(R"({"providers": {"m": {"rules": [{"response": "a", "choices": ["b"]}]}}})")));
    CHECK_THROWS(mock::MockScript::parse(json::parse(R"({"providers": {"m": {"rules": [{"unknown": 1}]}}})")));
  }
}
