#ifdef VRDUQA_HAVE_FIXTURE

#include <doctest.h>
#include <httplib.h>

#include <thread>

#include "pipeline_fixture.hpp"
#include "vrduqa/corruption.hpp"
#include "vrduqa/error.hpp"
#include "vrduqa/io.hpp"
#include "vrduqa/service/review_server.hpp"

using namespace vrduqa;
using vrduqa::testing::PipelineRun;

namespace {

struct LiveServer {
  service::ReviewServer server;
  int port = 0;
  std::thread thread;

  explicit LiveServer(const service::Workspace& ws, fs::path static_dir = {}) : server(ws, std::move(static_dir)) {
    port = server.bind("127.0.0.1", 0);
    thread = std::thread([this] { server.listen(); });
  }
  ~LiveServer() {
    server.stop();
    thread.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_connection_timeout(5);
    return c;
  }
};

json post_body(const std::string& decision, const std::string& reviewer) {
  return {{"decision", decision}, {"reviewer", reviewer}};
}

}  // namespace

TEST_SUITE("review_server") {
  TEST_CASE("requires a verified workspace") {
    PipelineRun run;
    CHECK_THROWS_AS(service::ReviewServer(run.ws), MissingArtifact);
  }

  TEST_CASE("queue, images and decisions over HTTP") {
    PipelineRun run;
    run.through_verify();
    const auto items = corrupt::load_corrupted(run.ws.verified() / "unanswerable.jsonl");
    REQUIRE(items.size() >= 2);
    LiveServer live(run.ws);
    auto cli = live.client();

    auto res = cli.Get("/api/review/queue");
    REQUIRE(res);
    CHECK(res->status == 200);
    auto queue = json::parse(res->body);
    REQUIRE(queue.size() == items.size());
    CHECK(queue[0]["question_id"] == items[0].id);
    CHECK(queue[0]["refined_text"] == items[0].refined_text);
    CHECK(queue[0]["replacements"].size() == items[0].replacements.size());
    const std::string page_url = queue[0]["pages"][0];

    res = cli.Get(page_url);
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->get_header_value("Content-Type") == "image/png");
    CHECK(res->body.substr(1, 3) == "PNG");
    res = cli.Get("/api/documents/" + items[0].document_id + "/pages/99/image");
    REQUIRE(res);
    CHECK(res->status == 404);
    res = cli.Get("/api/documents/nope/pages/1/image");
    REQUIRE(res);
    CHECK(res->status == 404);

    const std::string first = items[0].id;
    res = cli.Post("/api/review/" + first, post_body("reject", "ana").dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 204);
    res = cli.Post("/api/review/" + first, "{not json", "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
    res = cli.Post("/api/review/" + first, post_body("maybe", "ana").dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
    res = cli.Post("/api/review/" + first, json{{"decision", "accept"}}.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
    res = cli.Post("/api/review/unknown-q", post_body("accept", "ana").dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 404);

    // Decided items leave that reviewer's queue only.
    res = cli.Get("/api/review/queue?reviewer=ana");
    REQUIRE(res);
    CHECK(json::parse(res->body).size() == items.size() - 1);
    res = cli.Get("/api/review/queue?reviewer=bo");
    REQUIRE(res);
    CHECK(json::parse(res->body).size() == items.size());

    // A second submission from the same reviewer supersedes the first.
    const std::string second = items[1].id;
    REQUIRE(cli.Post("/api/review/" + second, post_body("reject", "ana").dump(), "application/json")->status == 204);
    REQUIRE(cli.Post("/api/review/" + second, post_body("accept", "ana").dump(), "application/json")->status == 204);
    CHECK(verify::load_decisions(run.ws.decisions()).size() == 3);

    const auto r = service::run_export(run.cfg, PipelineRun::mock());
    const auto exported = corrupt::load_corrupted(run.ws.verified() / "exported.jsonl");
    CHECK(exported.size() == items.size() - 1);
    for (const auto& q : exported) CHECK(q.id != first);
    CHECK(r.manifest["counts"]["rejected"] == 1);
  }

  TEST_CASE("static assets are served beside the API") {
    PipelineRun run;
    run.through_verify();
    vrduqa::testing::TempDir assets;
    write_file_atomic(assets / "index.html", "<html>review</html>");
    LiveServer live(run.ws, assets.path());
    auto cli = live.client();
    auto res = cli.Get("/index.html");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->body == "<html>review</html>");
    res = cli.Get("/missing.js");
    REQUIRE(res);
    CHECK(res->status == 404);
    CHECK_THROWS_AS(service::ReviewServer(run.ws, assets / "nope"), ConfigError);
  }

  TEST_CASE("record validates without HTTP") {
    PipelineRun run;
    run.through_verify();
    service::ReviewServer server(run.ws);
    const auto items = corrupt::load_corrupted(run.ws.verified() / "unanswerable.jsonl");
    REQUIRE_FALSE(items.empty());
    CHECK_THROWS_AS(server.record("unknown", post_body("accept", "x")), StateError);
    CHECK_THROWS_AS(server.record(items[0].id, json::array()), ConfigError);
    CHECK_THROWS_AS(server.record(items[0].id, post_body("accept", "")), ConfigError);
    auto body = post_body("accept", "x");
    body["note"] = "looks right";
    const auto d = server.record(items[0].id, body);
    CHECK(d.note == std::optional<std::string>("looks right"));
    CHECK(d.decision == verify::Decision::Accept);
    CHECK(verify::load_decisions(run.ws.decisions()).front() == d);
  }
}

#endif
