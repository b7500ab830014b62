#if defined(VRDUQA_HAVE_FIXTURE) && defined(VRDUQA_CLI)

#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>

#include <fmt/format.h>

#include "pipeline_fixture.hpp"
#include "vrduqa/corruption.hpp"
#include "vrduqa/evaluation.hpp"
#include "vrduqa/io.hpp"

using namespace vrduqa;
using vrduqa::testing::PipelineRun;

namespace {

struct Invocation {
  int code = -1;
  std::string output;
};

Invocation vrduqa_cli(const PipelineRun& run, const std::string& args, fs::path config = {}) {
  const fs::path log = run.tmp / "cli.log";
  if (config.empty()) config = run.tmp / "config.json";
  const auto cmd = fmt::format("'{}' -c '{}' {} > '{}' 2>&1", VRDUQA_CLI, config.string(), args, log.string());
  const int status = std::system(cmd.c_str());
  Invocation inv;
  inv.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  inv.output = read_file(log);
  return inv;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("exit codes") {
    PipelineRun run;
    auto inv = vrduqa_cli(run, "corrupt --providers mock");
    CHECK(inv.code == 1);
    CHECK(inv.output.find("run import first") != std::string::npos);

    REQUIRE(vrduqa_cli(run, "import").code == 0);
    inv = vrduqa_cli(run, "corrupt --providers mock");
    CHECK(inv.code == 1);
    CHECK(inv.output.find("run augment first") != std::string::npos);

    CHECK(vrduqa_cli(run, "augment --providers bogus").code == 2);
    write_file_atomic(run.tmp / "bad.json", R"({"workspace": "w", "surprise": 1})");
    inv = vrduqa_cli(run, "import", run.tmp / "bad.json");
    CHECK(inv.code == 2);
    CHECK(inv.output.find("surprise") != std::string::npos);

    // Interrupted stage: nonzero, then resumable.
    CHECK(vrduqa_cli(run, "augment --providers mock --limit 2").code == 1);
    CHECK(vrduqa_cli(run, "augment --providers mock --resume").code == 0);
  }

  TEST_CASE("import --sample is seeded and stable") {
    PipelineRun run;
    REQUIRE(vrduqa_cli(run, "import --sample 5").code == 0);
    const auto first = read_file(run.ws.questions());
    CHECK(read_jsonl(run.ws.questions()).size() == 5);
    CHECK(read_json_file(run.ws.dataset() / "manifest.json")["config_hash"] != run.cfg.hash);
    REQUIRE(vrduqa_cli(run, "import --sample 5").code == 0);
    CHECK(read_file(run.ws.questions()) == first);
    REQUIRE(vrduqa_cli(run, "import").code == 0);
    CHECK(read_jsonl(run.ws.questions()).size() == 12);
  }

  TEST_CASE("report --group complexity matches the metric oracle") {
    PipelineRun run;
    for (const char* step : {"import", "augment --providers mock", "corrupt --providers mock",
                             "verify --providers mock", "evaluate --providers mock", "report --group complexity"}) {
      const auto inv = vrduqa_cli(run, step);
      INFO(step << "\n" << inv.output);
      REQUIRE(inv.code == 0);
    }
    std::map<std::string, int> complexity;
    for (const auto& q : corrupt::load_corrupted(run.ws.verified() / "exported.jsonl")) complexity[q.id] = q.complexity;
    const auto records = eval::load_records(run.ws.results() / "results.jsonl");
    const auto report = metrics::parse_report_csv(read_file(run.ws.report() / "report.csv"));
    REQUIRE_FALSE(report.cells.empty());
    std::set<std::string> labels;
    for (const auto& cell : report.cells) {
      CHECK(cell.group.dimension == metrics::Dimension::Complexity);
      labels.insert(cell.group.value);
      std::vector<const eval::EvaluationRecord*> slice;
      for (const auto& r : records)
        if (r.model == cell.model && r.variant == cell.variant && r.window_size == cell.window &&
            fmt::format("C{}", complexity.at(r.question_id)) == cell.group.value)
          slice.push_back(&r);
      const auto naive = vrduqa::testing::naive_scores(slice);
      CHECK(cell.n_records == slice.size());
      CHECK(cell.n_questions == naive.questions);
      CHECK(cell.acc_d == doctest::Approx(naive.acc_d));
      CHECK(cell.acc_p == doctest::Approx(naive.acc_p));
    }
    CHECK(labels.size() >= 2);
  }
}

#endif
