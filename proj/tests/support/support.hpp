#pragma once

// Shared test scaffolding: temp directories, a programmable provider endpoint,
// hand-rolled generators and the naive oracles used by unit and acceptance
// tests.

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "vrduqa/corruption.hpp"
#include "vrduqa/document.hpp"
#include "vrduqa/evaluation.hpp"
#include "vrduqa/io.hpp"
#include "vrduqa/metrics.hpp"
#include "vrduqa/providers.hpp"
#include "vrduqa/rng.hpp"

namespace vrduqa::testing {

fs::path source_dir();
fs::path fixture_json();
fs::path golden(const std::string& name);

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

/// Endpoint answering through a callback; counts calls.
class StubEndpoint final : public providers::Endpoint {
 public:
  using Handler = std::function<providers::HttpReply(const json& body)>;
  explicit StubEndpoint(Handler handler) : handler_(std::move(handler)) {}
  providers::HttpReply post(const json& body, const std::map<std::string, std::string>&, double) override {
    ++calls_;
    std::lock_guard lock(mu_);
    bodies_.push_back(body);
    return handler_(body);
  }
  std::size_t calls() const { return calls_; }
  std::vector<json> bodies() const {
    std::lock_guard lock(mu_);
    return bodies_;
  }

 private:
  Handler handler_;
  std::atomic<std::size_t> calls_{0};
  mutable std::mutex mu_;
  std::vector<json> bodies_;
};

/// 200 reply in chat-completions shape.
providers::HttpReply chat_reply(const std::string& text);
/// Concatenated text parts of every message in a chat request body.
std::string request_text(const json& body);
/// Decoded bytes of the image parts of a chat request body.
std::vector<std::string> request_images(const json& body);

providers::ProviderConfig chat_config(const std::string& name);
/// Chat client over a stub; no cache unless `cache_dir` is given.
std::shared_ptr<providers::ChatClient> stub_chat(const std::string& name, std::shared_ptr<StubEndpoint> endpoint,
                                                 const fs::path& cache_dir = {});
std::shared_ptr<providers::NerClient> stub_ner(std::shared_ptr<StubEndpoint> endpoint);
/// NER client over the mock lexicon endpoint; `lexicon` is a list of
/// {label, pattern, score, icase}.
std::shared_ptr<providers::NerClient> lexicon_ner(const json& lexicon);

/// White PNG page with one filled rectangle per box; boxes with text carry it
/// in the embedded channel the mock OCR reads back.
void write_page_png(const fs::path& path, int width, int height,
                    const std::vector<std::pair<BoundingBox, std::string>>& boxes);

// ---------------------------------------------------------------------------
// Oracles

/// IoU by counting unit cells covered by each box (integer coordinates).
double raster_iou(const BoundingBox& a, const BoundingBox& b);
/// Keep-list by brute force: an element is dropped iff some element that is
/// larger (or equal and earlier) and itself kept overlaps it above threshold.
std::vector<std::size_t> naive_dedup(const std::vector<BoundingBox>& boxes, double threshold);
Quadrant naive_quadrant(const BoundingBox& b, int width, int height);

struct NaiveScores {
  double acc_d = 0;
  double acc_p = 0;
  std::size_t questions = 0;
};
/// Quadratic rescan: for every distinct question id (ascending), count its
/// records and correct records by walking the whole list.
NaiveScores naive_scores(const std::vector<const eval::EvaluationRecord*>& records);

// ---------------------------------------------------------------------------
// Generators

BoundingBox random_box(Rng& rng, int width, int height, int min_side = 1);

struct MetricFixture {
  std::map<std::string, Document> documents;
  std::vector<corrupt::CorruptedQuestion> questions;
  std::vector<eval::EvaluationRecord> records;
};
/// Random documents, corrupted questions with provenance and evaluation
/// records: <= max_questions questions, <= max_windows windows per question.
MetricFixture random_metric_fixture(std::uint64_t seed, std::size_t max_questions = 50, std::size_t max_windows = 10);

/// Group labels of a record recomputed from first principles.
std::vector<std::string> naive_labels(const eval::EvaluationRecord& r, metrics::Dimension d, const MetricFixture& fx,
                                      const std::set<ElementClass>& counted = {ElementClass::Figure, ElementClass::Table});

}  // namespace vrduqa::testing
