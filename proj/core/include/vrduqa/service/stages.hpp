#pragma once

// Pipeline stages over an on-disk workspace:
//
//   dataset/      documents/<id>.json, documents/images/, questions.jsonl
//   augmented/    documents/<id>.json + <id>.manifest.json, partial/<id>.jsonl
//   pools/        <id>.jsonl, questions.jsonl
//   corrupted/    corrupted.jsonl
//   verified/     verdicts.jsonl, outcomes.jsonl, unanswerable.jsonl, exported.jsonl
//   review/       decisions.jsonl
//   results/      results.jsonl, failures.jsonl, run.json
//   report/       report.csv, report.json, plotdata.json
//
// Each stage directory holds a manifest.json recording the config hash and the
// content digest of the stage's inputs.

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vrduqa/extraction.hpp"
#include "vrduqa/layout.hpp"
#include "vrduqa/metrics.hpp"
#include "vrduqa/service/config.hpp"

namespace vrduqa::service {

struct Workspace {
  fs::path root;

  fs::path dataset() const { return root / "dataset"; }
  fs::path documents() const { return dataset() / "documents"; }
  fs::path questions() const { return dataset() / "questions.jsonl"; }
  fs::path augmented() const { return root / "augmented"; }
  fs::path augmented_doc(const std::string& id) const { return augmented() / "documents" / (id + ".json"); }
  fs::path pools() const { return root / "pools"; }
  fs::path corrupted() const { return root / "corrupted"; }
  fs::path verified() const { return root / "verified"; }
  fs::path decisions() const { return root / "review" / "decisions.jsonl"; }
  fs::path results() const { return root / "results"; }
  fs::path report() const { return root / "report"; }
};

enum class ProviderMode { Live, Mock };

/// Builds one client per configured provider, backed by HTTP or by the mock
/// script, sharing the response cache.
class ProviderRegistry {
 public:
  ProviderRegistry(const PipelineConfig& cfg, ProviderMode mode);

  std::shared_ptr<providers::ChatClient> chat(const std::string& name);
  std::shared_ptr<providers::NerClient> ner(const std::string& name);
  std::shared_ptr<providers::ProviderClient> transport(const std::string& name);
  /// Provider descriptions for run manifests.
  json describe() const;

 private:
  const PipelineConfig& cfg_;
  ProviderMode mode_;
  std::optional<json> mock_script_;
  std::map<std::string, std::shared_ptr<providers::ProviderClient>> clients_;
  std::mutex mu_;
};

struct StageOptions {
  ProviderMode mode = ProviderMode::Live;
  bool resume = false;
  /// Stop after this many provider-backed units (elements, questions, cells).
  std::optional<std::size_t> limit;
  std::vector<std::string> models;  // overrides config when non-empty
  std::vector<std::string> variants;
  std::vector<int> window_sizes;
  std::vector<std::string> groups;  // report dimensions
  std::string dataset_filter;       // report: restrict to one source dataset
};

struct StageResult {
  bool ok = true;
  std::string message;
  json manifest;
};

StageResult run_import(const PipelineConfig& cfg, const StageOptions& opts);
StageResult run_augment(const PipelineConfig& cfg, const StageOptions& opts);
StageResult run_corrupt(const PipelineConfig& cfg, const StageOptions& opts);
StageResult run_verify(const PipelineConfig& cfg, const StageOptions& opts);
StageResult run_export(const PipelineConfig& cfg, const StageOptions& opts);
StageResult run_evaluate(const PipelineConfig& cfg, const StageOptions& opts);
StageResult run_report(const PipelineConfig& cfg, const StageOptions& opts);

/// Loads every document JSON in `dir`, keyed by id.
std::map<std::string, Document> load_documents(const fs::path& dir);

/// sha256 over the sorted (relative path, file sha256) list of regular files
/// under `dir` whose name ends with `suffix`.
std::string directory_digest(const fs::path& dir, const std::string& suffix = "");

}  // namespace vrduqa::service
