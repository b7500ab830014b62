#pragma once

// Model x prompt-variant x window-size evaluation over the verified set.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vrduqa/corruption.hpp"
#include "vrduqa/document.hpp"
#include "vrduqa/providers.hpp"

namespace vrduqa::eval {

inline constexpr std::string_view kUnanswerable = "unable to determine";
inline constexpr int kDefaultMaxWindow = 3;

struct PromptVariant {
  bool include_ocr = false;
  bool explicit_unanswerable = false;

  /// base, ocr, explicit, ocr_explicit
  std::string name() const;
  static PromptVariant parse(std::string_view name);
  static std::vector<PromptVariant> all();

  friend bool operator==(const PromptVariant&, const PromptVariant&) = default;
};

struct PageWindow {
  std::string document_id;
  int start_page = 1;
  std::vector<int> pages;

  friend bool operator==(const PageWindow&, const PageWindow&) = default;
};

/// Windows of `w` consecutive pages starting at 1, 1+stride, ... until a
/// window reaches the last page; the last window may be shorter. stride 0
/// means stride = w (tiling). Throws ConfigError unless 1 <= w <= max_w and
/// stride <= w.
std::vector<PageWindow> make_windows(const std::string& document_id, std::size_t page_count, int w,
                                     int stride = 0, int max_w = kDefaultMaxWindow);
std::vector<PageWindow> make_windows(const Document& doc, int w, int stride = 0, int max_w = kDefaultMaxWindow);

/// Prompt text plus the window's page images in page order.
providers::ChatRequest build_vqa_prompt(const corrupt::CorruptedQuestion& cq, const Document& doc,
                                        const PageWindow& window, const PromptVariant& variant,
                                        const fs::path& image_root);

/// Canonical refusal phrases matched by the rule pass (already normalized).
const std::vector<std::string>& refusal_phrases();

/// Lowercase, punctuation removed, whitespace collapsed and trimmed.
std::string normalize_answer(std::string_view answer);

/// Sentinel when the normalized answer equals a refusal phrase or starts with
/// one followed by a space; nullopt otherwise.
std::optional<std::string> rule_standardize(std::string_view raw_answer);

struct Standardized {
  std::string answer;
  std::string method;  // "rule", "model", "none" or "failed"
  bool unstandardized = false;
};

/// Rule pass, then the standardizer model (when given). The model's reply
/// only selects between the sentinel and the unchanged answer.
Standardized standardize(const std::string& raw_answer, providers::ChatClient* standardizer);

struct EvaluationRecord {
  std::string question_id;
  std::string document_id;
  std::string model;
  std::string variant;
  int window_size = 1;
  int window_start = 1;
  std::vector<int> window_pages;
  std::string raw_answer;
  std::string standardized_answer;
  std::string standardized_by;
  bool unstandardized = false;
  bool correct = false;
  double latency_s = 0;

  friend bool operator==(const EvaluationRecord&, const EvaluationRecord&) = default;
};

void to_json(json& j, const EvaluationRecord& r);
void from_json(const json& j, EvaluationRecord& r);

struct FailedRecord {
  std::string question_id;
  std::string model;
  std::string variant;
  int window_size = 1;
  int window_start = 1;
  std::string error;
};

void to_json(json& j, const FailedRecord& r);
void from_json(const json& j, FailedRecord& r);

/// Identity of one matrix cell.
std::string record_key(const std::string& question_id, const std::string& model, const std::string& variant,
                       int window_size, int window_start);

struct MatrixOptions {
  std::vector<PromptVariant> variants = PromptVariant::all();
  std::vector<int> window_sizes{1};
  int stride = 0;
  int max_window = kDefaultMaxWindow;
  std::size_t workers = 1;
  /// Resume from existing results/failures files in the output directory.
  bool resume = false;
  /// Stop after this many cells (simulated interruption).
  std::optional<std::size_t> cell_budget;
};

struct ModelHandle {
  std::string name;
  providers::ChatClient* client = nullptr;
};

struct MatrixSummary {
  std::size_t questions = 0;
  std::size_t models = 0;
  std::size_t variants = 0;
  std::vector<int> window_sizes;
  std::size_t window_sum = 0;  // sum over questions and window sizes of window counts
  std::size_t expected = 0;
  std::size_t records = 0;
  std::size_t failed = 0;
  std::size_t unstandardized = 0;
  bool interrupted = false;

  bool conserved() const { return records + failed == expected; }
};

json to_json(const MatrixSummary& s);

/// Runs every (question, model, variant, window). Records are appended to
/// <out_dir>/results.jsonl as they complete and failures to failures.jsonl;
/// once the matrix is complete both files are rewritten in canonical order.
MatrixSummary run_matrix(const std::vector<corrupt::CorruptedQuestion>& questions,
                         const std::map<std::string, Document>& documents, const fs::path& image_root_of_docs,
                         const std::vector<ModelHandle>& models, providers::ChatClient* standardizer,
                         const MatrixOptions& options, const fs::path& out_dir);

/// Reads results.jsonl.
std::vector<EvaluationRecord> load_records(const fs::path& path);

}  // namespace vrduqa::eval
