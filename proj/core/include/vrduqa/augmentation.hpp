#pragma once

// Layout detection, element OCR and visual-element captioning. Textual
// elements (Title, PlainText, Abandon) go to the OCR provider, Figure and
// Table crops to the captioner; formulas are kept without text.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vrduqa/document.hpp"
#include "vrduqa/layout.hpp"
#include "vrduqa/providers.hpp"

namespace vrduqa::augment {

inline constexpr std::string_view kOcrInstruction =
    "Transcribe all text visible in this image exactly as written. Return only the text.";
inline constexpr std::string_view kCaptionInstruction =
    "Describe the content of this document figure or table in detail, including any values, "
    "labels and dates it shows. Return only the description.";

struct ElementRecord {
  int page = 0;
  std::string element_id;
  ElementClass element_class = ElementClass::PlainText;
  std::string provider;
  std::string cache_key;
  std::string created_at;

  friend bool operator==(const ElementRecord&, const ElementRecord&) = default;
};

struct PageLayoutRecord {
  int page = 0;
  std::size_t detections = 0;
  std::size_t kept = 0;

  friend bool operator==(const PageLayoutRecord&, const PageLayoutRecord&) = default;
};

struct AugmentationManifest {
  std::string document_id;
  std::vector<PageLayoutRecord> layout;
  std::vector<ElementRecord> elements;

  friend bool operator==(const AugmentationManifest&, const AugmentationManifest&) = default;
};

void to_json(json& j, const AugmentationManifest& m);
void from_json(const json& j, AugmentationManifest& m);

struct AugmentedDocument {
  Document document;
  AugmentationManifest manifest;
};

struct AugmentOptions {
  double dedup_threshold = kDefaultDedupThreshold;
  int crop_margin = 2;
  std::size_t workers = 1;
  /// Stop after this many provider-backed elements (simulated interruption).
  std::optional<std::size_t> element_budget;
};

struct ElementFailure {
  int page = 0;
  std::string element_id;
  std::string error;
};

/// Text results already obtained for a document; replayed on resume so no
/// element is requested twice.
struct PartialState {
  std::map<std::pair<int, std::string>, std::pair<std::string, ElementRecord>> done;

  static PartialState load(const fs::path& path);
};

struct AugmentOutcome {
  AugmentedDocument augmented;
  std::vector<ElementFailure> failures;
  bool interrupted = false;
  std::size_t requested = 0;  // elements sent to a provider in this call

  bool complete() const { return failures.empty() && !interrupted; }
};

/// Runs detection, dedup and per-element text extraction. Elements are stored
/// in reading order with ids "p<page>-e<nnn>". Completed elements are appended
/// to `partial_path` (when given) as they finish.
AugmentOutcome augment_document(const Document& raw, const fs::path& image_root, layout::LayoutSource& layout,
                                providers::ChatClient& ocr, providers::ChatClient& captioner,
                                const AugmentOptions& options = {}, const fs::path& partial_path = {});

/// Element texts in reading order, one per line; Figure and Table captions are
/// prefixed "[FIGURE] " / "[TABLE] "; formulas and empty texts are omitted.
/// Throws StateError when an element that should carry text has none.
std::string page_ocr_text(const Page& page);

/// Text of several pages joined by newlines.
std::string window_ocr_text(const Document& doc, const std::vector<int>& pages);

/// True when every non-formula element carries text.
bool is_augmented(const Document& doc);

}  // namespace vrduqa::augment
