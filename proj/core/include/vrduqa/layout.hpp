#pragma once

// Layout detection sources. Raw detections come either from a detector
// service or from precomputed import files; duplicates are removed downstream
// with dedup_elements.

#include <map>
#include <memory>
#include <vector>

#include "vrduqa/document.hpp"
#include "vrduqa/providers.hpp"

namespace vrduqa::layout {

inline constexpr double kDetectorConfidence = 0.1;

class LayoutSource {
 public:
  virtual ~LayoutSource() = default;
  /// Raw detections with confidence >= the source's threshold.
  virtual std::vector<DocumentElement> detect(const Document& doc, const Page& page,
                                              const fs::path& image_path) = 0;
};

/// Reads JSON-lines detections {page, class, bbox, confidence}. `path` is
/// either a directory holding <document id>.jsonl files or a single file whose
/// lines carry an extra "document" field.
class ImportLayoutSource final : public LayoutSource {
 public:
  explicit ImportLayoutSource(fs::path path, double min_confidence = kDetectorConfidence);
  std::vector<DocumentElement> detect(const Document& doc, const Page& page,
                                      const fs::path& image_path) override;

 private:
  const std::vector<json>& rows_for(const std::string& doc_id);

  fs::path path_;
  double min_confidence_;
  std::map<std::string, std::vector<json>> rows_;
};

/// Detector service: POST {image, mime, confidence_threshold}
///                   -> {detections:[{class, bbox, confidence}]}
class HttpLayoutSource final : public LayoutSource {
 public:
  HttpLayoutSource(std::shared_ptr<providers::ProviderClient> client,
                   double min_confidence = kDetectorConfidence);
  std::vector<DocumentElement> detect(const Document& doc, const Page& page,
                                      const fs::path& image_path) override;

 private:
  std::shared_ptr<providers::ProviderClient> client_;
  double min_confidence_;
};

/// Converts one detection record into an element; the id is "raw-<ordinal>".
DocumentElement detection_to_element(const json& row, std::size_t ordinal);

}  // namespace vrduqa::layout
