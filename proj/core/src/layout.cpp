#include "vrduqa/layout.hpp"

#include <fmt/format.h>

#include "vrduqa/document_io.hpp"
#include "vrduqa/error.hpp"
#include "vrduqa/hashing.hpp"
#include "vrduqa/image.hpp"

namespace vrduqa::layout {

DocumentElement detection_to_element(const json& row, std::size_t ordinal) {
  DocumentElement el;
  el.id = fmt::format("raw-{}", ordinal);
  el.cls = parse_element_class(row.at("class").get<std::string>());
  el.bbox = row.at("bbox").get<BoundingBox>();
  el.confidence = row.value("confidence", 1.0);
  return el;
}

ImportLayoutSource::ImportLayoutSource(fs::path path, double min_confidence)
    : path_(std::move(path)), min_confidence_(min_confidence) {
  if (!fs::exists(path_))
    throw ConfigError(fmt::format("layout import path '{}' does not exist", path_.string()));
}

const std::vector<json>& ImportLayoutSource::rows_for(const std::string& doc_id) {
  if (auto it = rows_.find(doc_id); it != rows_.end()) return it->second;
  std::vector<json> rows;
  if (fs::is_directory(path_)) {
    const fs::path file = path_ / (doc_id + ".jsonl");
    if (fs::exists(file)) rows = read_jsonl(file);
  } else {
    for_each_jsonl(path_, [&](const json& row, std::size_t line) {
      if (!row.contains("document"))
        throw IngestionError(fmt::format("{}:{}: detection without \"document\"", path_.string(), line));
      if (row.at("document").get<std::string>() == doc_id) rows.push_back(row);
    });
  }
  return rows_.emplace(doc_id, std::move(rows)).first->second;
}

std::vector<DocumentElement> ImportLayoutSource::detect(const Document& doc, const Page& page,
                                                        const fs::path&) {
  std::vector<DocumentElement> out;
  std::size_t ordinal = 0;
  for (const auto& row : rows_for(doc.id)) {
    if (row.at("page").get<int>() != page.index) continue;
    DocumentElement el;
    try {
      el = detection_to_element(row, ordinal++);
    } catch (const json::exception& e) {
      throw IngestionError(fmt::format("layout import for '{}' page {}: {}", doc.id, page.index, e.what()));
    }
    if (el.confidence < min_confidence_) continue;
    out.push_back(std::move(el));
  }
  return out;
}

HttpLayoutSource::HttpLayoutSource(std::shared_ptr<providers::ProviderClient> client,
                                   double min_confidence)
    : client_(std::move(client)), min_confidence_(min_confidence) {}

std::vector<DocumentElement> HttpLayoutSource::detect(const Document& doc, const Page& page,
                                                      const fs::path& image_path) {
  const std::string bytes = read_file(image_path);
  const std::string mime = image_mime(image_path);
  const json material{{"image", sha256_hex(bytes)}, {"confidence_threshold", min_confidence_}};
  const auto res = client_->call(
      [&] {
        return json{{"image", base64_encode(bytes)}, {"mime", mime},
                    {"confidence_threshold", min_confidence_}};
      },
      material.dump());
  std::vector<DocumentElement> out;
  try {
    const json j = json::parse(res.body);
    std::size_t ordinal = 0;
    for (const auto& row : j.at("detections")) {
      DocumentElement el = detection_to_element(row, ordinal++);
      if (el.confidence < min_confidence_) continue;
      out.push_back(std::move(el));
    }
  } catch (const json::exception& e) {
    throw ProviderError(
        fmt::format("malformed layout response for '{}' page {}: {}", doc.id, page.index, e.what()),
        res.cache_key);
  }
  return out;
}

}  // namespace vrduqa::layout
