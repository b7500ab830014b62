#pragma once

// Normalized document JSON:
// {id, source_dataset, pages:[{index, width, height, image,
//   elements:[{id, class, bbox:[x0,y0,x1,y1], confidence, text}]}]}

#include "vrduqa/document.hpp"
#include "vrduqa/io.hpp"

namespace vrduqa {

void to_json(json& j, const BoundingBox& b);
void from_json(const json& j, BoundingBox& b);
void to_json(json& j, const DocumentElement& e);
void from_json(const json& j, DocumentElement& e);
void to_json(json& j, const Page& p);
void from_json(const json& j, Page& p);
void to_json(json& j, const Document& d);
void from_json(const json& j, Document& d);

/// Reads and validates a document file.
Document load_document(const fs::path& path);
void save_document(const fs::path& path, const Document& doc);

}  // namespace vrduqa
