#include "vrduqa/document_io.hpp"

#include <fmt/format.h>

#include "vrduqa/error.hpp"

namespace vrduqa {

void to_json(json& j, const BoundingBox& b) { j = json::array({b.x0, b.y0, b.x1, b.y1}); }

void from_json(const json& j, BoundingBox& b) {
  if (!j.is_array() || j.size() != 4)
    throw IngestionError(fmt::format("bbox must be [x0,y0,x1,y1], got {}", j.dump()));
  b = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

void to_json(json& j, const DocumentElement& e) {
  j = json{{"id", e.id},
           {"class", to_string(e.cls)},
           {"bbox", e.bbox},
           {"confidence", e.confidence},
           {"text", e.text ? json(*e.text) : json(nullptr)}};
}

void from_json(const json& j, DocumentElement& e) {
  e.id = j.at("id").get<std::string>();
  e.cls = parse_element_class(j.at("class").get<std::string>());
  e.bbox = j.at("bbox").get<BoundingBox>();
  e.confidence = j.value("confidence", 1.0);
  if (auto it = j.find("text"); it != j.end() && !it->is_null())
    e.text = it->get<std::string>();
  else
    e.text.reset();
}

void to_json(json& j, const Page& p) {
  j = json{{"index", p.index},
           {"width", p.width},
           {"height", p.height},
           {"image", p.image},
           {"elements", p.elements}};
}

void from_json(const json& j, Page& p) {
  p.index = j.at("index").get<int>();
  p.width = j.value("width", 0);
  p.height = j.value("height", 0);
  p.image = j.at("image").get<std::string>();
  p.elements = j.value("elements", std::vector<DocumentElement>{});
}

void to_json(json& j, const Document& d) {
  j = json{{"id", d.id}, {"source_dataset", d.source_dataset}, {"pages", d.pages}};
}

void from_json(const json& j, Document& d) {
  d.id = j.at("id").get<std::string>();
  d.source_dataset = j.value("source_dataset", std::string{});
  d.pages = j.at("pages").get<std::vector<Page>>();
}

Document load_document(const fs::path& path) {
  const json j = read_json_file(path);
  Document doc;
  try {
    doc = j.get<Document>();
  } catch (const json::exception& e) {
    throw IngestionError(fmt::format("{}: {}", path.string(), e.what()));
  } catch (const IngestionError& e) {
    throw IngestionError(fmt::format("{}: {}", path.string(), e.what()));
  }
  validate(doc);
  return doc;
}

void save_document(const fs::path& path, const Document& doc) { write_json_file(path, doc); }

}  // namespace vrduqa
