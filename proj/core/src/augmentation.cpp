#include "vrduqa/augmentation.hpp"

#include <mutex>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "vrduqa/error.hpp"
#include "vrduqa/image.hpp"
#include "vrduqa/parallel.hpp"

namespace vrduqa::augment {

namespace {

json record_json(const ElementRecord& r) {
  return {{"page", r.page},         {"element_id", r.element_id}, {"class", to_string(r.element_class)},
          {"provider", r.provider}, {"cache_key", r.cache_key},   {"created_at", r.created_at}};
}

ElementRecord record_from(const json& j) {
  return {j.at("page").get<int>(), j.at("element_id").get<std::string>(),
          parse_element_class(j.at("class").get<std::string>()), j.at("provider").get<std::string>(),
          j.at("cache_key").get<std::string>(), j.at("created_at").get<std::string>()};
}

}  // namespace

void to_json(json& j, const AugmentationManifest& m) {
  json layout = json::array();
  for (const auto& l : m.layout) layout.push_back({{"page", l.page}, {"detections", l.detections}, {"kept", l.kept}});
  json elements = json::array();
  for (const auto& r : m.elements) elements.push_back(record_json(r));
  j = json{{"document_id", m.document_id}, {"layout", layout}, {"elements", elements}};
}

void from_json(const json& j, AugmentationManifest& m) {
  m.document_id = j.at("document_id").get<std::string>();
  m.layout.clear();
  for (const auto& l : j.at("layout"))
    m.layout.push_back({l.at("page").get<int>(), l.at("detections").get<std::size_t>(), l.at("kept").get<std::size_t>()});
  m.elements.clear();
  for (const auto& r : j.at("elements")) m.elements.push_back(record_from(r));
}

PartialState PartialState::load(const fs::path& path) {
  PartialState s;
  if (path.empty() || !fs::exists(path)) return s;
  for_each_jsonl(path, [&](const json& row, std::size_t) {
    ElementRecord rec = record_from(row.at("record"));
    std::pair key{rec.page, rec.element_id};
    s.done[std::move(key)] = {row.at("text").get<std::string>(), std::move(rec)};
  });
  return s;
}

AugmentOutcome augment_document(const Document& raw, const fs::path& image_root, layout::LayoutSource& layout,
                                providers::ChatClient& ocr, providers::ChatClient& captioner,
                                const AugmentOptions& options, const fs::path& partial_path) {
  AugmentOutcome out;
  Document& doc = out.augmented.document;
  doc = raw;
  out.augmented.manifest.document_id = raw.id;

  // Layout: detections -> dedup -> reading order -> stable ids.
  for (auto& page : doc.pages) {
    const fs::path image_path = image_root / page.image;
    auto detections = layout.detect(raw, page, image_path);
    const std::size_t n_detected = detections.size();
    page.elements = dedup_elements(detections, options.dedup_threshold);
    page.elements = reading_order(page);
    for (std::size_t i = 0; i < page.elements.size(); ++i) {
      auto& el = page.elements[i];
      el.id = fmt::format("p{}-e{:03}", page.index, i + 1);
      el.text.reset();
      if (!el.bbox.fits_within(page.width, page.height))
        throw GeometryError(fmt::format("document '{}' page {}: detection {} [{}, {}, {}, {}] outside {}x{}",
                                        doc.id, page.index, el.id, el.bbox.x0, el.bbox.y0, el.bbox.x1,
                                        el.bbox.y1, page.width, page.height));
    }
    out.augmented.manifest.layout.push_back({page.index, n_detected, page.elements.size()});
  }

  struct Job {
    std::size_t page_pos;
    std::size_t element_pos;
  };
  std::vector<Job> jobs;
  for (std::size_t p = 0; p < doc.pages.size(); ++p)
    for (std::size_t e = 0; e < doc.pages[p].elements.size(); ++e)
      if (doc.pages[p].elements[e].cls != ElementClass::IsolatedFormula) jobs.push_back({p, e});

  PartialState partial = PartialState::load(partial_path);
  std::unique_ptr<JsonlAppender> sink;
  if (!partial_path.empty()) {
    fs::create_directories(partial_path.parent_path());
    sink = std::make_unique<JsonlAppender>(partial_path, 1);
  }

  std::vector<std::optional<std::pair<std::string, ElementRecord>>> results(jobs.size());
  std::vector<std::optional<ElementFailure>> failures(jobs.size());
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const Page& page = doc.pages[jobs[i].page_pos];
    const DocumentElement& el = page.elements[jobs[i].element_pos];
    auto it = partial.done.find({page.index, el.id});
    if (it != partial.done.end() && it->second.second.element_class == el.cls)
      results[i] = it->second;
    else
      pending.push_back(i);
  }
  if (options.element_budget && pending.size() > *options.element_budget) {
    pending.resize(*options.element_budget);
    out.interrupted = true;
  }
  out.requested = pending.size();

  parallel_for(pending.size(), options.workers, [&](std::size_t k) {
    const std::size_t i = pending[k];
    const Page& page = doc.pages[jobs[i].page_pos];
    const DocumentElement& el = page.elements[jobs[i].element_pos];
    const bool visual = is_visual(el.cls);
    providers::ChatClient& client = visual ? captioner : ocr;
    try {
      const fs::path image_path = image_root / page.image;
      providers::ChatRequest req;
      req.user = std::string(visual ? kCaptionInstruction : kOcrInstruction);
      req.images.push_back({crop_png(image_path, el.bbox, options.crop_margin), "image/png"});
      const auto resp = client.complete(req);
      ElementRecord rec{page.index, el.id, el.cls, resp.provider, resp.cache_key, resp.created_at};
      if (sink) sink->append({{"text", resp.text}, {"record", record_json(rec)}});
      results[i] = std::pair{resp.text, std::move(rec)};
    } catch (const ProviderError& e) {
      spdlog::error("augment: document '{}' page {} element '{}' failed: {}", doc.id, page.index, el.id, e.what());
      failures[i] = ElementFailure{page.index, el.id, e.what()};
    }
  });

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (failures[i]) out.failures.push_back(*failures[i]);
    if (!results[i]) continue;
    auto& el = doc.pages[jobs[i].page_pos].elements[jobs[i].element_pos];
    el.text = results[i]->first;
    out.augmented.manifest.elements.push_back(results[i]->second);
  }
  return out;
}

std::string page_ocr_text(const Page& page) {
  std::string out;
  for (const auto& el : reading_order(page)) {
    if (el.cls == ElementClass::IsolatedFormula) continue;
    if (!el.text)
      throw StateError(fmt::format("page {} element '{}' has no text; run augment first", page.index, el.id));
    if (el.text->empty()) continue;
    if (!out.empty()) out += '\n';
    if (el.cls == ElementClass::Figure) out += "[FIGURE] ";
    if (el.cls == ElementClass::Table) out += "[TABLE] ";
    out += *el.text;
  }
  return out;
}

std::string window_ocr_text(const Document& doc, const std::vector<int>& pages) {
  std::string out;
  for (std::size_t i = 0; i < pages.size(); ++i) {
    if (i) out += '\n';
    out += page_ocr_text(doc.page(pages[i]));
  }
  return out;
}

bool is_augmented(const Document& doc) {
  for (const auto& p : doc.pages)
    for (const auto& el : p.elements)
      if (el.cls != ElementClass::IsolatedFormula && !el.text) return false;
  return true;
}

}  // namespace vrduqa::augment
