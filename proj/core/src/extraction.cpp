#include "vrduqa/extraction.hpp"

#include <algorithm>
#include <mutex>
#include <tuple>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "vrduqa/error.hpp"
#include "vrduqa/parallel.hpp"

namespace vrduqa::extract {

void to_json(json& j, const Entity& e) {
  j = json{{"surface", e.surface}, {"fine_type", e.fine_type}, {"macro", to_string(e.macro)}, {"score", e.score}};
  if (e.from_question()) {
    const auto& q = e.question();
    j["provenance"] = {{"kind", "question"}, {"question_id", q.question_id}, {"start", q.start}, {"end", q.end}};
  } else {
    const auto& s = e.element();
    j["provenance"] = {{"kind", "element"},
                       {"document_id", s.document_id},
                       {"page", s.page},
                       {"element_id", s.element_id},
                       {"element_class", to_string(s.element_class)},
                       {"quadrant", to_string(s.quadrant)},
                       {"start", s.start},
                       {"end", s.end}};
  }
}

void from_json(const json& j, Entity& e) {
  e.surface = j.at("surface").get<std::string>();
  e.fine_type = j.at("fine_type").get<std::string>();
  e.macro = parse_macro_category(j.at("macro").get<std::string>());
  e.score = j.at("score").get<double>();
  const json& p = j.at("provenance");
  const std::string kind = p.at("kind").get<std::string>();
  if (kind == "question") {
    e.provenance = QuestionSource{p.at("question_id").get<std::string>(), p.at("start").get<std::size_t>(),
                                  p.at("end").get<std::size_t>()};
  } else if (kind == "element") {
    e.provenance = ElementSource{p.at("document_id").get<std::string>(),
                                 p.at("page").get<int>(),
                                 p.at("element_id").get<std::string>(),
                                 parse_element_class(p.at("element_class").get<std::string>()),
                                 parse_quadrant(p.at("quadrant").get<std::string>()),
                                 p.at("start").get<std::size_t>(),
                                 p.at("end").get<std::size_t>()};
  } else {
    throw IngestionError(fmt::format("unknown provenance kind '{}'", kind));
  }
}

std::vector<providers::NerLabel> ner_labels(const EntityTaxonomy& taxonomy) {
  std::vector<providers::NerLabel> labels;
  for (const auto& name : taxonomy.fine_types()) labels.push_back({name, taxonomy.threshold(name)});
  return labels;
}

namespace {

// Known types only, at or above threshold; identical (span, type) keeps the best score.
std::vector<providers::NerSpan> admit(std::vector<providers::NerSpan> spans, const EntityTaxonomy& taxonomy) {
  std::erase_if(spans, [&](const providers::NerSpan& s) {
    return !taxonomy.contains(s.fine_type) || s.score < taxonomy.threshold(s.fine_type);
  });
  std::stable_sort(spans.begin(), spans.end(), [](const auto& l, const auto& r) {
    return std::tie(l.start, l.end, l.fine_type) < std::tie(r.start, r.end, r.fine_type);
  });
  std::vector<providers::NerSpan> out;
  for (auto& s : spans) {
    if (!out.empty() && out.back().start == s.start && out.back().end == s.end &&
        out.back().fine_type == s.fine_type) {
      out.back().score = std::max(out.back().score, s.score);
      continue;
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

std::vector<Entity> extract_question_entities(providers::NerClient& ner, const EntityTaxonomy& taxonomy,
                                              const Question& question) {
  if (question.text.empty())
    throw IngestionError(fmt::format("question '{}' has empty text", question.id));
  auto spans = admit(ner.extract_entities({question.text, ner_labels(taxonomy)}), taxonomy);
  std::vector<Entity> out;
  for (auto& s : spans)
    out.push_back(Entity{s.surface, s.fine_type, taxonomy.macro_of(s.fine_type), s.score,
                         QuestionSource{question.id, s.start, s.end}});
  return out;
}

std::map<std::string, std::vector<std::size_t>> EntityPool::by_type() const {
  std::map<std::string, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < entities.size(); ++i) out[entities[i].fine_type].push_back(i);
  return out;
}

EntityPool build_entity_pool(providers::NerClient& ner, const EntityTaxonomy& taxonomy, const Document& doc,
                             std::size_t workers) {
  struct Job {
    const Page* page;
    const DocumentElement* element;
  };
  std::vector<Job> jobs;
  for (const auto& page : doc.pages)
    for (const auto& el : page.elements) {
      if (el.cls == ElementClass::IsolatedFormula) continue;
      if (!el.text)
        throw StateError(fmt::format("document '{}' page {} element '{}' has no text; run augment first",
                                     doc.id, page.index, el.id));
      if (el.text->empty()) continue;
      jobs.push_back({&page, &el});
    }

  const auto labels = ner_labels(taxonomy);
  std::vector<std::vector<Entity>> found(jobs.size());
  std::vector<std::optional<SkippedElement>> failures(jobs.size());
  parallel_for(jobs.size(), workers, [&](std::size_t i) {
    const Job& job = jobs[i];
    try {
      auto spans = admit(ner.extract_entities({*job.element->text, labels}), taxonomy);
      const Quadrant quad = quadrant_of(job.element->bbox, *job.page, job.element->id);
      for (auto& s : spans)
        found[i].push_back(Entity{s.surface, s.fine_type, taxonomy.macro_of(s.fine_type), s.score,
                                  ElementSource{doc.id, job.page->index, job.element->id, job.element->cls,
                                                quad, s.start, s.end}});
    } catch (const ProviderError& e) {
      spdlog::warn("NER failed for document '{}' page {} element '{}': {}", doc.id, job.page->index,
                   job.element->id, e.what());
      failures[i] = SkippedElement{job.page->index, job.element->id, e.what()};
    }
  });

  EntityPool pool;
  pool.document_id = doc.id;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    for (auto& e : found[i]) pool.entities.push_back(std::move(e));
    if (failures[i]) pool.skipped.push_back(std::move(*failures[i]));
  }
  std::stable_sort(pool.entities.begin(), pool.entities.end(), [](const Entity& l, const Entity& r) {
    const auto& a = l.element();
    const auto& b = r.element();
    return std::tie(a.page, a.element_id, a.start, a.end) < std::tie(b.page, b.element_id, b.start, b.end);
  });
  return pool;
}

void validate_pool(const EntityPool& pool, const Document& doc, const EntityTaxonomy& taxonomy) {
  for (const auto& e : pool.entities) {
    if (e.from_question())
      throw IngestionError(fmt::format("pool '{}' holds a question entity '{}'", pool.document_id, e.surface));
    if (!taxonomy.contains(e.fine_type) || taxonomy.macro_of(e.fine_type) != e.macro)
      throw IngestionError(fmt::format("pool '{}': entity '{}' has type {}/{} outside the taxonomy",
                                       pool.document_id, e.surface, to_string(e.macro), e.fine_type));
    if (e.score < taxonomy.threshold(e.fine_type))
      throw IngestionError(fmt::format("pool '{}': entity '{}' score {} below threshold", pool.document_id,
                                       e.surface, e.score));
    const auto& s = e.element();
    const DocumentElement* el = doc.find_element(s.page, s.element_id);
    if (s.document_id != doc.id || el == nullptr || el->cls != s.element_class)
      throw IngestionError(fmt::format("pool '{}': entity '{}' references missing element {}/{}/{}",
                                       pool.document_id, e.surface, s.document_id, s.page, s.element_id));
    if (quadrant_of(el->bbox, doc.page(s.page), el->id) != s.quadrant)
      throw IngestionError(fmt::format("pool '{}': entity '{}' has stale quadrant", pool.document_id, e.surface));
    if (!el->text || s.end > el->text->size() || s.start >= s.end ||
        el->text->compare(s.start, s.end - s.start, e.surface) != 0)
      throw IngestionError(fmt::format("pool '{}': entity '{}' span does not match element text",
                                       pool.document_id, e.surface));
  }
}

void save_pool(const fs::path& path, const EntityPool& pool) {
  std::vector<json> rows;
  rows.reserve(pool.entities.size());
  for (const auto& e : pool.entities) rows.emplace_back(e);
  write_jsonl(path, rows);
}

EntityPool load_pool(const fs::path& path, const std::string& document_id) {
  EntityPool pool;
  pool.document_id = document_id;
  for_each_jsonl(path, [&](const json& row, std::size_t) { pool.entities.push_back(row.get<Entity>()); });
  return pool;
}

}  // namespace vrduqa::extract
