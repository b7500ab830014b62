#pragma once

// Typed entities found in questions and in augmented element texts. Element
// entities carry full provenance (page, element, class, quadrant) so later
// slicing by layout position is a pure join.

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "vrduqa/document.hpp"
#include "vrduqa/providers.hpp"
#include "vrduqa/question.hpp"
#include "vrduqa/taxonomy.hpp"

namespace vrduqa::extract {

/// Byte span inside the question text.
struct QuestionSource {
  std::string question_id;
  std::size_t start = 0;
  std::size_t end = 0;

  friend bool operator==(const QuestionSource&, const QuestionSource&) = default;
};

/// Byte span inside an element's text.
struct ElementSource {
  std::string document_id;
  int page = 0;
  std::string element_id;
  ElementClass element_class = ElementClass::PlainText;
  Quadrant quadrant = Quadrant::TopLeft;
  std::size_t start = 0;
  std::size_t end = 0;

  friend bool operator==(const ElementSource&, const ElementSource&) = default;
};

struct Entity {
  std::string surface;
  std::string fine_type;
  MacroCategory macro = MacroCategory::Numerical;
  double score = 0;
  std::variant<QuestionSource, ElementSource> provenance;

  bool from_question() const { return std::holds_alternative<QuestionSource>(provenance); }
  const QuestionSource& question() const { return std::get<QuestionSource>(provenance); }
  const ElementSource& element() const { return std::get<ElementSource>(provenance); }

  friend bool operator==(const Entity&, const Entity&) = default;
};

void to_json(json& j, const Entity& e);
void from_json(const json& j, Entity& e);

/// One label per taxonomy fine type, with its threshold.
std::vector<providers::NerLabel> ner_labels(const EntityTaxonomy& taxonomy);

/// NER over the question text. Identical (span, type) detections collapse to
/// the highest-scoring one. Throws IngestionError on empty text.
std::vector<Entity> extract_question_entities(providers::NerClient& ner, const EntityTaxonomy& taxonomy,
                                              const Question& question);

struct SkippedElement {
  int page = 0;
  std::string element_id;
  std::string error;
};

/// Document-wide pool ordered by (page, element id, span start).
struct EntityPool {
  std::string document_id;
  std::vector<Entity> entities;
  std::vector<SkippedElement> skipped;

  /// Indices into `entities` per fine type, in pool order.
  std::map<std::string, std::vector<std::size_t>> by_type() const;
};

/// NER over every element text (captions included). A failing element is
/// logged and recorded in `skipped`; the rest of the document proceeds.
/// Throws StateError when a non-formula element has no text yet.
EntityPool build_entity_pool(providers::NerClient& ner, const EntityTaxonomy& taxonomy,
                             const Document& doc, std::size_t workers = 1);

/// Throws IngestionError unless every entity references an existing element
/// of the stated class and quadrant, its span reproduces the surface, and its
/// score clears the taxonomy threshold.
void validate_pool(const EntityPool& pool, const Document& doc, const EntityTaxonomy& taxonomy);

void save_pool(const fs::path& path, const EntityPool& pool);
EntityPool load_pool(const fs::path& path, const std::string& document_id);

}  // namespace vrduqa::extract
