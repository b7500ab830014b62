#include "vrduqa/document.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "vrduqa/error.hpp"

namespace vrduqa {

bool BoundingBox::valid() const {
  return x0 >= 0 && y0 >= 0 && x0 < x1 && y0 < y1;
}

bool BoundingBox::fits_within(double page_width, double page_height) const {
  return valid() && x1 <= page_width && y1 <= page_height;
}

std::string_view to_string(ElementClass cls) {
  switch (cls) {
    case ElementClass::Title: return "title";
    case ElementClass::PlainText: return "plain_text";
    case ElementClass::Figure: return "figure";
    case ElementClass::Table: return "table";
    case ElementClass::Abandon: return "abandon";
    case ElementClass::IsolatedFormula: return "isolate_formula";
  }
  return "unknown";
}

ElementClass parse_element_class(std::string_view name) {
  std::string key(name);
  std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) {
    return c == ' ' || c == '-' ? '_' : static_cast<char>(std::tolower(c));
  });
  if (key == "title") return ElementClass::Title;
  if (key == "plain_text" || key == "text" || key == "plaintext") return ElementClass::PlainText;
  if (key == "figure") return ElementClass::Figure;
  if (key == "table") return ElementClass::Table;
  if (key == "abandon") return ElementClass::Abandon;
  if (key == "isolate_formula" || key == "isolated_formula" || key == "formula")
    return ElementClass::IsolatedFormula;
  // Detector caption/footnote labels folded into the six analysis classes.
  if (key == "figure_caption" || key == "table_caption" || key == "formula_caption")
    return ElementClass::PlainText;
  if (key == "table_footnote") return ElementClass::Abandon;
  throw IngestionError(fmt::format("unknown element class '{}'", name));
}

bool is_visual(ElementClass cls) {
  return cls == ElementClass::Figure || cls == ElementClass::Table;
}

const Page& Document::page(int index) const {
  if (index < 1 || static_cast<std::size_t>(index) > pages.size())
    throw StateError(fmt::format("document '{}' has no page {}", id, index));
  return pages[static_cast<std::size_t>(index - 1)];
}

const DocumentElement* Document::find_element(int page_index, std::string_view element_id) const {
  if (page_index < 1 || static_cast<std::size_t>(page_index) > pages.size()) return nullptr;
  for (const auto& el : pages[static_cast<std::size_t>(page_index - 1)].elements)
    if (el.id == element_id) return &el;
  return nullptr;
}

void validate(const Document& doc) {
  if (doc.id.empty()) throw IngestionError("document without id");
  if (doc.pages.empty()) throw IngestionError(fmt::format("document '{}' has no pages", doc.id));
  for (std::size_t i = 0; i < doc.pages.size(); ++i) {
    const Page& p = doc.pages[i];
    if (p.index != static_cast<int>(i) + 1)
      throw IngestionError(fmt::format("document '{}': page #{} has index {}, expected {}",
                                       doc.id, i, p.index, i + 1));
    if (p.width <= 0 || p.height <= 0)
      throw IngestionError(fmt::format("document '{}' page {}: non-positive extent {}x{}",
                                       doc.id, p.index, p.width, p.height));
    for (const auto& el : p.elements) {
      if (!el.bbox.fits_within(p.width, p.height))
        throw GeometryError(fmt::format(
            "document '{}' page {} element '{}': bbox [{}, {}, {}, {}] outside {}x{} page", doc.id,
            p.index, el.id, el.bbox.x0, el.bbox.y0, el.bbox.x1, el.bbox.y1, p.width, p.height));
      if (el.confidence < 0 || el.confidence > 1)
        throw IngestionError(fmt::format("document '{}' page {} element '{}': confidence {} not in [0,1]",
                                         doc.id, p.index, el.id, el.confidence));
    }
  }
}

std::string_view to_string(Quadrant q) {
  switch (q) {
    case Quadrant::TopLeft: return "top_left";
    case Quadrant::TopRight: return "top_right";
    case Quadrant::BottomLeft: return "bottom_left";
    case Quadrant::BottomRight: return "bottom_right";
  }
  return "unknown";
}

Quadrant parse_quadrant(std::string_view name) {
  for (Quadrant q : kAllQuadrants)
    if (to_string(q) == name) return q;
  throw IngestionError(fmt::format("unknown quadrant '{}'", name));
}

Quadrant quadrant_of(const BoundingBox& bbox, const Page& page, std::string_view element_id) {
  if (!bbox.fits_within(page.width, page.height))
    throw GeometryError(fmt::format("element '{}' bbox [{}, {}, {}, {}] outside page {} ({}x{})",
                                    element_id, bbox.x0, bbox.y0, bbox.x1, bbox.y1, page.index,
                                    page.width, page.height));
  // Compare doubled coordinates to avoid halving: cx <= w/2  <=>  x0+x1 <= w.
  const bool left = bbox.x0 + bbox.x1 <= static_cast<double>(page.width);
  const bool top = bbox.y0 + bbox.y1 <= static_cast<double>(page.height);
  if (top) return left ? Quadrant::TopLeft : Quadrant::TopRight;
  return left ? Quadrant::BottomLeft : Quadrant::BottomRight;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  if (!a.valid() || !b.valid())
    throw GeometryError(fmt::format("iou of invalid box [{}, {}, {}, {}] / [{}, {}, {}, {}]", a.x0,
                                    a.y0, a.x1, a.y1, b.x0, b.y0, b.x1, b.y1));
  const double iw = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double ih = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

std::vector<DocumentElement> dedup_elements(std::span<const DocumentElement> elements,
                                            double threshold) {
  if (!(threshold > 0 && threshold <= 1))
    throw ConfigError(fmt::format("dedup threshold {} not in (0, 1]", threshold));

  std::vector<std::size_t> order(elements.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    return elements[l].bbox.area() > elements[r].bbox.area();
  });

  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return iou(elements[k].bbox, elements[idx].bbox) > threshold;
    });
    if (!suppressed) kept.push_back(idx);
  }
  std::sort(kept.begin(), kept.end());

  std::vector<DocumentElement> out;
  out.reserve(kept.size());
  for (std::size_t idx : kept) out.push_back(elements[idx]);
  return out;
}

std::vector<DocumentElement> reading_order(const Page& page) {
  std::vector<DocumentElement> out = page.elements;
  std::stable_sort(out.begin(), out.end(), [](const DocumentElement& l, const DocumentElement& r) {
    if (l.bbox.y0 != r.bbox.y0) return l.bbox.y0 < r.bbox.y0;
    return l.bbox.x0 < r.bbox.x0;
  });
  return out;
}

namespace {

struct DensityCounts {
  std::size_t visual = 0;
  std::size_t total = 0;
};

DensityCounts density_counts(const Document& doc) {
  DensityCounts c;
  for (const auto& p : doc.pages)
    for (const auto& el : p.elements) {
      if (el.cls == ElementClass::IsolatedFormula) continue;
      ++c.total;
      if (is_visual(el.cls)) ++c.visual;
    }
  return c;
}

}  // namespace

double element_density(const Document& doc) {
  const auto c = density_counts(doc);
  if (c.total == 0) return 0.0;
  return static_cast<double>(c.visual) / static_cast<double>(c.total);
}

std::string density_bin(const Document& doc) {
  const auto c = density_counts(doc);
  // visual/total < 15/100  <=>  100*visual < 15*total
  if (100 * c.visual < 15 * c.total || c.total == 0) return "<15%";
  if (100 * c.visual <= 25 * c.total) return "15-25%";
  return ">25%";
}

std::string length_bin(std::size_t page_count) {
  if (page_count < 4) return "<4";
  if (page_count <= 8) return "4-8";
  return ">8";
}

std::string length_bin(const Document& doc) { return length_bin(doc.pages.size()); }

}  // namespace vrduqa
