#pragma once

// Geometry-bearing document model: pages, layout elements, bounding boxes,
// quadrants, reading order and the density/length binning used by the
// ablation slices.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vrduqa {

/// Page-pixel box. Origin is top-left; x grows right, y grows down.
struct BoundingBox {
  double x0 = 0;
  double y0 = 0;
  double x1 = 0;
  double y1 = 0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  /// x0 < x1, y0 < y1 and no negative coordinate.
  bool valid() const;
  bool fits_within(double page_width, double page_height) const;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

enum class ElementClass { Title, PlainText, Figure, Table, Abandon, IsolatedFormula };

inline constexpr ElementClass kAllElementClasses[] = {
    ElementClass::Title,   ElementClass::PlainText, ElementClass::Figure,
    ElementClass::Table,   ElementClass::Abandon,   ElementClass::IsolatedFormula};

/// Canonical lowercase name: "title", "plain_text", "figure", "table",
/// "abandon", "isolate_formula".
std::string_view to_string(ElementClass cls);
/// Accepts canonical names and the detector's label spellings
/// ("plain text", "figure_caption", ...). Throws IngestionError otherwise.
ElementClass parse_element_class(std::string_view name);
/// Figure and Table are the visual classes; they are captioned, not OCR'd.
bool is_visual(ElementClass cls);

struct DocumentElement {
  std::string id;
  ElementClass cls = ElementClass::PlainText;
  BoundingBox bbox;
  double confidence = 1.0;
  std::optional<std::string> text;

  friend bool operator==(const DocumentElement&, const DocumentElement&) = default;
};

struct Page {
  int index = 1;  // 1-based
  int width = 0;
  int height = 0;
  std::string image;  // path relative to the document file's directory
  std::vector<DocumentElement> elements;

  friend bool operator==(const Page&, const Page&) = default;
};

struct Document {
  std::string id;
  std::string source_dataset;
  std::vector<Page> pages;

  const Page& page(int index) const;
  const DocumentElement* find_element(int page_index, std::string_view element_id) const;

  friend bool operator==(const Document&, const Document&) = default;
};

/// Throws IngestionError unless the document has >= 1 page, page indices
/// are 1..N in order, and every element box is valid and inside its page.
void validate(const Document& doc);

enum class Quadrant { TopLeft, TopRight, BottomLeft, BottomRight };

inline constexpr Quadrant kAllQuadrants[] = {Quadrant::TopLeft, Quadrant::TopRight,
                                             Quadrant::BottomLeft, Quadrant::BottomRight};

std::string_view to_string(Quadrant q);
Quadrant parse_quadrant(std::string_view name);

/// Quadrant of the box center relative to the page midlines. A center lying
/// exactly on a midline resolves left/top. Throws GeometryError when the box
/// does not fit in the page; `element_id` is only used in the message.
Quadrant quadrant_of(const BoundingBox& bbox, const Page& page, std::string_view element_id = {});

/// Intersection over union; 0 for disjoint boxes.
double iou(const BoundingBox& a, const BoundingBox& b);

inline constexpr double kDefaultDedupThreshold = 0.6;

/// Greedy overlap suppression: elements are visited by decreasing bbox area
/// (ties: earlier input first); an element is dropped when its IoU with an
/// already retained element exceeds `threshold`. Survivors keep input order.
std::vector<DocumentElement> dedup_elements(std::span<const DocumentElement> elements,
                                            double threshold = kDefaultDedupThreshold);

/// Elements sorted by (y0, x0), stable.
std::vector<DocumentElement> reading_order(const Page& page);

/// (#Figure + #Table) / #elements excluding IsolatedFormula; 0 with no elements.
double element_density(const Document& doc);

/// "<15%", "15-25%" or ">25%". Computed on counts so 15% and 25% land in the
/// middle bin exactly.
std::string density_bin(const Document& doc);

/// "<4", "4-8" or ">8" from the page count.
std::string length_bin(const Document& doc);
std::string length_bin(std::size_t page_count);

}  // namespace vrduqa
