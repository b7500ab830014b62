#include "vrduqa/taxonomy.hpp"

#include <fmt/format.h>

#include "vrduqa/error.hpp"

namespace vrduqa {

std::string_view to_string(MacroCategory m) {
  switch (m) {
    case MacroCategory::Numerical: return "Numerical";
    case MacroCategory::Temporal: return "Temporal";
    case MacroCategory::Miscellaneous: return "Miscellaneous";
    case MacroCategory::Location: return "Location";
    case MacroCategory::Structural: return "Structural";
  }
  return "unknown";
}

MacroCategory parse_macro_category(std::string_view name) {
  for (MacroCategory m : kAllMacroCategories)
    if (to_string(m) == name) return m;
  throw IngestionError(fmt::format("unknown macro category '{}'", name));
}

EntityTaxonomy EntityTaxonomy::standard() {
  struct Group {
    MacroCategory macro;
    std::vector<std::string> types;
  };
  const std::vector<Group> groups = {
      {MacroCategory::Numerical,
       {"percentage", "currency", "temperature", "measure_unit", "numerical_value_number",
        "price_number_information", "price_numerical_value"}},
      {MacroCategory::Temporal,
       {"date_information", "date_numerical_value", "time_information", "time_numerical_value",
        "year_number_information", "year_numerical_value"}},
      {MacroCategory::Miscellaneous,
       {"person_name", "company_name", "product", "food", "chemical_element", "job_title_name",
        "job_title_information", "animal", "plant", "movie", "book", "transport_means", "event"}},
      {MacroCategory::Location,
       {"country", "city", "street", "spatial_information", "continent", "postal_code_information",
        "postal_code_numerical_value"}},
      {MacroCategory::Structural,
       {"document_position_information", "page_number_information", "page_number_numerical_value",
        "document_element_type", "document_element_information", "document_structure_information"}},
  };
  EntityTaxonomy t;
  for (const auto& g : groups)
    for (const auto& name : g.types) {
      t.entries_.emplace(name, Entry{g.macro, kDefaultNerThreshold});
      t.order_.push_back(name);
    }
  t.apply_overrides({
      {"document_element_type", 0.8},
      {"document_element_information", 0.8},
      {"document_structure_information", 0.8},
      {"postal_code_information", 0.8},
      {"job_title_information", 0.8},
      {"postal_code_numerical_value", 0.78},
      {"year_numerical_value", 0.7},
      {"job_title_name", 0.9},
      {"date_information", 0.75},
  });
  return t;
}

void EntityTaxonomy::apply_overrides(const std::map<std::string, double>& thresholds) {
  for (const auto& [name, value] : thresholds) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ConfigError(fmt::format("unknown entity type '{}'", name));
    if (!(value > 0 && value <= 1))
      throw ConfigError(fmt::format("threshold {} for '{}' not in (0, 1]", value, name));
    it->second.threshold = value;
  }
}

bool EntityTaxonomy::contains(std::string_view fine_type) const {
  return entries_.find(fine_type) != entries_.end();
}

MacroCategory EntityTaxonomy::macro_of(std::string_view fine_type) const {
  auto it = entries_.find(fine_type);
  if (it == entries_.end()) throw ConfigError(fmt::format("unknown entity type '{}'", fine_type));
  return it->second.macro;
}

double EntityTaxonomy::threshold(std::string_view fine_type) const {
  auto it = entries_.find(fine_type);
  if (it == entries_.end()) throw ConfigError(fmt::format("unknown entity type '{}'", fine_type));
  return it->second.threshold;
}

std::vector<std::string> EntityTaxonomy::fine_types(MacroCategory m) const {
  std::vector<std::string> out;
  for (const auto& name : order_)
    if (entries_.at(name).macro == m) out.push_back(name);
  return out;
}

}  // namespace vrduqa
