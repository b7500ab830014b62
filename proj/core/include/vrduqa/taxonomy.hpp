#pragma once

// Fine-grained entity types, their macro categories and NER thresholds.

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace vrduqa {

enum class MacroCategory { Numerical, Temporal, Miscellaneous, Location, Structural };

inline constexpr MacroCategory kAllMacroCategories[] = {
    MacroCategory::Numerical, MacroCategory::Temporal, MacroCategory::Miscellaneous,
    MacroCategory::Location, MacroCategory::Structural};

std::string_view to_string(MacroCategory m);
MacroCategory parse_macro_category(std::string_view name);

inline constexpr double kDefaultNerThreshold = 0.75;

class EntityTaxonomy {
 public:
  /// The built-in type lists and thresholds.
  static EntityTaxonomy standard();

  /// Replaces thresholds; throws ConfigError for unknown types or values
  /// outside (0, 1].
  void apply_overrides(const std::map<std::string, double>& thresholds);

  bool contains(std::string_view fine_type) const;
  /// Throws ConfigError for unknown types.
  MacroCategory macro_of(std::string_view fine_type) const;
  double threshold(std::string_view fine_type) const;

  /// All fine types in declaration order (grouped by macro category).
  const std::vector<std::string>& fine_types() const { return order_; }
  std::vector<std::string> fine_types(MacroCategory m) const;

 private:
  struct Entry {
    MacroCategory macro;
    double threshold;
  };
  std::map<std::string, Entry, std::less<>> entries_;
  std::vector<std::string> order_;
};

}  // namespace vrduqa
