#pragma once

// Acc_D / Acc_P and their ablation slices.
//
// Acc_D: share of questions whose window answers are all correct.
// Acc_P: mean over questions of the share of correct window answers.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "vrduqa/corruption.hpp"
#include "vrduqa/document.hpp"
#include "vrduqa/evaluation.hpp"

namespace vrduqa::metrics {

enum class Dimension {
  Overall,
  Complexity,
  MacroEntity,
  DensityBin,
  LengthBin,
  InPage,
  Quadrant,
  ElementClass,
  PageElementCount,
  Variant,
  WindowSize,
  Model
};

inline constexpr Dimension kAllDimensions[] = {
    Dimension::Overall,  Dimension::Complexity, Dimension::MacroEntity,      Dimension::DensityBin,
    Dimension::LengthBin, Dimension::InPage,    Dimension::Quadrant,         Dimension::ElementClass,
    Dimension::PageElementCount, Dimension::Variant, Dimension::WindowSize, Dimension::Model};

/// Snake-case name ("overall", "complexity", "macro_entity", ...).
std::string_view to_string(Dimension d);
Dimension parse_dimension(std::string_view name);

/// Labels a dimension can take, in report order; empty for open sets
/// (variant, window size, model).
std::vector<std::string> closed_labels(Dimension d);

struct GroupKey {
  Dimension dimension = Dimension::Overall;
  std::string value;

  friend auto operator<=>(const GroupKey&, const GroupKey&) = default;
};

/// Provenance needed to slice records.
struct JoinContext {
  std::map<std::string, const corrupt::CorruptedQuestion*> questions;
  std::map<std::string, const Document*> documents;
  /// Classes counted for PageElementCount.
  std::set<ElementClass> counted_classes{ElementClass::Figure, ElementClass::Table};

  static JoinContext build(const std::vector<corrupt::CorruptedQuestion>& questions,
                           const std::map<std::string, Document>& documents);
};

using Records = std::vector<const eval::EvaluationRecord*>;

/// Group labels of one record for one dimension, deduplicated, in label order.
/// Throws StateError when provenance cannot be joined.
std::vector<std::string> labels_of(const eval::EvaluationRecord& r, Dimension d, const JoinContext& ctx);

/// Record subsets per group. Multi-membership dimensions (macro entity,
/// quadrant, element class) place a record in every group it touches.
std::map<GroupKey, Records> group_records(const Records& records, Dimension d, const JoinContext& ctx);

/// Throws StateError on an empty record set.
double acc_d(const Records& records);
/// Per-question rates averaged; `pooled` divides all correct windows by all windows.
double acc_p(const Records& records, bool pooled = false);
std::size_t question_count(const Records& records);

struct MetricCell {
  std::string model;
  std::string variant;
  int window = 0;
  GroupKey group;
  double acc_d = 0;
  double acc_p = 0;
  std::size_t n_questions = 0;
  std::size_t n_records = 0;

  friend bool operator==(const MetricCell&, const MetricCell&) = default;
};

struct MetricReport {
  std::vector<MetricCell> cells;  // sorted by (model, variant, window, dimension, label order)
};

struct ReportOptions {
  std::vector<Dimension> dimensions{std::begin(kAllDimensions), std::end(kAllDimensions)};
  bool pooled_acc_p = false;
};

/// One cell per (model, variant, window size, group) with at least one record.
/// Variant/WindowSize/Model dimensions are already the cell coordinates and
/// are reported as the single group of their own value.
MetricReport compute_report(const std::vector<eval::EvaluationRecord>& records, const JoinContext& ctx,
                            const ReportOptions& options = {});

inline constexpr std::string_view kCsvHeader = "model,variant,window,dimension,group,acc_d,acc_p,n_questions,n_records";

/// Shortest round-trip decimal form.
std::string format_number(double v);

std::string report_csv(const MetricReport& report);
json report_json(const MetricReport& report);
/// Series for the corruption-type radar and the augmentation / window-size bars.
json plot_data(const MetricReport& report);
/// Writes report.csv, report.json and plotdata.json into `dir`.
void emit_report(const MetricReport& report, const fs::path& dir);

/// Parses report.csv text back into cells.
MetricReport parse_report_csv(std::string_view csv);

}  // namespace vrduqa::metrics
