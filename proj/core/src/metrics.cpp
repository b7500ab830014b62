#include "vrduqa/metrics.hpp"

#include <algorithm>
#include <charconv>

#include <fmt/format.h>

#include "vrduqa/error.hpp"

namespace vrduqa::metrics {

std::string_view to_string(Dimension d) {
  switch (d) {
    case Dimension::Overall: return "overall";
    case Dimension::Complexity: return "complexity";
    case Dimension::MacroEntity: return "macro_entity";
    case Dimension::DensityBin: return "density_bin";
    case Dimension::LengthBin: return "length_bin";
    case Dimension::InPage: return "in_page";
    case Dimension::Quadrant: return "quadrant";
    case Dimension::ElementClass: return "element_class";
    case Dimension::PageElementCount: return "page_element_count";
    case Dimension::Variant: return "variant";
    case Dimension::WindowSize: return "window_size";
    case Dimension::Model: return "model";
  }
  return "unknown";
}

Dimension parse_dimension(std::string_view name) {
  for (Dimension d : kAllDimensions)
    if (to_string(d) == name) return d;
  throw ConfigError(fmt::format("unknown grouping dimension '{}'", name));
}

std::vector<std::string> closed_labels(Dimension d) {
  switch (d) {
    case Dimension::Overall: return {"all"};
    case Dimension::Complexity: return {"C1", "C2", "C3"};
    case Dimension::MacroEntity: {
      std::vector<std::string> out;
      for (auto m : kAllMacroCategories) out.emplace_back(to_string(m));
      return out;
    }
    case Dimension::DensityBin: return {"<15%", "15-25%", ">25%"};
    case Dimension::LengthBin: return {"<4", "4-8", ">8"};
    case Dimension::InPage: return {"In-Page", "Out-Page"};
    case Dimension::Quadrant: {
      std::vector<std::string> out;
      for (auto q : kAllQuadrants) out.emplace_back(to_string(q));
      return out;
    }
    case Dimension::ElementClass: {
      std::vector<std::string> out;
      for (auto c : kAllElementClasses)
        if (c != vrduqa::ElementClass::IsolatedFormula) out.emplace_back(to_string(c));
      return out;
    }
    case Dimension::PageElementCount: return {"0", "1", ">1"};
    case Dimension::Variant:
    case Dimension::WindowSize:
    case Dimension::Model: return {};
  }
  return {};
}

JoinContext JoinContext::build(const std::vector<corrupt::CorruptedQuestion>& questions,
                               const std::map<std::string, Document>& documents) {
  JoinContext ctx;
  for (const auto& q : questions) ctx.questions[q.id] = &q;
  for (const auto& [id, doc] : documents) ctx.documents[id] = &doc;
  return ctx;
}

namespace {

std::size_t label_rank(Dimension d, const std::string& label) {
  const auto labels = closed_labels(d);
  auto it = std::find(labels.begin(), labels.end(), label);
  return it == labels.end() ? labels.size() : static_cast<std::size_t>(it - labels.begin());
}

bool label_less(Dimension d, const std::string& a, const std::string& b) {
  if (d == Dimension::WindowSize) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  }
  if (d == Dimension::Variant) {
    auto rank = [](const std::string& v) {
      const auto all = eval::PromptVariant::all();
      for (std::size_t i = 0; i < all.size(); ++i)
        if (all[i].name() == v) return i;
      return all.size();
    };
    if (rank(a) != rank(b)) return rank(a) < rank(b);
    return a < b;
  }
  const auto ra = label_rank(d, a);
  const auto rb = label_rank(d, b);
  if (ra != rb) return ra < rb;
  return a < b;
}

void add_unique(std::vector<std::string>& out, std::string label) {
  if (std::find(out.begin(), out.end(), label) == out.end()) out.push_back(std::move(label));
}

}  // namespace

std::vector<std::string> labels_of(const eval::EvaluationRecord& r, Dimension d, const JoinContext& ctx) {
  auto q_it = ctx.questions.find(r.question_id);
  if (q_it == ctx.questions.end())
    throw StateError(fmt::format("record for unknown question '{}'", r.question_id));
  const corrupt::CorruptedQuestion& cq = *q_it->second;
  auto d_it = ctx.documents.find(cq.document_id);
  if (d_it == ctx.documents.end())
    throw StateError(fmt::format("question '{}' references unknown document '{}'", cq.id, cq.document_id));
  const Document& doc = *d_it->second;

  std::vector<std::string> out;
  switch (d) {
    case Dimension::Overall: out.push_back("all"); break;
    case Dimension::Complexity: out.push_back(fmt::format("C{}", cq.complexity)); break;
    case Dimension::MacroEntity:
      for (const auto& rep : cq.replacements) add_unique(out, std::string(to_string(rep.original.macro)));
      break;
    case Dimension::DensityBin: out.push_back(density_bin(doc)); break;
    case Dimension::LengthBin: out.push_back(length_bin(doc)); break;
    case Dimension::InPage: {
      bool in_page = false;
      for (const auto& rep : cq.replacements) {
        const int page = rep.substitute.element().page;
        if (std::find(r.window_pages.begin(), r.window_pages.end(), page) != r.window_pages.end()) in_page = true;
      }
      out.push_back(in_page ? "In-Page" : "Out-Page");
      break;
    }
    case Dimension::Quadrant:
      for (const auto& rep : cq.replacements) add_unique(out, std::string(to_string(rep.substitute.element().quadrant)));
      break;
    case Dimension::ElementClass:
      for (const auto& rep : cq.replacements) {
        const auto cls = rep.substitute.element().element_class;
        if (cls != vrduqa::ElementClass::IsolatedFormula) add_unique(out, std::string(to_string(cls)));
      }
      break;
    case Dimension::PageElementCount: {
      std::size_t count = 0;
      for (int p : r.window_pages)
        for (const auto& el : doc.page(p).elements) count += ctx.counted_classes.count(el.cls);
      out.push_back(count == 0 ? "0" : count == 1 ? "1" : ">1");
      break;
    }
    case Dimension::Variant: out.push_back(r.variant); break;
    case Dimension::WindowSize: out.push_back(std::to_string(r.window_size)); break;
    case Dimension::Model: out.push_back(r.model); break;
  }
  std::sort(out.begin(), out.end(), [d](const auto& a, const auto& b) { return label_less(d, a, b); });
  return out;
}

std::map<GroupKey, Records> group_records(const Records& records, Dimension d, const JoinContext& ctx) {
  std::map<GroupKey, Records> out;
  for (const auto* r : records)
    for (auto& label : labels_of(*r, d, ctx)) out[GroupKey{d, std::move(label)}].push_back(r);
  return out;
}

namespace {

struct QuestionTally {
  std::size_t correct = 0;
  std::size_t total = 0;
};

std::map<std::string, QuestionTally> tally(const Records& records) {
  if (records.empty()) throw StateError("metric over an empty record set");
  std::map<std::string, QuestionTally> out;
  for (const auto* r : records) {
    auto& t = out[r->question_id];
    ++t.total;
    t.correct += r->correct;
  }
  return out;
}

}  // namespace

double acc_d(const Records& records) {
  const auto t = tally(records);
  std::size_t all_correct = 0;
  for (const auto& [_, q] : t) all_correct += q.correct == q.total;
  return static_cast<double>(all_correct) / static_cast<double>(t.size());
}

double acc_p(const Records& records, bool pooled) {
  const auto t = tally(records);
  if (pooled) {
    std::size_t correct = 0;
    for (const auto& [_, q] : t) correct += q.correct;
    return static_cast<double>(correct) / static_cast<double>(records.size());
  }
  double sum = 0;
  for (const auto& [_, q] : t) sum += static_cast<double>(q.correct) / static_cast<double>(q.total);
  return sum / static_cast<double>(t.size());
}

std::size_t question_count(const Records& records) {
  std::set<std::string> ids;
  for (const auto* r : records) ids.insert(r->question_id);
  return ids.size();
}

MetricReport compute_report(const std::vector<eval::EvaluationRecord>& records, const JoinContext& ctx,
                            const ReportOptions& options) {
  struct Coord {
    std::string model;
    std::string variant;
    int window;
  };
  std::map<std::string, std::pair<Coord, Records>> by_coord;
  for (const auto& r : records) {
    auto& slot = by_coord[fmt::format("{}\x1f{}\x1f{}", r.model, r.variant, r.window_size)];
    slot.first = {r.model, r.variant, r.window_size};
    slot.second.push_back(&r);
  }
  MetricReport report;
  for (const auto& [_, entry] : by_coord) {
    const auto& [coord, recs] = entry;
    for (Dimension d : options.dimensions)
      for (const auto& [key, subset] : group_records(recs, d, ctx))
        report.cells.push_back({coord.model, coord.variant, coord.window, key, acc_d(subset),
                                acc_p(subset, options.pooled_acc_p), question_count(subset), subset.size()});
  }
  std::stable_sort(report.cells.begin(), report.cells.end(), [](const MetricCell& a, const MetricCell& b) {
    if (a.model != b.model) return a.model < b.model;
    if (a.variant != b.variant) return label_less(Dimension::Variant, a.variant, b.variant);
    if (a.window != b.window) return a.window < b.window;
    if (a.group.dimension != b.group.dimension) return a.group.dimension < b.group.dimension;
    return label_less(a.group.dimension, a.group.value, b.group.value);
  });
  return report;
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw IngestionError("unterminated quoted CSV field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

double parse_double(const std::string& s) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw IngestionError(fmt::format("bad number '{}' in report", s));
  return v;
}

std::size_t parse_size(const std::string& s) {
  std::size_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw IngestionError(fmt::format("bad count '{}' in report", s));
  return v;
}

json cell_json(const MetricCell& c) {
  return {{"model", c.model},   {"variant", c.variant},        {"window", c.window},
          {"dimension", to_string(c.group.dimension)},         {"group", c.group.value},
          {"acc_d", c.acc_d},   {"acc_p", c.acc_p},            {"n_questions", c.n_questions},
          {"n_records", c.n_records}};
}

}  // namespace

std::string report_csv(const MetricReport& report) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& c : report.cells)
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", csv_field(c.model), csv_field(c.variant), c.window,
                       to_string(c.group.dimension), csv_field(c.group.value), format_number(c.acc_d),
                       format_number(c.acc_p), c.n_questions, c.n_records);
  return out;
}

json report_json(const MetricReport& report) {
  json cells = json::array();
  for (const auto& c : report.cells) cells.push_back(cell_json(c));
  return {{"columns", json::array({"model", "variant", "window", "dimension", "group", "acc_d", "acc_p",
                                   "n_questions", "n_records"})},
          {"cells", cells}};
}

json plot_data(const MetricReport& report) {
  auto find = [&](const std::string& model, const std::string& variant, int window, Dimension d,
                  const std::string& label) -> const MetricCell* {
    for (const auto& c : report.cells)
      if (c.model == model && c.variant == variant && c.window == window && c.group.dimension == d &&
          c.group.value == label)
        return &c;
    return nullptr;
  };
  auto value = [](const MetricCell* c, bool d) { return c ? json(d ? c->acc_d : c->acc_p) : json(nullptr); };

  std::vector<std::string> models;
  std::vector<std::string> variants;
  std::vector<int> windows;
  for (const auto& c : report.cells) {
    if (std::find(models.begin(), models.end(), c.model) == models.end()) models.push_back(c.model);
    if (std::find(variants.begin(), variants.end(), c.variant) == variants.end()) variants.push_back(c.variant);
    if (std::find(windows.begin(), windows.end(), c.window) == windows.end()) windows.push_back(c.window);
  }
  std::sort(variants.begin(), variants.end(),
            [](const auto& a, const auto& b) { return label_less(Dimension::Variant, a, b); });
  std::sort(windows.begin(), windows.end());

  const auto axes = closed_labels(Dimension::MacroEntity);
  json radar_series = json::array();
  for (const auto& m : models)
    for (const auto& v : variants)
      for (int w : windows) {
        if (!find(m, v, w, Dimension::Overall, "all")) continue;
        json d = json::array(), p = json::array();
        for (const auto& a : axes) {
          const auto* c = find(m, v, w, Dimension::MacroEntity, a);
          d.push_back(value(c, true));
          p.push_back(value(c, false));
        }
        radar_series.push_back({{"model", m}, {"variant", v}, {"window", w}, {"acc_d", d}, {"acc_p", p}});
      }

  json aug_series = json::array();
  for (const auto& m : models)
    for (int w : windows) {
      json d = json::array(), p = json::array();
      bool any = false;
      for (const auto& v : variants) {
        const auto* c = find(m, v, w, Dimension::Overall, "all");
        any = any || c;
        d.push_back(value(c, true));
        p.push_back(value(c, false));
      }
      if (any) aug_series.push_back({{"model", m}, {"window", w}, {"acc_d", d}, {"acc_p", p}});
    }

  json win_series = json::array();
  for (const auto& m : models)
    for (const auto& v : variants) {
      json d = json::array(), p = json::array();
      bool any = false;
      for (int w : windows) {
        const auto* c = find(m, v, w, Dimension::Overall, "all");
        any = any || c;
        d.push_back(value(c, true));
        p.push_back(value(c, false));
      }
      if (any) win_series.push_back({{"model", m}, {"variant", v}, {"acc_d", d}, {"acc_p", p}});
    }

  return {{"corruption_type_radar", {{"axes", axes}, {"series", radar_series}}},
          {"augmentation_bars", {{"categories", variants}, {"series", aug_series}}},
          {"window_size_bars", {{"categories", windows}, {"series", win_series}}}};
}

void emit_report(const MetricReport& report, const fs::path& dir) {
  fs::create_directories(dir);
  write_file_atomic(dir / "report.csv", report_csv(report));
  write_json_file(dir / "report.json", report_json(report));
  write_json_file(dir / "plotdata.json", plot_data(report));
}

MetricReport parse_report_csv(std::string_view csv) {
  const auto rows = parse_csv(csv);
  if (rows.empty()) throw IngestionError("report CSV without header");
  std::string header;
  for (std::size_t i = 0; i < rows[0].size(); ++i) header += (i ? "," : "") + rows[0][i];
  if (header != kCsvHeader) throw IngestionError(fmt::format("unexpected report header '{}'", header));
  MetricReport report;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 9) throw IngestionError(fmt::format("report row {} has {} fields", i + 1, r.size()));
    report.cells.push_back({r[0], r[1], static_cast<int>(parse_size(r[2])), GroupKey{parse_dimension(r[3]), r[4]},
                            parse_double(r[5]), parse_double(r[6]), parse_size(r[7]), parse_size(r[8])});
  }
  return report;
}

}  // namespace vrduqa::metrics
