#include "vrduqa/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "vrduqa/augmentation.hpp"
#include "vrduqa/error.hpp"
#include "vrduqa/image.hpp"
#include "vrduqa/parallel.hpp"
#include "vrduqa/prompts.hpp"

namespace vrduqa::eval {

std::string PromptVariant::name() const {
  if (include_ocr && explicit_unanswerable) return "ocr_explicit";
  if (include_ocr) return "ocr";
  if (explicit_unanswerable) return "explicit";
  return "base";
}

PromptVariant PromptVariant::parse(std::string_view name) {
  for (const auto& v : all())
    if (v.name() == name) return v;
  throw ConfigError(fmt::format("unknown prompt variant '{}' (base, ocr, explicit, ocr_explicit)", name));
}

std::vector<PromptVariant> PromptVariant::all() {
  return {{false, false}, {true, false}, {false, true}, {true, true}};
}

std::vector<PageWindow> make_windows(const std::string& document_id, std::size_t page_count, int w, int stride,
                                     int max_w) {
  if (w < 1 || w > max_w) throw ConfigError(fmt::format("window size {} outside 1..{}", w, max_w));
  if (stride == 0) stride = w;
  if (stride < 1 || stride > w) throw ConfigError(fmt::format("window stride {} outside 1..{}", stride, w));
  std::vector<PageWindow> out;
  const int n = static_cast<int>(page_count);
  for (int start = 1; start <= n; start += stride) {
    PageWindow win{document_id, start, {}};
    for (int p = start; p < start + w && p <= n; ++p) win.pages.push_back(p);
    out.push_back(std::move(win));
    if (start + w - 1 >= n) break;
  }
  return out;
}

std::vector<PageWindow> make_windows(const Document& doc, int w, int stride, int max_w) {
  return make_windows(doc.id, doc.pages.size(), w, stride, max_w);
}

providers::ChatRequest build_vqa_prompt(const corrupt::CorruptedQuestion& cq, const Document& doc,
                                        const PageWindow& window, const PromptVariant& variant,
                                        const fs::path& image_root) {
  std::optional<std::string> ocr;
  if (variant.include_ocr) ocr = augment::window_ocr_text(doc, window.pages);
  providers::ChatRequest req;
  req.user = prompts::vqa_prompt(cq.refined_text, ocr, variant.explicit_unanswerable);
  for (int p : window.pages) {
    const fs::path image = image_root / doc.page(p).image;
    req.images.push_back({read_file(image), image_mime(image)});
  }
  return req;
}

const std::vector<std::string>& refusal_phrases() {
  static const std::vector<std::string> phrases = {
      "unable to determine",
      "not available",
      "not provided in document",
      "the image does not provide information to answer the question",
      "i cannot provide an answer",
      "the document does not provide information",
      "no answer",
  };
  return phrases;
}

std::string normalize_answer(std::string_view answer) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : answer) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (std::ispunct(c)) continue;
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

std::optional<std::string> rule_standardize(std::string_view raw_answer) {
  const std::string norm = normalize_answer(raw_answer);
  for (const auto& phrase : refusal_phrases()) {
    if (norm == phrase || (norm.size() > phrase.size() && norm.compare(0, phrase.size(), phrase) == 0 &&
                           norm[phrase.size()] == ' '))
      return std::string(kUnanswerable);
  }
  return std::nullopt;
}

Standardized standardize(const std::string& raw_answer, providers::ChatClient* standardizer) {
  if (auto s = rule_standardize(raw_answer)) return {*s, "rule", false};
  if (!standardizer) return {raw_answer, "none", false};
  try {
    providers::ChatRequest req;
    req.user = prompts::standardization_prompt(raw_answer);
    const auto reply = standardizer->complete(req);
    if (normalize_answer(reply.text) == kUnanswerable) return {std::string(kUnanswerable), "model", false};
    return {raw_answer, "model", false};
  } catch (const ProviderError& e) {
    spdlog::warn("standardizer failed: {}", e.what());
    return {raw_answer, "failed", true};
  }
}

void to_json(json& j, const EvaluationRecord& r) {
  j = json{{"question_id", r.question_id},
           {"document_id", r.document_id},
           {"model", r.model},
           {"variant", r.variant},
           {"window", {{"size", r.window_size}, {"start", r.window_start}, {"pages", r.window_pages}}},
           {"raw_answer", r.raw_answer},
           {"standardized_answer", r.standardized_answer},
           {"standardized_by", r.standardized_by},
           {"unstandardized", r.unstandardized},
           {"correct", r.correct},
           {"latency", r.latency_s}};
}

void from_json(const json& j, EvaluationRecord& r) {
  r.question_id = j.at("question_id").get<std::string>();
  r.document_id = j.at("document_id").get<std::string>();
  r.model = j.at("model").get<std::string>();
  r.variant = j.at("variant").get<std::string>();
  const json& w = j.at("window");
  r.window_size = w.at("size").get<int>();
  r.window_start = w.at("start").get<int>();
  r.window_pages = w.at("pages").get<std::vector<int>>();
  r.raw_answer = j.at("raw_answer").get<std::string>();
  r.standardized_answer = j.at("standardized_answer").get<std::string>();
  r.standardized_by = j.value("standardized_by", std::string{});
  r.unstandardized = j.value("unstandardized", false);
  r.correct = j.at("correct").get<bool>();
  r.latency_s = j.value("latency", 0.0);
}

void to_json(json& j, const FailedRecord& r) {
  j = json{{"question_id", r.question_id}, {"model", r.model},
           {"variant", r.variant},         {"window", {{"size", r.window_size}, {"start", r.window_start}}},
           {"error", r.error}};
}

void from_json(const json& j, FailedRecord& r) {
  r.question_id = j.at("question_id").get<std::string>();
  r.model = j.at("model").get<std::string>();
  r.variant = j.at("variant").get<std::string>();
  r.window_size = j.at("window").at("size").get<int>();
  r.window_start = j.at("window").at("start").get<int>();
  r.error = j.value("error", std::string{});
}

std::string record_key(const std::string& question_id, const std::string& model, const std::string& variant,
                       int window_size, int window_start) {
  return fmt::format("{}\x1f{}\x1f{}\x1f{}\x1f{}", question_id, model, variant, window_size, window_start);
}

json to_json(const MatrixSummary& s) {
  return {{"questions", s.questions},   {"models", s.models},
          {"variants", s.variants},     {"window_sizes", s.window_sizes},
          {"window_sum", s.window_sum}, {"expected", s.expected},
          {"records", s.records},       {"failed", s.failed},
          {"unstandardized", s.unstandardized}, {"interrupted", s.interrupted},
          {"conserved", s.conserved()}};
}

std::vector<EvaluationRecord> load_records(const fs::path& path) {
  std::vector<EvaluationRecord> out;
  for_each_jsonl(path, [&](const json& row, std::size_t) { out.push_back(row.get<EvaluationRecord>()); });
  return out;
}

MatrixSummary run_matrix(const std::vector<corrupt::CorruptedQuestion>& questions,
                         const std::map<std::string, Document>& documents, const fs::path& image_root,
                         const std::vector<ModelHandle>& models, providers::ChatClient* standardizer,
                         const MatrixOptions& options, const fs::path& out_dir) {
  if (models.empty()) throw ConfigError("no models to evaluate");
  if (options.variants.empty()) throw ConfigError("no prompt variants selected");
  if (options.window_sizes.empty()) throw ConfigError("no window sizes selected");
  {
    std::set<std::string> names;
    for (const auto& m : models)
      if (!m.client || !names.insert(m.name).second)
        throw ConfigError(fmt::format("model '{}' is missing or listed twice", m.name));
  }

  struct Cell {
    const corrupt::CorruptedQuestion* cq;
    const Document* doc;
    const ModelHandle* model;
    PromptVariant variant;
    PageWindow window;
    int window_size;
    std::string key;
  };
  MatrixSummary summary;
  summary.questions = questions.size();
  summary.models = models.size();
  summary.variants = options.variants.size();
  summary.window_sizes = options.window_sizes;

  std::vector<Cell> cells;
  for (const auto& cq : questions) {
    auto it = documents.find(cq.document_id);
    if (it == documents.end())
      throw MissingArtifact(fmt::format("document '{}' for question '{}' is not loaded", cq.document_id, cq.id));
    std::vector<std::pair<int, std::vector<PageWindow>>> windows;
    for (int w : options.window_sizes) {
      windows.emplace_back(w, make_windows(it->second, w, options.stride, options.max_window));
      summary.window_sum += windows.back().second.size();
    }
    for (const auto& model : models)
      for (const auto& variant : options.variants)
        for (const auto& [w, wins] : windows)
          for (const auto& win : wins)
            cells.push_back({&cq, &it->second, &model, variant, win, w,
                             record_key(cq.id, model.name, variant.name(), w, win.start_page)});
  }
  summary.expected = cells.size();

  fs::create_directories(out_dir);
  const fs::path results_path = out_dir / "results.jsonl";
  const fs::path failures_path = out_dir / "failures.jsonl";
  std::map<std::string, EvaluationRecord> done;
  if (options.resume && fs::exists(results_path)) {
    for (auto& r : load_records(results_path))
      done.emplace(record_key(r.question_id, r.model, r.variant, r.window_size, r.window_start), std::move(r));
  } else {
    fs::remove(results_path);
  }
  // Failed cells are always retried.
  fs::remove(failures_path);

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (!done.count(cells[i].key)) pending.push_back(i);
  if (options.cell_budget && pending.size() > *options.cell_budget) {
    pending.resize(*options.cell_budget);
    summary.interrupted = true;
  }

  JsonlAppender results_out(results_path);
  JsonlAppender failures_out(failures_path);
  std::vector<std::optional<EvaluationRecord>> fresh(cells.size());
  std::vector<std::optional<FailedRecord>> failed(cells.size());
  parallel_for(pending.size(), options.workers, [&](std::size_t k) {
    const std::size_t i = pending[k];
    const Cell& c = cells[i];
    try {
      const auto req = build_vqa_prompt(*c.cq, *c.doc, c.window, c.variant, image_root);
      const auto resp = c.model->client->complete(req);
      const auto std_answer = standardize(resp.text, standardizer);
      EvaluationRecord r{c.cq->id,
                         c.cq->document_id,
                         c.model->name,
                         c.variant.name(),
                         c.window_size,
                         c.window.start_page,
                         c.window.pages,
                         resp.text,
                         std_answer.answer,
                         std_answer.method,
                         std_answer.unstandardized,
                         !std_answer.unstandardized && std_answer.answer == kUnanswerable,
                         resp.latency_s};
      results_out.append(r);
      fresh[i] = std::move(r);
    } catch (const ProviderError& e) {
      FailedRecord f{c.cq->id, c.model->name, c.variant.name(), c.window_size, c.window.start_page, e.what()};
      spdlog::error("evaluate {}: {}", c.cq->id, e.what());
      failures_out.append(f);
      failed[i] = std::move(f);
    }
  });
  results_out.sync();
  failures_out.sync();

  std::vector<json> result_rows;
  std::vector<json> failure_rows;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (fresh[i]) {
      summary.unstandardized += fresh[i]->unstandardized;
      result_rows.emplace_back(*fresh[i]);
    } else if (auto it = done.find(cells[i].key); it != done.end()) {
      summary.unstandardized += it->second.unstandardized;
      result_rows.emplace_back(it->second);
    } else if (failed[i]) {
      failure_rows.emplace_back(*failed[i]);
    }
  }
  summary.records = result_rows.size();
  summary.failed = failure_rows.size();
  if (!summary.interrupted) {
    write_jsonl(results_path, result_rows);
    write_jsonl(failures_path, failure_rows);
  }
  return summary;
}

}  // namespace vrduqa::eval
