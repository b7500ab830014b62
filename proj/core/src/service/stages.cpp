#include "vrduqa/service/stages.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "vrduqa/augmentation.hpp"
#include "vrduqa/document_io.hpp"
#include "vrduqa/error.hpp"
#include "vrduqa/hashing.hpp"
#include "vrduqa/mock.hpp"
#include "vrduqa/parallel.hpp"
#include "vrduqa/service/importers.hpp"
#include "vrduqa/verification.hpp"

namespace vrduqa::service {

inline constexpr std::string_view kToolVersion = "vrduqa 0.3.0";

// ---------------------------------------------------------------------------
// Providers

ProviderRegistry::ProviderRegistry(const PipelineConfig& cfg, ProviderMode mode) : cfg_(cfg), mode_(mode) {
  if (mode_ == ProviderMode::Mock) {
    if (cfg.mock_script.empty()) throw ConfigError("--providers mock needs 'mock_script' in the config");
    mock_script_ = read_json_file(cfg.mock_script);
  }
}

std::shared_ptr<providers::ProviderClient> ProviderRegistry::transport(const std::string& name) {
  std::lock_guard lock(mu_);
  if (auto it = clients_.find(name); it != clients_.end()) return it->second;
  const auto& pc = cfg_.provider(name);
  std::shared_ptr<providers::Endpoint> endpoint;
  if (mode_ == ProviderMode::Mock) {
    const auto script = mock::MockScript::parse(*mock_script_);
    auto it = script.providers.find(name);
    if (it == script.providers.end()) throw ConfigError(fmt::format("mock script has no entry for provider '{}'", name));
    endpoint = std::make_shared<mock::MockEndpoint>(name, pc.type, it->second);
  } else {
    if (pc.endpoint.empty()) throw ConfigError(fmt::format("provider '{}' has no endpoint", name));
    endpoint = std::make_shared<providers::HttpEndpoint>(pc.endpoint);
  }
  providers::ResponseCache cache = cfg_.cache_dir.empty() ? providers::ResponseCache{}
                                                          : providers::ResponseCache(cfg_.cache_dir);
  auto client = std::make_shared<providers::ProviderClient>(pc, endpoint, cache, nullptr, derive_seed(cfg_.seed, name));
  clients_.emplace(name, client);
  return client;
}

std::shared_ptr<providers::ChatClient> ProviderRegistry::chat(const std::string& name) {
  if (cfg_.provider(name).type != providers::ProviderType::OpenAiChat)
    throw ConfigError(fmt::format("provider '{}' is not a chat provider", name));
  return std::make_shared<providers::ChatClient>(transport(name));
}

std::shared_ptr<providers::NerClient> ProviderRegistry::ner(const std::string& name) {
  if (cfg_.provider(name).type != providers::ProviderType::Ner)
    throw ConfigError(fmt::format("provider '{}' is not an NER provider", name));
  return std::make_shared<providers::NerClient>(transport(name));
}

json ProviderRegistry::describe() const {
  json out = json::object();
  for (const auto& p : cfg_.providers)
    out[p.name] = {{"type", providers::to_string(p.type)},
                   {"model", p.model},
                   {"endpoint", mode_ == ProviderMode::Mock ? std::string("mock") : p.endpoint},
                   {"max_output_tokens", p.max_output_tokens},
                   {"temperature", "provider default (not sent)"}};
  return out;
}

// ---------------------------------------------------------------------------
// Helpers

std::map<std::string, Document> load_documents(const fs::path& dir) {
  std::map<std::string, Document> out;
  if (!fs::is_directory(dir)) return out;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto& p = e.path();
    if (p.extension() == ".json" && p.stem().extension() != ".manifest") files.push_back(p);
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    Document d = load_document(f);
    out.emplace(d.id, std::move(d));
  }
  return out;
}

std::string directory_digest(const fs::path& dir, const std::string& suffix) {
  std::vector<std::pair<std::string, std::string>> entries;
  if (fs::is_directory(dir)) {
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
      if (!e.is_regular_file()) continue;
      const std::string name = e.path().filename().string();
      if (!suffix.empty() && (name.size() < suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0))
        continue;
      entries.emplace_back(fs::relative(e.path(), dir).generic_string(), file_sha256(e.path()));
    }
  }
  std::sort(entries.begin(), entries.end());
  std::string material;
  for (const auto& [path, sha] : entries) material += path + '\0' + sha + '\n';
  return sha256_hex(material);
}

namespace {

Workspace workspace_of(const PipelineConfig& cfg) { return Workspace{cfg.workspace}; }

void require(const fs::path& path, std::string_view what, std::string_view command) {
  if (!fs::exists(path))
    throw MissingArtifact(fmt::format("{} not found at {}; run {} first", what, path.string(), command));
}

json stage_manifest(const PipelineConfig& cfg, std::string_view stage, json inputs, json counts) {
  return {{"stage", stage}, {"tool", kToolVersion}, {"config_hash", cfg.hash}, {"inputs", std::move(inputs)},
          {"counts", std::move(counts)}};
}

void clear_dir(const fs::path& dir) {
  if (fs::exists(dir)) fs::remove_all(dir);
  fs::create_directories(dir);
}

/// Detections already present in the raw document.
class ExistingLayoutSource final : public layout::LayoutSource {
 public:
  std::vector<DocumentElement> detect(const Document&, const Page& page, const fs::path&) override {
    std::vector<DocumentElement> out;
    for (const auto& el : page.elements)
      if (el.confidence >= layout::kDetectorConfidence) out.push_back(el);
    return out;
  }
};

std::vector<Question> dataset_questions(const Workspace& ws) {
  require(ws.questions(), "dataset questions", "import");
  return load_questions(ws.questions());
}

std::map<std::string, Document> augmented_documents(const Workspace& ws) {
  require(ws.documents(), "imported dataset", "import");
  auto raw = load_documents(ws.documents());
  std::map<std::string, Document> out;
  for (const auto& [id, _] : raw) {
    require(ws.augmented_doc(id), fmt::format("augmented document '{}'", id), "augment");
    out.emplace(id, load_document(ws.augmented_doc(id)));
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// import

StageResult run_import(const PipelineConfig& cfg, const StageOptions&) {
  if (cfg.datasets.empty()) throw ConfigError("no datasets configured");
  const Workspace ws = workspace_of(cfg);
  ImportedDataset all;
  json per_dataset = json::object();
  json inputs = json::object();
  for (const auto& src : cfg.datasets) {
    auto data = import_source(src);
    if (src.sample) data = sample_questions(std::move(data), *src.sample, cfg.seed);
    per_dataset[src.name] = {{"documents", data.documents.size()}, {"questions", data.questions.size()}};
    inputs[src.name] = fs::is_directory(src.path) ? directory_digest(src.path) : file_sha256(src.path);
    for (auto& d : data.documents) {
      d.source_dataset = src.name;
      all.documents.push_back(std::move(d));
    }
    for (auto& q : data.questions) all.questions.push_back(std::move(q));
  }
  clear_dir(ws.dataset());
  write_dataset(all, ws.dataset());
  StageResult r;
  r.manifest = stage_manifest(cfg, "import", inputs,
                              {{"documents", all.documents.size()}, {"questions", all.questions.size()},
                               {"datasets", per_dataset}});
  write_json_file(ws.dataset() / "manifest.json", r.manifest);
  r.message = fmt::format("imported {} documents, {} questions", all.documents.size(), all.questions.size());
  return r;
}

// ---------------------------------------------------------------------------
// augment

StageResult run_augment(const PipelineConfig& cfg, const StageOptions& opts) {
  const Workspace ws = workspace_of(cfg);
  require(ws.documents(), "imported dataset", "import");
  const auto raw_docs = load_documents(ws.documents());
  if (!opts.resume) clear_dir(ws.augmented());
  fs::create_directories(ws.augmented() / "documents");

  ProviderRegistry registry(cfg, opts.mode);
  if (cfg.roles.ocr.empty() || cfg.roles.captioner.empty())
    throw ConfigError("roles.ocr and roles.captioner are required for augment");
  auto ocr = registry.chat(cfg.roles.ocr);
  auto captioner = registry.chat(cfg.roles.captioner);

  std::map<std::string, std::unique_ptr<layout::LayoutSource>> sources;
  auto layout_for = [&](const Document& doc) -> layout::LayoutSource& {
    auto it = sources.find(doc.source_dataset);
    if (it != sources.end()) return *it->second;
    std::unique_ptr<layout::LayoutSource> src;
    if (!cfg.roles.layout.empty()) {
      src = std::make_unique<layout::HttpLayoutSource>(registry.transport(cfg.roles.layout));
    } else {
      for (const auto& ds : cfg.datasets)
        if (ds.name == doc.source_dataset && !ds.layout.empty())
          src = std::make_unique<layout::ImportLayoutSource>(ds.layout);
      if (!src) src = std::make_unique<ExistingLayoutSource>();
    }
    return *sources.emplace(doc.source_dataset, std::move(src)).first->second;
  };

  std::optional<std::size_t> budget = opts.limit;
  std::size_t complete = 0, skipped = 0, failed = 0;
  bool interrupted = false;
  std::map<std::string, std::size_t> per_class;
  json failures = json::array();
  for (const auto& [id, raw] : raw_docs) {
    const fs::path out_path = ws.augmented_doc(id);
    if (fs::exists(out_path)) {
      ++skipped;
      ++complete;
      for (const auto& p : load_document(out_path).pages)
        for (const auto& el : p.elements) per_class[std::string(to_string(el.cls))]++;
      continue;
    }
    if (budget && *budget == 0) {
      interrupted = true;
      break;
    }
    augment::AugmentOptions ao;
    ao.dedup_threshold = cfg.dedup_threshold;
    ao.crop_margin = cfg.crop_margin;
    ao.workers = cfg.workers;
    ao.element_budget = budget;
    const fs::path partial = ws.augmented() / "partial" / (id + ".jsonl");
    auto outcome = augment::augment_document(raw, ws.documents(), layout_for(raw), *ocr, *captioner, ao, partial);
    if (budget) *budget -= std::min(*budget, outcome.requested);
    for (const auto& f : outcome.failures)
      failures.push_back({{"document", id}, {"page", f.page}, {"element_id", f.element_id}, {"error", f.error}});
    if (outcome.interrupted) {
      interrupted = true;
      break;
    }
    if (!outcome.failures.empty()) {
      ++failed;
      continue;
    }
    save_document(out_path, outcome.augmented.document);
    write_json_file(ws.augmented() / "documents" / (id + ".manifest.json"), json(outcome.augmented.manifest));
    fs::remove(partial);
    ++complete;
    for (const auto& p : outcome.augmented.document.pages)
      for (const auto& el : p.elements) per_class[std::string(to_string(el.cls))]++;
  }

  StageResult r;
  r.ok = failed == 0 && !interrupted;
  r.manifest = stage_manifest(cfg, "augment", {{"dataset", directory_digest(ws.documents(), ".json")}},
                              {{"documents", raw_docs.size()}, {"complete", complete}, {"failed", failed},
                               {"elements_per_class", per_class}, {"failures", failures}});
  if (r.ok) fs::remove_all(ws.augmented() / "partial");
  write_json_file(ws.augmented() / "manifest.json", r.manifest);
  if (interrupted)
    r.message = fmt::format("augment interrupted after the element limit ({} of {} documents done); rerun with --resume",
                            complete, raw_docs.size());
  else if (failed)
    r.message = fmt::format("augment: {} document(s) failed; partial results kept, rerun with --resume", failed);
  else
    r.message = fmt::format("augmented {} documents ({} already done)", complete, skipped);
  return r;
}

// ---------------------------------------------------------------------------
// corrupt

StageResult run_corrupt(const PipelineConfig& cfg, const StageOptions& opts) {
  const Workspace ws = workspace_of(cfg);
  const auto questions = dataset_questions(ws);
  const auto docs = augmented_documents(ws);
  if (cfg.roles.ner.empty()) throw ConfigError("roles.ner is required for corrupt");

  ProviderRegistry registry(cfg, opts.mode);
  auto ner = registry.ner(cfg.roles.ner);
  std::shared_ptr<providers::ChatClient> refiner;
  if (!cfg.roles.refiner.empty()) refiner = registry.chat(cfg.roles.refiner);

  EntityTaxonomy taxonomy = EntityTaxonomy::standard();
  taxonomy.apply_overrides(cfg.taxonomy_thresholds);

  fs::create_directories(ws.pools());
  std::map<std::string, extract::EntityPool> pools;
  json skipped_elements = json::array();
  for (const auto& [id, doc] : docs) {
    const fs::path pool_path = ws.pools() / (id + ".jsonl");
    extract::EntityPool pool;
    if (opts.resume && fs::exists(pool_path)) {
      pool = extract::load_pool(pool_path, id);
    } else {
      pool = extract::build_entity_pool(*ner, taxonomy, doc, cfg.workers);
      save_pool(pool_path, pool);
    }
    extract::validate_pool(pool, doc, taxonomy);
    for (const auto& s : pool.skipped)
      skipped_elements.push_back({{"document", id}, {"page", s.page}, {"element_id", s.element_id}, {"error", s.error}});
    pools.emplace(id, std::move(pool));
  }

  std::vector<std::vector<extract::Entity>> q_entities(questions.size());
  std::vector<std::optional<std::string>> q_errors(questions.size());
  parallel_for(questions.size(), cfg.workers, [&](std::size_t i) {
    try {
      q_entities[i] = extract::extract_question_entities(*ner, taxonomy, questions[i]);
    } catch (const Error& e) {
      spdlog::warn("question '{}' skipped: {}", questions[i].id, e.what());
      q_errors[i] = e.what();
    }
  });
  std::vector<json> entity_rows;
  json question_failures = json::array();
  std::vector<corrupt::CorruptionSource> sources;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    const auto& q = questions[i];
    if (q_errors[i]) {
      question_failures.push_back({{"question_id", q.id}, {"error", *q_errors[i]}});
      continue;
    }
    json ents = json::array();
    for (const auto& e : q_entities[i]) ents.push_back(e);
    entity_rows.push_back({{"question_id", q.id}, {"entities", ents}});
    auto doc_it = docs.find(q.document_id);
    if (doc_it == docs.end())
      throw StateError(fmt::format("question '{}' references unknown document '{}'", q.id, q.document_id));
    sources.push_back({q, doc_it->second.source_dataset, q_entities[i], &pools.at(q.document_id)});
  }
  write_jsonl(ws.pools() / "questions.jsonl", entity_rows);
  std::size_t pool_total = 0;
  for (const auto& [_, p] : pools) pool_total += p.entities.size();
  write_json_file(ws.pools() / "manifest.json",
                  stage_manifest(cfg, "extract", {{"augmented", directory_digest(ws.augmented() / "documents", ".json")}},
                                 {{"pool_entities", pool_total}, {"skipped_elements", skipped_elements},
                                  {"question_failures", question_failures}}));

  corrupt::GenerateOptions go;
  go.seeds = cfg.seeds;
  go.complexities = cfg.complexities;
  go.variants = cfg.variants_per_question;
  go.filter = cfg.candidate_filter;
  go.workers = cfg.workers;
  auto generated = corrupt::generate_dataset(sources, go, refiner.get());

  fs::create_directories(ws.corrupted());
  corrupt::save_corrupted(ws.corrupted() / "corrupted.jsonl", generated.records);
  StageResult r;
  json counts = corrupt::to_json(generated.manifest);
  counts["records"] = generated.records.size();
  counts["source_questions"] = questions.size();
  r.manifest = stage_manifest(cfg, "corrupt",
                              {{"augmented", directory_digest(ws.augmented() / "documents", ".json")},
                               {"questions", file_sha256(ws.questions())},
                               {"pools", directory_digest(ws.pools(), ".jsonl")}},
                              counts);
  write_json_file(ws.corrupted() / "manifest.json", r.manifest);
  r.message = fmt::format("generated {} corrupted questions from {} source questions", generated.records.size(),
                          questions.size());
  return r;
}

// ---------------------------------------------------------------------------
// verify

StageResult run_verify(const PipelineConfig& cfg, const StageOptions& opts) {
  const Workspace ws = workspace_of(cfg);
  const fs::path corrupted_path = ws.corrupted() / "corrupted.jsonl";
  require(corrupted_path, "corrupted dataset", "corrupt");
  const auto records = corrupt::load_corrupted(corrupted_path);
  const auto docs = augmented_documents(ws);
  if (cfg.roles.judge.empty()) throw ConfigError("roles.judge is required for verify");
  ProviderRegistry registry(cfg, opts.mode);
  auto judge = registry.chat(cfg.roles.judge);

  fs::create_directories(ws.verified());
  const fs::path outcomes_path = ws.verified() / "outcomes.jsonl";
  const fs::path verdicts_path = ws.verified() / "verdicts.jsonl";
  std::map<std::string, verify::QuestionVerification> done;
  if (opts.resume && fs::exists(outcomes_path)) {
    for (const auto& row : read_jsonl(outcomes_path)) {
      verify::QuestionVerification qv;
      qv.question_id = row.at("question_id").get<std::string>();
      qv.outcome = verify::parse_outcome(row.at("outcome").get<std::string>());
      qv.reason = row.value("reason", std::string{});
      done.emplace(qv.question_id, std::move(qv));
    }
    if (fs::exists(verdicts_path))
      for (const auto& row : read_jsonl(verdicts_path)) {
        auto v = row.get<verify::JudgeVerdict>();
        if (auto it = done.find(v.question_id); it != done.end()) it->second.verdicts.push_back(std::move(v));
      }
  } else {
    fs::remove(outcomes_path);
    fs::remove(verdicts_path);
  }

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (!done.count(records[i].id)) pending.push_back(i);
  bool interrupted = false;
  if (opts.limit && pending.size() > *opts.limit) {
    pending.resize(*opts.limit);
    interrupted = true;
  }

  std::vector<std::optional<verify::QuestionVerification>> fresh(records.size());
  {
    JsonlAppender outcomes_out(outcomes_path);
    JsonlAppender verdicts_out(verdicts_path);
    verify::VerifyOptions vo;
    vo.short_circuit = cfg.short_circuit;
    std::mutex write_mu;
    parallel_for(pending.size(), cfg.workers, [&](std::size_t k) {
      const auto& cq = records[pending[k]];
      auto doc_it = docs.find(cq.document_id);
      if (doc_it == docs.end())
        throw StateError(fmt::format("question '{}' references unknown document '{}'", cq.id, cq.document_id));
      auto qv = verify::verify_question(cq, doc_it->second, ws.documents(), *judge, vo);
      {
        std::lock_guard lock(write_mu);
        for (const auto& v : qv.verdicts) verdicts_out.append(v);
        outcomes_out.append({{"question_id", qv.question_id}, {"outcome", verify::to_string(qv.outcome)}, {"reason", qv.reason}});
      }
      fresh[pending[k]] = std::move(qv);
    });
  }

  std::map<std::string, std::size_t> outcome_counts;
  std::map<int, std::size_t> kept_per_complexity;
  std::vector<json> outcome_rows, verdict_rows;
  std::vector<corrupt::CorruptedQuestion> unanswerable;
  std::size_t judged = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const verify::QuestionVerification* qv = nullptr;
    if (fresh[i]) qv = &*fresh[i];
    else if (auto it = done.find(records[i].id); it != done.end()) qv = &it->second;
    if (!qv) continue;
    ++judged;
    outcome_counts[std::string(verify::to_string(qv->outcome))]++;
    outcome_rows.push_back({{"question_id", qv->question_id}, {"outcome", verify::to_string(qv->outcome)}, {"reason", qv->reason}});
    for (const auto& v : qv->verdicts) verdict_rows.emplace_back(v);
    if (qv->outcome == verify::Outcome::VerifiedUnanswerable) {
      unanswerable.push_back(records[i]);
      kept_per_complexity[records[i].complexity]++;
    }
  }

  StageResult r;
  r.ok = !interrupted;
  json kept = json::object();
  for (const auto& [c, n] : kept_per_complexity) kept[fmt::format("C{}", c)] = n;
  r.manifest = stage_manifest(
      cfg, "verify",
      {{"corrupted", file_sha256(corrupted_path)}, {"augmented", directory_digest(ws.augmented() / "documents", ".json")}},
      {{"questions", records.size()},
       {"judged", judged},
       {"outcomes", outcome_counts},
       {"verified_unanswerable_per_complexity", kept},
       {"unanswerable_rate", judged ? static_cast<double>(unanswerable.size()) / static_cast<double>(judged) : 0.0}});
  if (!interrupted) {
    write_jsonl(outcomes_path, outcome_rows);
    write_jsonl(verdicts_path, verdict_rows);
    corrupt::save_corrupted(ws.verified() / "unanswerable.jsonl", unanswerable);
    write_json_file(ws.verified() / "manifest.json", r.manifest);
    r.message = fmt::format("verified {} questions: {} unanswerable on every page", judged, unanswerable.size());
  } else {
    r.message = fmt::format("verify interrupted after {} of {} questions; rerun with --resume", judged, records.size());
  }
  return r;
}

// ---------------------------------------------------------------------------
// export

StageResult run_export(const PipelineConfig& cfg, const StageOptions&) {
  const Workspace ws = workspace_of(cfg);
  const fs::path unanswerable_path = ws.verified() / "unanswerable.jsonl";
  require(unanswerable_path, "verified questions", "verify");
  const auto verified = corrupt::load_corrupted(unanswerable_path);
  const auto decisions = verify::load_decisions(ws.decisions());
  auto exported = verify::export_verified(verified, decisions);
  corrupt::save_corrupted(ws.verified() / "exported.jsonl", exported.records);
  StageResult r;
  r.manifest = stage_manifest(cfg, "export",
                              {{"unanswerable", file_sha256(unanswerable_path)},
                               {"decisions", fs::exists(ws.decisions()) ? file_sha256(ws.decisions()) : std::string()}},
                              verify::to_json(exported.manifest));
  write_json_file(ws.verified() / "export_manifest.json", r.manifest);
  r.message = fmt::format("exported {} of {} verified questions (review coverage {:.0f}%)", exported.records.size(),
                          verified.size(), 100 * exported.manifest.review_coverage);
  return r;
}

// ---------------------------------------------------------------------------
// evaluate

StageResult run_evaluate(const PipelineConfig& cfg, const StageOptions& opts) {
  const Workspace ws = workspace_of(cfg);
  const StageResult exported = run_export(cfg, opts);
  spdlog::info("{}", exported.message);
  const auto questions = corrupt::load_corrupted(ws.verified() / "exported.jsonl");
  const auto docs = augmented_documents(ws);

  ProviderRegistry registry(cfg, opts.mode);
  const auto model_names = opts.models.empty() ? cfg.models : opts.models;
  if (model_names.empty()) throw ConfigError("no models configured for evaluate");
  std::vector<std::shared_ptr<providers::ChatClient>> clients;
  std::vector<eval::ModelHandle> handles;
  for (const auto& m : model_names) {
    clients.push_back(registry.chat(m));
    handles.push_back({m, clients.back().get()});
  }
  std::shared_ptr<providers::ChatClient> standardizer;
  if (!cfg.roles.standardizer.empty()) standardizer = registry.chat(cfg.roles.standardizer);

  eval::MatrixOptions mo;
  mo.variants = cfg.prompt_variants;
  if (!opts.variants.empty()) {
    mo.variants.clear();
    for (const auto& v : opts.variants) mo.variants.push_back(eval::PromptVariant::parse(v));
  }
  mo.window_sizes = opts.window_sizes.empty() ? cfg.window_sizes : opts.window_sizes;
  mo.stride = cfg.window_stride;
  mo.max_window = cfg.max_window;
  mo.workers = cfg.workers;
  mo.resume = opts.resume;
  mo.cell_budget = opts.limit;

  const auto summary = eval::run_matrix(questions, docs, ws.documents(), handles, standardizer.get(), mo, ws.results());
  StageResult r;
  r.ok = !summary.interrupted;
  json variants = json::array();
  for (const auto& v : mo.variants) variants.push_back(v.name());
  r.manifest = stage_manifest(cfg, "evaluate",
                              {{"exported", file_sha256(ws.verified() / "exported.jsonl")},
                               {"augmented", directory_digest(ws.augmented() / "documents", ".json")}},
                              eval::to_json(summary));
  r.manifest["seed"] = cfg.seed;
  r.manifest["providers"] = registry.describe();
  r.manifest["models"] = model_names;
  r.manifest["variants"] = variants;
  r.manifest["window_stride"] = mo.stride;
  r.manifest["provider_mode"] = opts.mode == ProviderMode::Mock ? "mock" : "live";
  write_json_file(ws.results() / "run.json", r.manifest);
  if (summary.interrupted)
    r.message = fmt::format("evaluate interrupted: {} of {} records done; rerun with --resume", summary.records,
                            summary.expected);
  else
    r.message = fmt::format("evaluated {} records ({} failed, expected {})", summary.records, summary.failed,
                            summary.expected);
  if (!summary.interrupted && !summary.conserved()) {
    r.ok = false;
    r.message += "; record count does not match the matrix size";
  }
  return r;
}

// ---------------------------------------------------------------------------
// report

StageResult run_report(const PipelineConfig& cfg, const StageOptions& opts) {
  const Workspace ws = workspace_of(cfg);
  const fs::path results_path = ws.results() / "results.jsonl";
  require(results_path, "evaluation results", "evaluate");
  const fs::path run_path = ws.results() / "run.json";
  require(run_path, "evaluation run manifest", "evaluate");
  if (read_json_file(run_path).at("counts").value("interrupted", false))
    throw MissingArtifact("the evaluation run is incomplete; run evaluate --resume first");

  auto records = eval::load_records(results_path);
  const auto questions = corrupt::load_corrupted(ws.verified() / "exported.jsonl");
  const auto docs = augmented_documents(ws);
  auto ctx = metrics::JoinContext::build(questions, docs);
  ctx.counted_classes = cfg.page_element_classes;
  if (!opts.dataset_filter.empty())
    std::erase_if(records, [&](const eval::EvaluationRecord& r) {
      auto it = ctx.questions.find(r.question_id);
      return it == ctx.questions.end() || it->second->source_dataset != opts.dataset_filter;
    });

  metrics::ReportOptions ro;
  ro.pooled_acc_p = cfg.pooled_acc_p;
  if (!opts.groups.empty()) {
    ro.dimensions.clear();
    for (const auto& g : opts.groups) ro.dimensions.push_back(metrics::parse_dimension(g));
  }
  const auto report = metrics::compute_report(records, ctx, ro);
  metrics::emit_report(report, ws.report());
  StageResult r;
  r.manifest = stage_manifest(cfg, "report", {{"results", file_sha256(results_path)}},
                              {{"records", records.size()}, {"cells", report.cells.size()}});
  write_json_file(ws.report() / "manifest.json", r.manifest);
  r.message = fmt::format("wrote {} report cells to {}", report.cells.size(), ws.report().string());
  return r;
}

}  // namespace vrduqa::service
