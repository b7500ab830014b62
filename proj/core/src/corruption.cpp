#include "vrduqa/corruption.hpp"

#include <algorithm>
#include <cctype>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "vrduqa/error.hpp"
#include "vrduqa/parallel.hpp"
#include "vrduqa/prompts.hpp"
#include "vrduqa/rng.hpp"

namespace vrduqa::corrupt {

namespace {

json original_json(const extract::Entity& e) {
  const auto& q = e.question();
  return {{"surface", e.surface}, {"fine_type", e.fine_type}, {"macro", to_string(e.macro)},
          {"score", e.score},     {"start", q.start},         {"end", q.end}};
}

json substitute_json(const extract::Entity& e) {
  const auto& s = e.element();
  return {{"surface", e.surface},
          {"fine_type", e.fine_type},
          {"macro", to_string(e.macro)},
          {"score", e.score},
          {"page", s.page},
          {"element_id", s.element_id},
          {"element_class", to_string(s.element_class)},
          {"quadrant", to_string(s.quadrant)},
          {"start", s.start},
          {"end", s.end}};
}

}  // namespace

void to_json(json& j, const CorruptedQuestion& q) {
  json reps = json::array();
  for (const auto& r : q.replacements)
    reps.push_back({{"original", original_json(r.original)}, {"substitute", substitute_json(r.substitute)}});
  j = json{{"id", q.id},
           {"source_question_id", q.source_question_id},
           {"document_id", q.document_id},
           {"source_dataset", q.source_dataset},
           {"original_text", q.original_text},
           {"corrupted_text", q.corrupted_text},
           {"refined_text", q.refined_text},
           {"complexity", q.complexity},
           {"variant", q.variant},
           {"replacements", reps},
           {"rng_seed", q.rng_seed},
           {"unrefined_flag", q.unrefined_flag}};
}

void from_json(const json& j, CorruptedQuestion& q) {
  q.id = j.at("id").get<std::string>();
  q.source_question_id = j.at("source_question_id").get<std::string>();
  q.document_id = j.at("document_id").get<std::string>();
  q.source_dataset = j.value("source_dataset", std::string{});
  q.original_text = j.at("original_text").get<std::string>();
  q.corrupted_text = j.at("corrupted_text").get<std::string>();
  q.refined_text = j.at("refined_text").get<std::string>();
  q.complexity = j.at("complexity").get<int>();
  q.variant = j.value("variant", 0);
  q.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  q.unrefined_flag = j.value("unrefined_flag", false);
  q.replacements.clear();
  for (const auto& r : j.at("replacements")) {
    const json& o = r.at("original");
    const json& s = r.at("substitute");
    Replacement rep;
    rep.original = {o.at("surface").get<std::string>(), o.at("fine_type").get<std::string>(),
                    parse_macro_category(o.at("macro").get<std::string>()), o.value("score", 0.0),
                    extract::QuestionSource{q.source_question_id, o.value("start", std::size_t{0}),
                                            o.value("end", std::size_t{0})}};
    rep.substitute = {s.at("surface").get<std::string>(), s.at("fine_type").get<std::string>(),
                      parse_macro_category(s.at("macro").get<std::string>()), s.value("score", 0.0),
                      extract::ElementSource{q.document_id, s.at("page").get<int>(),
                                             s.at("element_id").get<std::string>(),
                                             parse_element_class(s.at("element_class").get<std::string>()),
                                             parse_quadrant(s.at("quadrant").get<std::string>()),
                                             s.value("start", std::size_t{0}), s.value("end", std::size_t{0})}};
    q.replacements.push_back(std::move(rep));
  }
  if (q.complexity < 1 || q.complexity > kMaxComplexity ||
      q.replacements.size() != static_cast<std::size_t>(q.complexity))
    throw IngestionError(fmt::format("corrupted question '{}': complexity {} with {} replacements", q.id,
                                     q.complexity, q.replacements.size()));
}

std::vector<CorruptedQuestion> load_corrupted(const fs::path& path) {
  std::vector<CorruptedQuestion> out;
  for_each_jsonl(path, [&](const json& row, std::size_t) { out.push_back(row.get<CorruptedQuestion>()); });
  return out;
}

void save_corrupted(const fs::path& path, const std::vector<CorruptedQuestion>& records) {
  std::vector<json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.emplace_back(r);
  write_jsonl(path, rows);
}

bool same_surface(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](unsigned char x, unsigned char y) {
           return std::tolower(x) == std::tolower(y);
         });
}

bool CandidateFilter::admits(const extract::Entity& substitute) const {
  const auto& s = substitute.element();
  if (!element_classes.empty() && !element_classes.count(s.element_class)) return false;
  switch (relation) {
    case PageRelation::Any: return true;
    case PageRelation::InPage: return s.page == target_page;
    case PageRelation::OutPage: return s.page != target_page;
  }
  return true;
}

std::vector<std::vector<extract::Entity>> candidate_map(const std::vector<extract::Entity>& question_entities,
                                                        const extract::EntityPool& pool,
                                                        const CandidateFilter& filter) {
  const auto index = pool.by_type();
  std::vector<std::vector<extract::Entity>> out(question_entities.size());
  for (std::size_t i = 0; i < question_entities.size(); ++i) {
    const auto& q = question_entities[i];
    auto it = index.find(q.fine_type);
    if (it == index.end()) continue;
    for (std::size_t idx : it->second) {
      const auto& cand = pool.entities[idx];
      if (!same_surface(cand.surface, q.surface) && filter.admits(cand)) out[i].push_back(cand);
    }
  }
  return out;
}

namespace {

bool overlaps(const extract::Entity& a, const extract::Entity& b) {
  const auto& x = a.question();
  const auto& y = b.question();
  return x.start < y.end && y.start < x.end;
}

// All k-subsets (ascending index order) of `eligible` with pairwise disjoint spans.
void enumerate_subsets(const std::vector<extract::Entity>& entities, const std::vector<std::size_t>& eligible,
                       std::size_t k, std::size_t from, std::vector<std::size_t>& current,
                       std::vector<std::vector<std::size_t>>& out) {
  if (current.size() == k) {
    out.push_back(current);
    return;
  }
  for (std::size_t i = from; i < eligible.size(); ++i) {
    const std::size_t cand = eligible[i];
    const bool clash = std::any_of(current.begin(), current.end(),
                                   [&](std::size_t c) { return overlaps(entities[c], entities[cand]); });
    if (clash) continue;
    current.push_back(cand);
    enumerate_subsets(entities, eligible, k, i + 1, current, out);
    current.pop_back();
  }
}

}  // namespace

CorruptedQuestion corrupt_question(const Question& question, const std::vector<extract::Entity>& question_entities,
                                   const std::vector<std::vector<extract::Entity>>& candidates, int complexity,
                                   std::uint64_t seed, int variant) {
  if (complexity < 1 || complexity > kMaxComplexity)
    throw ConfigError(fmt::format("complexity {} outside 1..{}", complexity, kMaxComplexity));
  if (candidates.size() != question_entities.size())
    throw StateError("candidate map does not match the question entities");

  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < question_entities.size(); ++i) {
    const auto& e = question_entities[i];
    const auto& src = e.question();
    if (candidates[i].empty() || src.end > question.text.size() ||
        question.text.compare(src.start, src.end - src.start, e.surface) != 0)
      continue;
    eligible.push_back(i);
  }
  std::vector<std::vector<std::size_t>> subsets;
  std::vector<std::size_t> current;
  enumerate_subsets(question_entities, eligible, static_cast<std::size_t>(complexity), 0, current, subsets);
  if (subsets.empty())
    throw NotEnoughCandidates(fmt::format("question '{}': {} eligible entities, complexity {} requested",
                                          question.id, eligible.size(), complexity));

  Rng rng(derive_seed(seed, fmt::format("{}#c{}#v{}", question.id, complexity, variant)));
  const auto& chosen = subsets[rng.uniform_index(subsets.size())];

  CorruptedQuestion cq;
  cq.id = fmt::format("{}-c{}-v{}", question.id, complexity, variant);
  cq.source_question_id = question.id;
  cq.document_id = question.document_id;
  cq.original_text = question.text;
  cq.complexity = complexity;
  cq.variant = variant;
  cq.rng_seed = seed;
  for (std::size_t idx : chosen) {
    const auto& cands = candidates[idx];
    cq.replacements.push_back({question_entities[idx], cands[rng.uniform_index(cands.size())]});
  }

  std::vector<const Replacement*> by_start;
  for (const auto& r : cq.replacements) by_start.push_back(&r);
  std::sort(by_start.begin(), by_start.end(),
            [](const Replacement* l, const Replacement* r) { return l->original.question().start > r->original.question().start; });
  cq.corrupted_text = question.text;
  for (const Replacement* r : by_start) {
    const auto& src = r->original.question();
    cq.corrupted_text.replace(src.start, src.end - src.start, r->substitute.surface);
  }
  return cq;
}

std::string clean_refinement(std::string_view reply) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!reply.empty() && is_space(reply.front())) reply.remove_prefix(1);
  while (!reply.empty() && is_space(reply.back())) reply.remove_suffix(1);
  if (reply.size() >= 2 && ((reply.front() == '"' && reply.back() == '"') ||
                            (reply.front() == '\'' && reply.back() == '\''))) {
    reply.remove_prefix(1);
    reply.remove_suffix(1);
  }
  return std::string(reply);
}

CorruptedQuestion refine(CorruptedQuestion cq, providers::ChatClient& refiner) {
  std::vector<std::string> surfaces;
  for (const auto& r : cq.replacements) surfaces.push_back(r.substitute.surface);
  providers::ChatRequest req;
  req.user = prompts::refinement_prompt(cq.original_text, cq.corrupted_text, surfaces);
  for (int attempt = 0; attempt < 2; ++attempt) {
    req.cache_salt = attempt;
    std::string text;
    try {
      text = clean_refinement(refiner.complete(req).text);
    } catch (const ProviderError& e) {
      spdlog::warn("refine '{}': {}", cq.id, e.what());
      break;
    }
    const bool preserved = !text.empty() && std::all_of(surfaces.begin(), surfaces.end(), [&](const std::string& s) {
      return text.find(s) != std::string::npos;
    });
    if (preserved) {
      cq.refined_text = std::move(text);
      cq.unrefined_flag = false;
      return cq;
    }
  }
  cq.refined_text = cq.corrupted_text;
  cq.unrefined_flag = true;
  return cq;
}

json to_json(const GenerationManifest& m) {
  json counts = json::object();
  for (const auto& [dataset, per_c] : m.counts) {
    json row = json::object();
    for (const auto& [c, n] : per_c) row[fmt::format("C{}", c)] = n;
    counts[dataset] = row;
  }
  json failures = json::array();
  for (const auto& f : m.failures)
    failures.push_back({{"question_id", f.question_id}, {"complexity", f.complexity}, {"variant", f.variant},
                        {"seed", f.seed}, {"reason", f.reason}});
  return {{"counts", counts}, {"failures", failures}, {"unrefined", m.unrefined}};
}

GeneratedDataset generate_dataset(const std::vector<CorruptionSource>& sources, const GenerateOptions& options,
                                  providers::ChatClient* refiner) {
  for (int c : options.complexities)
    if (c < 1 || c > kMaxComplexity) throw ConfigError(fmt::format("complexity {} outside 1..{}", c, kMaxComplexity));
  if (options.variants < 1) throw ConfigError("variants must be >= 1");
  if (options.seeds.empty()) throw ConfigError("at least one seed is required");

  GeneratedDataset out;
  struct Slot {
    std::optional<CorruptedQuestion> record;
    std::optional<GenerationFailure> failure;
  };
  std::vector<Slot> slots;
  for (const auto& src : sources) {
    if (!src.pool) throw StateError(fmt::format("question '{}' has no entity pool", src.question.id));
    const auto candidates = candidate_map(src.entities, *src.pool, options.filter);
    for (int c : options.complexities) out.manifest.counts[src.source_dataset][c];
    for (std::uint64_t seed : options.seeds)
      for (int c : options.complexities) {
        std::vector<std::string> seen;
        for (int v = 0; v < options.variants; ++v) {
          Slot slot;
          try {
            auto cq = corrupt_question(src.question, src.entities, candidates, c, seed, v);
            cq.source_dataset = src.source_dataset;
            if (options.seeds.size() > 1) cq.id += fmt::format("-s{}", seed);
            if (std::find(seen.begin(), seen.end(), cq.corrupted_text) != seen.end()) {
              slot.failure = GenerationFailure{src.question.id, c, v, seed, "duplicate variant"};
            } else {
              seen.push_back(cq.corrupted_text);
              slot.record = std::move(cq);
            }
          } catch (const NotEnoughCandidates& e) {
            slot.failure = GenerationFailure{src.question.id, c, v, seed, e.what()};
          }
          slots.push_back(std::move(slot));
          if (slots.back().failure && slots.back().failure->reason != "duplicate variant") break;
        }
      }
  }

  parallel_for(slots.size(), options.workers, [&](std::size_t i) {
    auto& rec = slots[i].record;
    if (!rec) return;
    if (refiner)
      *rec = refine(std::move(*rec), *refiner);
    else
      rec->refined_text = rec->corrupted_text;
  });

  for (auto& slot : slots) {
    if (slot.failure) out.manifest.failures.push_back(std::move(*slot.failure));
    if (!slot.record) continue;
    out.manifest.counts[slot.record->source_dataset][slot.record->complexity]++;
    if (slot.record->unrefined_flag) ++out.manifest.unrefined;
    out.records.push_back(std::move(*slot.record));
  }
  return out;
}

}  // namespace vrduqa::corrupt
