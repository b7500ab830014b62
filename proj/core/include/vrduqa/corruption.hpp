#pragma once

// Typed entity substitution. A question entity is replaced by a different
// entity of the same fine type found somewhere in the document; C = 1..3
// entities are replaced at once and the result is rewritten for fluency.

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vrduqa/extraction.hpp"

namespace vrduqa::corrupt {

inline constexpr int kMaxComplexity = 3;

struct Replacement {
  extract::Entity original;    // question provenance
  extract::Entity substitute;  // element provenance

  friend bool operator==(const Replacement&, const Replacement&) = default;
};

struct CorruptedQuestion {
  std::string id;
  std::string source_question_id;
  std::string document_id;
  std::string source_dataset;
  std::string original_text;
  std::string corrupted_text;
  std::string refined_text;
  int complexity = 1;
  int variant = 0;
  std::vector<Replacement> replacements;
  std::uint64_t rng_seed = 0;
  bool unrefined_flag = false;

  friend bool operator==(const CorruptedQuestion&, const CorruptedQuestion&) = default;
};

void to_json(json& j, const CorruptedQuestion& q);
void from_json(const json& j, CorruptedQuestion& q);

std::vector<CorruptedQuestion> load_corrupted(const fs::path& path);
void save_corrupted(const fs::path& path, const std::vector<CorruptedQuestion>& records);

/// ASCII case-insensitive equality.
bool same_surface(std::string_view a, std::string_view b);

/// Optional restriction of the substitutes a generator may use.
struct CandidateFilter {
  std::set<ElementClass> element_classes;  // empty = any class
  enum class PageRelation { Any, InPage, OutPage };
  PageRelation relation = PageRelation::Any;
  int target_page = 1;

  bool admits(const extract::Entity& substitute) const;
};

/// For each question entity, the pool entities of the same fine type whose
/// surface differs (case-insensitively), in pool order.
std::vector<std::vector<extract::Entity>> candidate_map(const std::vector<extract::Entity>& question_entities,
                                                        const extract::EntityPool& pool,
                                                        const CandidateFilter& filter = {});

/// Chooses `complexity` question entities with non-empty candidate lists and
/// pairwise disjoint spans (uniformly among all such sets), then one
/// substitute each (uniformly), and splices them in. Throws
/// NotEnoughCandidates when no such set exists, ConfigError when complexity is
/// outside 1..3. `refined_text` is left empty.
CorruptedQuestion corrupt_question(const Question& question, const std::vector<extract::Entity>& question_entities,
                                   const std::vector<std::vector<extract::Entity>>& candidates, int complexity,
                                   std::uint64_t seed, int variant = 0);

/// Strips whitespace and one layer of surrounding quotes from a refiner reply.
std::string clean_refinement(std::string_view reply);

/// Sends the refinement prompt. The reply is accepted when every substitute
/// surface occurs in it verbatim; otherwise one retry, then the corrupted text
/// is kept and `unrefined_flag` set. Provider failures take the same fallback.
CorruptedQuestion refine(CorruptedQuestion cq, providers::ChatClient& refiner);

struct CorruptionSource {
  Question question;
  std::string source_dataset;
  std::vector<extract::Entity> entities;
  const extract::EntityPool* pool = nullptr;
};

struct GenerateOptions {
  std::vector<std::uint64_t> seeds{0};
  std::vector<int> complexities{1, 2, 3};
  int variants = 1;
  CandidateFilter filter;
  std::size_t workers = 1;
};

struct GenerationFailure {
  std::string question_id;
  int complexity = 0;
  int variant = 0;
  std::uint64_t seed = 0;
  std::string reason;
};

struct GenerationManifest {
  /// dataset -> complexity -> emitted records
  std::map<std::string, std::map<int, std::size_t>> counts;
  std::vector<GenerationFailure> failures;
  std::size_t unrefined = 0;
};

json to_json(const GenerationManifest& m);

struct GeneratedDataset {
  std::vector<CorruptedQuestion> records;
  GenerationManifest manifest;
};

/// Attempts every (question, complexity, variant, seed). Variants that repeat
/// an earlier corrupted text of the same (question, complexity, seed) are
/// dropped as duplicates. With a null refiner the corrupted text is used as is.
GeneratedDataset generate_dataset(const std::vector<CorruptionSource>& sources, const GenerateOptions& options,
                                  providers::ChatClient* refiner);

}  // namespace vrduqa::corrupt
