#pragma once

// Judge-based per-page answerability check, the human review gate and export
// of the verified unanswerable set.

#include <optional>
#include <string>
#include <vector>

#include "vrduqa/corruption.hpp"
#include "vrduqa/document.hpp"
#include "vrduqa/providers.hpp"

namespace vrduqa::verify {

struct JudgeVerdict {
  std::string question_id;
  int page_index = 0;
  bool verification_result = false;  // true = answerable on this page
  std::string question_answer;
  std::string raw_response;
  bool skipped = false;    // not judged: an earlier page was already answerable
  bool malformed = false;  // reply could not be parsed, even after the retry

  friend bool operator==(const JudgeVerdict&, const JudgeVerdict&) = default;
};

void to_json(json& j, const JudgeVerdict& v);
void from_json(const json& j, JudgeVerdict& v);

/// Judge request for one page: the filled template as a single user message
/// with the page image attached.
providers::ChatRequest build_judge_prompt(const corrupt::CorruptedQuestion& cq, const Page& page,
                                          const fs::path& image_root);

/// Strips code fences and surrounding prose, parses the JSON object and
/// coerces verification_result from a boolean or "true"/"false". Throws
/// MalformedVerdict otherwise.
JudgeVerdict parse_verdict(const std::string& raw);

enum class Outcome { VerifiedUnanswerable, AnswerableSomewhere, Unverifiable };

std::string_view to_string(Outcome o);
Outcome parse_outcome(std::string_view name);

struct QuestionVerification {
  std::string question_id;
  Outcome outcome = Outcome::Unverifiable;
  std::vector<JudgeVerdict> verdicts;  // one per page, in page order
  std::string reason;                  // set when unverifiable
};

/// Outcome implied by stored verdicts: answerable when any judged page is
/// true, unanswerable when all `page_count` pages were judged false, otherwise
/// unverifiable (malformed or missing pages).
Outcome outcome_from_verdicts(const std::vector<JudgeVerdict>& verdicts, std::size_t page_count);

struct VerifyOptions {
  bool short_circuit = true;
};

/// Judges pages in order. A malformed reply is retried once (with a distinct
/// cache salt); a second failure or a provider error makes the question
/// unverifiable.
QuestionVerification verify_question(const corrupt::CorruptedQuestion& cq, const Document& doc,
                                     const fs::path& image_root, providers::ChatClient& judge,
                                     const VerifyOptions& options = {});

enum class Decision { Accept, Reject };

std::string_view to_string(Decision d);
Decision parse_decision(std::string_view name);

struct ReviewDecision {
  std::string question_id;
  std::string reviewer;
  Decision decision = Decision::Accept;
  std::optional<std::string> note;
  std::string timestamp;

  friend bool operator==(const ReviewDecision&, const ReviewDecision&) = default;
};

void to_json(json& j, const ReviewDecision& d);
void from_json(const json& j, ReviewDecision& d);
std::vector<ReviewDecision> load_decisions(const fs::path& path);

/// Latest decision per (question, reviewer) in file order, then majority
/// across reviewers; a tie rejects.
std::map<std::string, Decision> resolve_decisions(const std::vector<ReviewDecision>& decisions);

struct ExportManifest {
  std::size_t verified = 0;
  std::size_t reviewed = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t exported = 0;
  double review_coverage = 0;  // reviewed / verified
};

json to_json(const ExportManifest& m);

struct ExportResult {
  std::vector<corrupt::CorruptedQuestion> records;
  ExportManifest manifest;
};

/// Verified-unanswerable records minus those whose resolved decision is Reject.
ExportResult export_verified(const std::vector<corrupt::CorruptedQuestion>& verified,
                             const std::vector<ReviewDecision>& decisions);

}  // namespace vrduqa::verify
