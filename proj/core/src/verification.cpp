#include "vrduqa/verification.hpp"

#include <algorithm>
#include <cctype>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "vrduqa/augmentation.hpp"
#include "vrduqa/error.hpp"
#include "vrduqa/image.hpp"
#include "vrduqa/prompts.hpp"

namespace vrduqa::verify {

void to_json(json& j, const JudgeVerdict& v) {
  j = json{{"question_id", v.question_id},
           {"page", v.page_index},
           {"verification_result", v.verification_result},
           {"question_answer", v.question_answer},
           {"raw_response", v.raw_response},
           {"skipped", v.skipped},
           {"malformed", v.malformed}};
}

void from_json(const json& j, JudgeVerdict& v) {
  v.question_id = j.at("question_id").get<std::string>();
  v.page_index = j.at("page").get<int>();
  v.verification_result = j.at("verification_result").get<bool>();
  v.question_answer = j.value("question_answer", std::string{});
  v.raw_response = j.value("raw_response", std::string{});
  v.skipped = j.value("skipped", false);
  v.malformed = j.value("malformed", false);
}

providers::ChatRequest build_judge_prompt(const corrupt::CorruptedQuestion& cq, const Page& page,
                                          const fs::path& image_root) {
  std::vector<std::pair<std::string, std::string>> mappings;
  for (const auto& r : cq.replacements) mappings.emplace_back(r.original.surface, r.substitute.surface);
  providers::ChatRequest req;
  req.user = prompts::judge_prompt(augment::page_ocr_text(page), mappings, cq.refined_text);
  const fs::path image = image_root / page.image;
  req.images.push_back({read_file(image), image_mime(image)});
  return req;
}

namespace {

std::string strip_fences(std::string_view s) {
  std::string out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const auto nl = s.find('\n', pos);
    std::string_view line = s.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    std::string_view trimmed = line;
    while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.front()))) trimmed.remove_prefix(1);
    if (trimmed.substr(0, 3) == "```") {
      // Opening fence may carry a language tag, or the JSON itself on the same line.
      auto rest = trimmed.substr(3);
      auto brace = rest.find('{');
      if (brace != std::string_view::npos) {
        out.append(rest.substr(brace));
        out += '\n';
      }
    } else {
      out.append(line);
      out += '\n';
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  // Inline closing fences ("...}```").
  for (auto p = out.find("```"); p != std::string::npos; p = out.find("```")) out.erase(p, 3);
  return out;
}

bool coerce_bool(const json& v, bool& out) {
  if (v.is_boolean()) {
    out = v.get<bool>();
    return true;
  }
  if (!v.is_string()) return false;
  std::string s = v.get<std::string>();
  std::erase_if(s, [](unsigned char c) { return c == '\'' || c == '"' || std::isspace(c); });
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "true") {
    out = true;
    return true;
  }
  if (s == "false") {
    out = false;
    return true;
  }
  return false;
}

}  // namespace

JudgeVerdict parse_verdict(const std::string& raw) {
  const std::string body = strip_fences(raw);
  const auto first = body.find('{');
  const auto last = body.rfind('}');
  if (first == std::string::npos || last == std::string::npos || last < first)
    throw MalformedVerdict(fmt::format("no JSON object in judge reply: {:.120}", raw));
  json j = json::parse(body.substr(first, last - first + 1), nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw MalformedVerdict(fmt::format("judge reply is not valid JSON: {:.120}", raw));
  if (!j.contains("verification_result"))
    throw MalformedVerdict(fmt::format("judge reply lacks verification_result: {:.120}", raw));
  JudgeVerdict v;
  if (!coerce_bool(j["verification_result"], v.verification_result))
    throw MalformedVerdict(fmt::format("verification_result is not a boolean: {}", j["verification_result"].dump()));
  if (j.contains("question_answer"))
    v.question_answer = j["question_answer"].is_string() ? j["question_answer"].get<std::string>()
                                                          : j["question_answer"].dump();
  v.raw_response = raw;
  return v;
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::VerifiedUnanswerable: return "verified_unanswerable";
    case Outcome::AnswerableSomewhere: return "answerable_somewhere";
    case Outcome::Unverifiable: return "unverifiable";
  }
  return "unknown";
}

Outcome parse_outcome(std::string_view name) {
  for (Outcome o : {Outcome::VerifiedUnanswerable, Outcome::AnswerableSomewhere, Outcome::Unverifiable})
    if (to_string(o) == name) return o;
  throw IngestionError(fmt::format("unknown verification outcome '{}'", name));
}

Outcome outcome_from_verdicts(const std::vector<JudgeVerdict>& verdicts, std::size_t page_count) {
  std::size_t judged_false = 0;
  bool malformed = false;
  for (const auto& v : verdicts) {
    if (v.malformed) malformed = true;
    if (v.skipped || v.malformed) continue;
    if (v.verification_result) return Outcome::AnswerableSomewhere;
    ++judged_false;
  }
  return !malformed && judged_false == page_count ? Outcome::VerifiedUnanswerable : Outcome::Unverifiable;
}

QuestionVerification verify_question(const corrupt::CorruptedQuestion& cq, const Document& doc,
                                     const fs::path& image_root, providers::ChatClient& judge,
                                     const VerifyOptions& options) {
  QuestionVerification out;
  out.question_id = cq.id;
  bool answerable = false;
  for (const auto& page : doc.pages) {
    JudgeVerdict verdict;
    if (answerable && options.short_circuit) {
      verdict.question_id = cq.id;
      verdict.page_index = page.index;
      verdict.skipped = true;
      out.verdicts.push_back(std::move(verdict));
      continue;
    }
    providers::ChatRequest req = build_judge_prompt(cq, page, image_root);
    bool parsed = false;
    std::string last_raw;
    for (int attempt = 0; attempt < 2 && !parsed; ++attempt) {
      req.cache_salt = attempt;
      try {
        last_raw = judge.complete(req).text;
        verdict = parse_verdict(last_raw);
        parsed = true;
      } catch (const MalformedVerdict& e) {
        spdlog::warn("verify '{}' page {}: {}", cq.id, page.index, e.what());
      } catch (const ProviderError& e) {
        // An earlier answerable page already settles the outcome.
        out.outcome = answerable ? Outcome::AnswerableSomewhere : Outcome::Unverifiable;
        if (!answerable) out.reason = fmt::format("page {}: {}", page.index, e.what());
        return out;
      }
    }
    if (!parsed) {
      out.outcome = answerable ? Outcome::AnswerableSomewhere : Outcome::Unverifiable;
      if (!answerable) out.reason = fmt::format("page {}: malformed verdict after retry", page.index);
      verdict = JudgeVerdict{};
      verdict.raw_response = last_raw;
      verdict.question_id = cq.id;
      verdict.page_index = page.index;
      verdict.malformed = true;
      out.verdicts.push_back(std::move(verdict));
      return out;
    }
    verdict.question_id = cq.id;
    verdict.page_index = page.index;
    answerable = answerable || verdict.verification_result;
    out.verdicts.push_back(std::move(verdict));
  }
  out.outcome = outcome_from_verdicts(out.verdicts, doc.pages.size());
  return out;
}

std::string_view to_string(Decision d) { return d == Decision::Accept ? "accept" : "reject"; }

Decision parse_decision(std::string_view name) {
  if (name == "accept") return Decision::Accept;
  if (name == "reject") return Decision::Reject;
  throw IngestionError(fmt::format("decision must be 'accept' or 'reject', got '{}'", name));
}

void to_json(json& j, const ReviewDecision& d) {
  j = json{{"question_id", d.question_id},
           {"reviewer", d.reviewer},
           {"decision", to_string(d.decision)},
           {"note", d.note ? json(*d.note) : json(nullptr)},
           {"timestamp", d.timestamp}};
}

void from_json(const json& j, ReviewDecision& d) {
  d.question_id = j.at("question_id").get<std::string>();
  d.reviewer = j.at("reviewer").get<std::string>();
  d.decision = parse_decision(j.at("decision").get<std::string>());
  d.note.reset();
  if (j.contains("note") && j["note"].is_string()) d.note = j["note"].get<std::string>();
  d.timestamp = j.value("timestamp", std::string{});
}

std::vector<ReviewDecision> load_decisions(const fs::path& path) {
  std::vector<ReviewDecision> out;
  if (!fs::exists(path)) return out;
  for_each_jsonl(path, [&](const json& row, std::size_t) { out.push_back(row.get<ReviewDecision>()); });
  return out;
}

std::map<std::string, Decision> resolve_decisions(const std::vector<ReviewDecision>& decisions) {
  std::map<std::string, std::map<std::string, Decision>> latest;
  for (const auto& d : decisions) latest[d.question_id][d.reviewer] = d.decision;
  std::map<std::string, Decision> out;
  for (const auto& [qid, per_reviewer] : latest) {
    std::size_t accepts = 0;
    for (const auto& [_, d] : per_reviewer) accepts += d == Decision::Accept;
    out[qid] = 2 * accepts > per_reviewer.size() ? Decision::Accept : Decision::Reject;
  }
  return out;
}

json to_json(const ExportManifest& m) {
  return {{"verified", m.verified}, {"reviewed", m.reviewed},   {"accepted", m.accepted},
          {"rejected", m.rejected}, {"exported", m.exported},   {"review_coverage", m.review_coverage}};
}

ExportResult export_verified(const std::vector<corrupt::CorruptedQuestion>& verified,
                             const std::vector<ReviewDecision>& decisions) {
  const auto resolved = resolve_decisions(decisions);
  ExportResult out;
  out.manifest.verified = verified.size();
  for (const auto& cq : verified) {
    auto it = resolved.find(cq.id);
    if (it != resolved.end()) {
      ++out.manifest.reviewed;
      if (it->second == Decision::Reject) {
        ++out.manifest.rejected;
        continue;
      }
      ++out.manifest.accepted;
    }
    out.records.push_back(cq);
  }
  out.manifest.exported = out.records.size();
  out.manifest.review_coverage =
      verified.empty() ? 0.0 : static_cast<double>(out.manifest.reviewed) / static_cast<double>(verified.size());
  return out;
}

}  // namespace vrduqa::verify
