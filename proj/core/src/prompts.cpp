#include "vrduqa/prompts.hpp"

namespace vrduqa::prompts {

namespace {

std::string py_str_repr(const std::string& s) {
  const bool has_single = s.find('\'') != std::string::npos;
  const bool has_double = s.find('"') != std::string::npos;
  const char quote = has_single && !has_double ? '"' : '\'';
  std::string out(1, quote);
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c == quote) out += '\\';
        out += c;
    }
  }
  out += quote;
  return out;
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  for (;;) {
    const auto nl = text.find('\n', pos);
    lines.emplace_back(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return lines;
}

bool strip_suffix(std::string& line, std::string_view suffix) {
  if (line.size() >= suffix.size() && line.compare(line.size() - suffix.size(), suffix.size(), suffix) == 0) {
    line.resize(line.size() - suffix.size());
    return true;
  }
  return false;
}

}  // namespace

std::string python_list_repr(const std::vector<std::string>& items) {
  std::string out = "[";
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += py_str_repr(items[i]);
  }
  return out + "]";
}

std::string fill(std::string_view tmpl, const std::vector<std::pair<std::string, std::string>>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      bool replaced = false;
      for (const auto& [name, value] : values) {
        if (tmpl.compare(i + 1, name.size(), name) == 0 && i + 1 + name.size() < tmpl.size() &&
            tmpl[i + 1 + name.size()] == '}') {
          out += value;
          i += name.size() + 2;
          replaced = true;
          break;
        }
      }
      if (replaced) continue;
    }
    out += tmpl[i++];
  }
  return out;
}

std::string refinement_prompt(const std::string& original_question, const std::string& corrupted_question,
                              const std::vector<std::string>& corrupted_entities) {
  return fill(kRefinementTemplate, {{"original_question", original_question},
                                    {"corrupted_question", corrupted_question},
                                    {"list(all_corrupted_entities)", python_list_repr(corrupted_entities)}});
}

std::string judge_prompt(const std::string& ocr_text,
                         const std::vector<std::pair<std::string, std::string>>& mappings,
                         const std::string& question) {
  std::string entities;
  for (std::size_t i = 0; i < mappings.size(); ++i) {
    if (i) entities += '\n';
    entities += mappings[i].first + " --> " + mappings[i].second;
  }
  return fill(kJudgeTemplate, {{"ocr_text", ocr_text}, {"entities_string", entities}, {"question", question}});
}

std::string vqa_prompt(const std::string& question, const std::optional<std::string>& ocr_text,
                       bool explicit_unanswerable) {
  const auto lines = split_lines(kVqaTemplate);
  std::vector<std::string> kept;
  bool drop_next_blank = false;
  for (auto line : lines) {
    if (drop_next_blank) {
      drop_next_blank = false;
      if (line.empty()) continue;
    }
    const bool optional = strip_suffix(line, " #OPTIONAL") || strip_suffix(line, " # OPTIONAL");
    if (optional) {
      const bool is_ocr_line = line.find("{ocr_text}") != std::string::npos;
      const bool keep = is_ocr_line ? ocr_text.has_value() : explicit_unanswerable;
      if (!keep) {
        drop_next_blank = is_ocr_line;
        continue;
      }
    }
    kept.push_back(std::move(line));
  }
  std::string tmpl;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (i) tmpl += '\n';
    tmpl += kept[i];
  }
  return fill(tmpl, {{"ocr_text", ocr_text.value_or("")}, {"question", question}});
}

std::string standardization_prompt(const std::string& answer) {
  return fill(kStandardizationTemplate, {{"answer", answer}});
}

}  // namespace vrduqa::prompts
