#pragma once

// Source questions: questions.jsonl rows {id, document_id, text, answers}.

#include <string>
#include <vector>

#include "vrduqa/io.hpp"

namespace vrduqa {

struct Question {
  std::string id;
  std::string document_id;
  std::string text;
  std::vector<std::string> answers;

  friend bool operator==(const Question&, const Question&) = default;
};

void to_json(json& j, const Question& q);
void from_json(const json& j, Question& q);

/// Errors name the file and line of the offending record.
std::vector<Question> load_questions(const fs::path& path);
void save_questions(const fs::path& path, const std::vector<Question>& questions);

}  // namespace vrduqa
