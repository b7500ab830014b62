#include "vrduqa/question.hpp"

namespace vrduqa {

void to_json(json& j, const Question& q) {
  j = json{{"id", q.id}, {"document_id", q.document_id}, {"text", q.text}, {"answers", q.answers}};
}

void from_json(const json& j, Question& q) {
  q.id = j.at("id").get<std::string>();
  q.document_id = j.at("document_id").get<std::string>();
  q.text = j.at("text").get<std::string>();
  q.answers = j.value("answers", std::vector<std::string>{});
}

std::vector<Question> load_questions(const fs::path& path) {
  std::vector<Question> out;
  for_each_jsonl(path, [&](const json& row, std::size_t) { out.push_back(row.get<Question>()); });
  return out;
}

void save_questions(const fs::path& path, const std::vector<Question>& questions) {
  std::vector<json> rows;
  rows.reserve(questions.size());
  for (const auto& q : questions) rows.emplace_back(q);
  write_jsonl(path, rows);
}

}  // namespace vrduqa
