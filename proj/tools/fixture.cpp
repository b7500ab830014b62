#include "fixture.hpp"

#include <fmt/format.h>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "vrduqa/document_io.hpp"
#include "vrduqa/error.hpp"
#include "vrduqa/image.hpp"
#include "vrduqa/question.hpp"

namespace vrduqa::fixture {

namespace {

cv::Scalar fill_of(ElementClass cls) {
  switch (cls) {
    case ElementClass::Title: return {200, 220, 240};
    case ElementClass::Figure: return {210, 240, 210};
    case ElementClass::Table: return {240, 225, 205};
    case ElementClass::Abandon: return {225, 225, 225};
    case ElementClass::IsolatedFormula: return {240, 210, 240};
    default: return {235, 235, 235};
  }
}

}  // namespace

void render(const fs::path& fixture_path, const fs::path& out) {
  const json desc = read_json_file(fixture_path);
  const std::string dataset = desc.at("dataset").get<std::string>();
  const fs::path ds = out / "dataset";
  fs::create_directories(ds / "documents" / "images");
  std::vector<json> layout_rows;

  for (const auto& d : desc.at("documents")) {
    Document doc;
    doc.id = d.at("id").get<std::string>();
    doc.source_dataset = dataset;
    int index = 0;
    for (const auto& p : d.at("pages")) {
      Page page;
      page.index = ++index;
      page.width = p.at("width").get<int>();
      page.height = p.at("height").get<int>();
      page.image = fmt::format("images/{}-p{}.png", doc.id, page.index);
      cv::Mat img(page.height, page.width, CV_8UC3, cv::Scalar(255, 255, 255));
      for (const auto& e : p.at("elements")) {
        const auto cls = parse_element_class(e.at("class").get<std::string>());
        const auto box = e.at("bbox").get<BoundingBox>();
        const cv::Rect rect(static_cast<int>(box.x0), static_cast<int>(box.y0), static_cast<int>(box.width()),
                            static_cast<int>(box.height()));
        if (e.contains("text")) {
          cv::rectangle(img, rect, fill_of(cls), cv::FILLED);
          const std::string text = e.at("text").get<std::string>();
          if (!embed_text(img.data, img.cols, img.rows, rect.x + 4, rect.y + 4, rect.width - 8, rect.height - 8, text))
            throw IngestionError(fmt::format("{} page {}: text does not fit its box", doc.id, page.index));
        } else if (cls == ElementClass::IsolatedFormula) {
          cv::rectangle(img, rect, fill_of(cls), cv::FILLED);
        }
        layout_rows.push_back({{"document", doc.id},
                               {"page", page.index},
                               {"class", e.at("class")},
                               {"bbox", e.at("bbox")},
                               {"confidence", e.value("confidence", 1.0)}});
      }
      if (!cv::imwrite((ds / "documents" / page.image).string(), img))
        throw IngestionError(fmt::format("cannot write {}", page.image));
      doc.pages.push_back(std::move(page));
    }
    save_document(ds / "documents" / (doc.id + ".json"), doc);
  }

  std::vector<Question> questions;
  for (const auto& q : desc.at("questions")) questions.push_back(q.get<Question>());
  save_questions(ds / "questions.jsonl", questions);
  write_jsonl(ds / "layout.jsonl", layout_rows);

  for (const char* name : {"config.json", "mock.json"}) {
    const fs::path src = fixture_path.parent_path() / name;
    if (fs::exists(src)) fs::copy_file(src, out / name, fs::copy_options::overwrite_existing);
  }
}

}  // namespace vrduqa::fixture
