#include "support.hpp"

#include <algorithm>
#include <random>

#include <fmt/format.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "vrduqa/hashing.hpp"
#include "vrduqa/image.hpp"
#include "vrduqa/mock.hpp"
#include "vrduqa/taxonomy.hpp"

namespace vrduqa::testing {

fs::path source_dir() { return fs::path(VRDUQA_SOURCE_DIR); }
fs::path fixture_json() { return source_dir() / "tests" / "fixtures" / "synthetic" / "fixture.json"; }
fs::path golden(const std::string& name) { return source_dir() / "tests" / "golden" / name; }

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  std::random_device rd;
  path_ = fs::temp_directory_path() / fmt::format("vrduqa-test-{}-{}-{}", ::getpid(), counter++, rd());
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

providers::HttpReply chat_reply(const std::string& text) {
  json body{{"choices", json::array({{{"index", 0}, {"message", {{"role", "assistant"}, {"content", text}}}}})}};
  return {200, body.dump(), {}};
}

std::string request_text(const json& body) {
  std::string out;
  for (const auto& m : body.at("messages")) {
    const json& c = m.at("content");
    if (c.is_string()) {
      out += c.get<std::string>();
      continue;
    }
    for (const auto& part : c)
      if (part.at("type") == "text") out += part.at("text").get<std::string>();
  }
  return out;
}

std::vector<std::string> request_images(const json& body) {
  std::vector<std::string> out;
  for (const auto& m : body.at("messages")) {
    const json& c = m.at("content");
    if (!c.is_array()) continue;
    for (const auto& part : c) {
      if (part.at("type") != "image_url") continue;
      const std::string url = part.at("image_url").at("url").get<std::string>();
      out.push_back(base64_decode(url.substr(url.find(',') + 1)));
    }
  }
  return out;
}

providers::ProviderConfig chat_config(const std::string& name) {
  providers::ProviderConfig c;
  c.name = name;
  c.type = providers::ProviderType::OpenAiChat;
  c.endpoint = "http://stub.invalid/v1/chat/completions";
  c.model = name + "-model";
  return c;
}

std::shared_ptr<providers::ChatClient> stub_chat(const std::string& name, std::shared_ptr<StubEndpoint> endpoint,
                                                 const fs::path& cache_dir) {
  auto cache = cache_dir.empty() ? providers::ResponseCache{} : providers::ResponseCache(cache_dir);
  auto client = std::make_shared<providers::ProviderClient>(chat_config(name), std::move(endpoint), cache,
                                                            std::make_shared<providers::ManualClock>());
  return std::make_shared<providers::ChatClient>(client);
}

std::shared_ptr<providers::NerClient> stub_ner(std::shared_ptr<StubEndpoint> endpoint) {
  providers::ProviderConfig c;
  c.name = "ner";
  c.type = providers::ProviderType::Ner;
  c.endpoint = "http://stub.invalid/ner";
  auto client = std::make_shared<providers::ProviderClient>(c, std::move(endpoint), providers::ResponseCache{},
                                                            std::make_shared<providers::ManualClock>());
  return std::make_shared<providers::NerClient>(client);
}

void write_page_png(const fs::path& path, int width, int height,
                    const std::vector<std::pair<BoundingBox, std::string>>& boxes) {
  cv::Mat img(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
  for (const auto& [b, text] : boxes) {
    const cv::Rect rect(static_cast<int>(b.x0), static_cast<int>(b.y0), static_cast<int>(b.width()),
                        static_cast<int>(b.height()));
    cv::rectangle(img, rect, cv::Scalar(200, 200, 200), cv::FILLED);
    if (!text.empty() && !embed_text(img.data, width, height, rect.x + 4, rect.y + 4, rect.width - 8, rect.height - 8, text))
      throw std::runtime_error("text does not fit: " + text);
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), img)) throw std::runtime_error("cannot write " + path.string());
}

std::shared_ptr<providers::NerClient> lexicon_ner(const json& lexicon) {
  const auto script = mock::MockScript::parse(json{{"providers", {{"ner", {{"lexicon", lexicon}}}}}});
  auto ep = std::make_shared<mock::MockEndpoint>("ner", providers::ProviderType::Ner, script.providers.at("ner"));
  providers::ProviderConfig c;
  c.name = "ner";
  c.type = providers::ProviderType::Ner;
  c.endpoint = "http://stub.invalid/ner";
  auto client = std::make_shared<providers::ProviderClient>(c, std::move(ep), providers::ResponseCache{},
                                                            std::make_shared<providers::ManualClock>());
  return std::make_shared<providers::NerClient>(client);
}

// ---------------------------------------------------------------------------

double raster_iou(const BoundingBox& a, const BoundingBox& b) {
  const int x_lo = static_cast<int>(std::min(a.x0, b.x0)), x_hi = static_cast<int>(std::max(a.x1, b.x1));
  const int y_lo = static_cast<int>(std::min(a.y0, b.y0)), y_hi = static_cast<int>(std::max(a.y1, b.y1));
  long in_a = 0, in_b = 0, both = 0;
  for (int y = y_lo; y < y_hi; ++y)
    for (int x = x_lo; x < x_hi; ++x) {
      const double cx = x + 0.5, cy = y + 0.5;
      const bool ia = cx > a.x0 && cx < a.x1 && cy > a.y0 && cy < a.y1;
      const bool ib = cx > b.x0 && cx < b.x1 && cy > b.y0 && cy < b.y1;
      in_a += ia;
      in_b += ib;
      both += ia && ib;
    }
  return static_cast<double>(both) / static_cast<double>(in_a + in_b - both);
}

std::vector<std::size_t> naive_dedup(const std::vector<BoundingBox>& boxes, double threshold) {
  auto beats = [&](std::size_t i, std::size_t j) {  // i is considered before j
    return boxes[i].area() > boxes[j].area() || (boxes[i].area() == boxes[j].area() && i < j);
  };
  std::vector<int> state(boxes.size(), -1);  // -1 unknown, 0 dropped, 1 kept
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t j = 0; j < boxes.size(); ++j) {
      if (state[j] != -1) continue;
      bool undecided = false, dropped = false;
      for (std::size_t i = 0; i < boxes.size(); ++i) {
        if (i == j || !beats(i, j)) continue;
        if (state[i] == -1) undecided = true;
        else if (state[i] == 1 && iou(boxes[i], boxes[j]) > threshold) dropped = true;
      }
      if (dropped) state[j] = 0;
      else if (!undecided) state[j] = 1;
      else continue;
      changed = true;
    }
  }
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < boxes.size(); ++i)
    if (state[i] == 1) kept.push_back(i);
  return kept;
}

Quadrant naive_quadrant(const BoundingBox& b, int width, int height) {
  const double cx = (b.x0 + b.x1) / 2, cy = (b.y0 + b.y1) / 2;
  const bool right = cx > width / 2.0, bottom = cy > height / 2.0;
  if (!bottom) return right ? Quadrant::TopRight : Quadrant::TopLeft;
  return right ? Quadrant::BottomRight : Quadrant::BottomLeft;
}

NaiveScores naive_scores(const std::vector<const eval::EvaluationRecord*>& records) {
  std::set<std::string> ids;
  for (const auto* r : records) ids.insert(r->question_id);
  NaiveScores s;
  s.questions = ids.size();
  std::size_t all_correct = 0;
  double rate_sum = 0;
  for (const auto& id : ids) {
    std::size_t n = 0, k = 0;
    for (const auto* r : records)
      if (r->question_id == id) {
        ++n;
        if (r->correct) ++k;
      }
    if (k == n) ++all_correct;
    rate_sum += static_cast<double>(k) / static_cast<double>(n);
  }
  s.acc_d = static_cast<double>(all_correct) / static_cast<double>(ids.size());
  s.acc_p = rate_sum / static_cast<double>(ids.size());
  return s;
}

// ---------------------------------------------------------------------------

BoundingBox random_box(Rng& rng, int width, int height, int min_side) {
  const int x0 = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(width - min_side)));
  const int y0 = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(height - min_side)));
  const int x1 = x0 + min_side + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(width - x0 - min_side + 1)));
  const int y1 = y0 + min_side + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(height - y0 - min_side + 1)));
  return {static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x1), static_cast<double>(y1)};
}

MetricFixture random_metric_fixture(std::uint64_t seed, std::size_t max_questions, std::size_t max_windows) {
  Rng rng(seed);
  MetricFixture fx;
  const auto taxonomy = EntityTaxonomy::standard();
  const std::size_t n_docs = 1 + rng.uniform_index(5);
  std::vector<std::string> doc_ids;
  for (std::size_t d = 0; d < n_docs; ++d) {
    Document doc;
    doc.id = fmt::format("doc{}", d);
    const std::size_t pages = 1 + rng.uniform_index(max_windows);
    for (std::size_t p = 1; p <= pages; ++p) {
      Page page;
      page.index = static_cast<int>(p);
      page.width = 200 + static_cast<int>(rng.uniform_index(800));
      page.height = 200 + static_cast<int>(rng.uniform_index(800));
      page.image = fmt::format("{}-{}.png", doc.id, p);
      const std::size_t n_el = rng.uniform_index(6);
      for (std::size_t e = 0; e < n_el; ++e) {
        DocumentElement el;
        el.id = fmt::format("p{}-e{:03}", p, e + 1);
        el.cls = kAllElementClasses[rng.uniform_index(std::size(kAllElementClasses))];
        el.bbox = random_box(rng, page.width, page.height, 4);
        if (el.cls != ElementClass::IsolatedFormula) el.text = "t";
        page.elements.push_back(el);
      }
      doc.pages.push_back(std::move(page));
    }
    doc_ids.push_back(doc.id);
    fx.documents.emplace(doc.id, std::move(doc));
  }

  const std::size_t n_q = 1 + rng.uniform_index(max_questions);
  for (std::size_t i = 0; i < n_q; ++i) {
    corrupt::CorruptedQuestion q;
    q.id = fmt::format("q{:03}", i);
    q.source_question_id = q.id;
    q.document_id = doc_ids[rng.uniform_index(doc_ids.size())];
    q.source_dataset = "random";
    q.original_text = q.corrupted_text = q.refined_text = "question";
    q.complexity = 1 + static_cast<int>(rng.uniform_index(3));
    const Document& doc = fx.documents.at(q.document_id);
    for (int c = 0; c < q.complexity; ++c) {
      const auto& fine = taxonomy.fine_types();
      const std::string type = fine[rng.uniform_index(fine.size())];
      corrupt::Replacement rep;
      rep.original = {"orig", type, taxonomy.macro_of(type), 0.9, extract::QuestionSource{q.id, 0, 4}};
      const Page& page = doc.pages[rng.uniform_index(doc.pages.size())];
      extract::ElementSource src{doc.id, page.index, "none", ElementClass::PlainText, Quadrant::TopLeft, 0, 3};
      if (!page.elements.empty()) {
        const auto& el = page.elements[rng.uniform_index(page.elements.size())];
        src.element_id = el.id;
        src.element_class = el.cls;
        src.quadrant = quadrant_of(el.bbox, page);
      } else {
        src.element_class = kAllElementClasses[rng.uniform_index(std::size(kAllElementClasses))];
        src.quadrant = kAllQuadrants[rng.uniform_index(4)];
      }
      rep.substitute = {"subst", type, taxonomy.macro_of(type), 0.9, src};
      q.replacements.push_back(std::move(rep));
    }
    fx.questions.push_back(std::move(q));
  }

  const std::vector<std::string> models{"m-alpha", "m-beta"};
  for (const auto& q : fx.questions) {
    const Document& doc = fx.documents.at(q.document_id);
    // Per-question skill so all-correct questions occur regularly.
    const double skill = rng.uniform01();
    for (const auto& model : models)
      for (const std::string variant : {"base", "ocr_explicit"})
        for (int w : {1, 2}) {
          const std::size_t n = doc.pages.size();
          for (std::size_t start = 1; start <= n; start += static_cast<std::size_t>(w)) {
            eval::EvaluationRecord r;
            r.question_id = q.id;
            r.document_id = q.document_id;
            r.model = model;
            r.variant = variant;
            r.window_size = w;
            r.window_start = static_cast<int>(start);
            for (std::size_t p = start; p < start + static_cast<std::size_t>(w) && p <= n; ++p)
              r.window_pages.push_back(static_cast<int>(p));
            r.correct = rng.uniform01() < skill;
            r.standardized_answer = r.correct ? "unable to determine" : "42";
            r.raw_answer = r.standardized_answer;
            r.standardized_by = "rule";
            fx.records.push_back(std::move(r));
          }
        }
  }
  return fx;
}

std::vector<std::string> naive_labels(const eval::EvaluationRecord& r, metrics::Dimension d, const MetricFixture& fx,
                                      const std::set<ElementClass>& counted) {
  const corrupt::CorruptedQuestion* q = nullptr;
  for (const auto& cand : fx.questions)
    if (cand.id == r.question_id) q = &cand;
  const Document& doc = fx.documents.at(q->document_id);
  std::set<std::string> out;
  using metrics::Dimension;
  switch (d) {
    case Dimension::Overall: out.insert("all"); break;
    case Dimension::Complexity: out.insert("C" + std::to_string(q->complexity)); break;
    case Dimension::MacroEntity:
      for (const auto& rep : q->replacements) out.insert(std::string(to_string(rep.original.macro)));
      break;
    case Dimension::DensityBin: {
      int visual = 0, total = 0;
      for (const auto& p : doc.pages)
        for (const auto& el : p.elements) {
          if (el.cls == ElementClass::IsolatedFormula) continue;
          ++total;
          if (el.cls == ElementClass::Figure || el.cls == ElementClass::Table) ++visual;
        }
      const double ratio = total == 0 ? 0.0 : static_cast<double>(visual) / total;
      out.insert(ratio < 0.15 ? "<15%" : ratio <= 0.25 ? "15-25%" : ">25%");
      break;
    }
    case Dimension::LengthBin: {
      const auto n = doc.pages.size();
      out.insert(n < 4 ? "<4" : n <= 8 ? "4-8" : ">8");
      break;
    }
    case Dimension::InPage: {
      bool in = false;
      for (const auto& rep : q->replacements)
        for (int p : r.window_pages) in = in || p == rep.substitute.element().page;
      out.insert(in ? "In-Page" : "Out-Page");
      break;
    }
    case Dimension::Quadrant:
      for (const auto& rep : q->replacements) out.insert(std::string(to_string(rep.substitute.element().quadrant)));
      break;
    case Dimension::ElementClass:
      for (const auto& rep : q->replacements)
        if (rep.substitute.element().element_class != ElementClass::IsolatedFormula)
          out.insert(std::string(to_string(rep.substitute.element().element_class)));
      break;
    case Dimension::PageElementCount: {
      int n = 0;
      for (int p : r.window_pages)
        for (const auto& el : doc.pages[static_cast<std::size_t>(p - 1)].elements) n += counted.count(el.cls) ? 1 : 0;
      out.insert(n == 0 ? "0" : n == 1 ? "1" : ">1");
      break;
    }
    case Dimension::Variant: out.insert(r.variant); break;
    case Dimension::WindowSize: out.insert(std::to_string(r.window_size)); break;
    case Dimension::Model: out.insert(r.model); break;
  }
  return {out.begin(), out.end()};
}

}  // namespace vrduqa::testing
