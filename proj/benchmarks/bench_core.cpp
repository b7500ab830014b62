#include <benchmark/benchmark.h>

#include "vrduqa/corruption.hpp"
#include "vrduqa/document.hpp"
#include "vrduqa/evaluation.hpp"
#include "vrduqa/prompts.hpp"
#include "vrduqa/rng.hpp"

using namespace vrduqa;

namespace {

BoundingBox random_box(Rng& rng, int size) {
  const auto x0 = static_cast<double>(rng.uniform_index(size - 1));
  const auto y0 = static_cast<double>(rng.uniform_index(size - 1));
  const auto x1 = x0 + 1 + static_cast<double>(rng.uniform_index(size - static_cast<std::uint64_t>(x0) - 1));
  const auto y1 = y0 + 1 + static_cast<double>(rng.uniform_index(size - static_cast<std::uint64_t>(y0) - 1));
  return {x0, y0, x1, y1};
}

std::vector<DocumentElement> random_elements(std::size_t n) {
  Rng rng(n);
  std::vector<DocumentElement> els;
  for (std::size_t i = 0; i < n; ++i)
    els.push_back(DocumentElement{"e" + std::to_string(i), ElementClass::PlainText, random_box(rng, 1000)});
  return els;
}

void BM_Iou(benchmark::State& state) {
  Rng rng(1);
  std::vector<BoundingBox> boxes;
  for (int i = 0; i < 1024; ++i) boxes.push_back(random_box(rng, 1000));
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(iou(boxes[i & 1023], boxes[(i + 1) & 1023]));
    ++i;
  }
}
BENCHMARK(BM_Iou);

void BM_Dedup(benchmark::State& state) {
  const auto els = random_elements(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(dedup_elements(els, kDefaultDedupThreshold));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Dedup)->RangeMultiplier(4)->Range(16, 1024)->Complexity();

void BM_ReadingOrder(benchmark::State& state) {
  Page page;
  page.width = page.height = 1000;
  page.elements = random_elements(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(reading_order(page));
}
BENCHMARK(BM_ReadingOrder)->Arg(64)->Arg(512);

void BM_CorruptQuestion(benchmark::State& state) {
  Question q{"q", "d", "Did Acme open an office in Boston in 2019 with 40 staff?", {}};
  auto entity = [&q](std::string surface, std::string type) {
    extract::Entity e;
    const std::size_t start = q.text.find(surface);
    e.surface = std::move(surface);
    e.fine_type = std::move(type);
    e.provenance = extract::QuestionSource{"q", start, start + e.surface.size()};
    return e;
  };
  const std::vector<extract::Entity> ents{entity("Acme", "company_name"), entity("Boston", "city"),
                                          entity("2019", "year_numerical_value")};
  std::vector<std::vector<extract::Entity>> candidates(ents.size());
  for (std::size_t i = 0; i < ents.size(); ++i)
    for (int k = 0; k < 20; ++k) {
      auto c = ents[i];
      c.surface += std::to_string(k);
      c.provenance = extract::ElementSource{"d", 1, "p1-e001", ElementClass::PlainText, Quadrant::TopLeft, 0, 0};
      candidates[i].push_back(c);
    }
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(corrupt::corrupt_question(q, ents, candidates, 3, seed++));
}
BENCHMARK(BM_CorruptQuestion);

void BM_RuleStandardize(benchmark::State& state) {
  const std::vector<std::string> answers{"The image does not provide information to answer the question.", "1987",
                                         "Not available.", "Revenue grew by 5% in Boston"};
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(eval::rule_standardize(answers[i++ % answers.size()]));
}
BENCHMARK(BM_RuleStandardize);

void BM_VqaPrompt(benchmark::State& state) {
  const std::string ocr(static_cast<std::size_t>(state.range(0)), 'x');
  for (auto _ : state) benchmark::DoNotOptimize(prompts::vqa_prompt("Which year?", ocr, true));
}
BENCHMARK(BM_VqaPrompt)->Arg(1 << 10)->Arg(1 << 16);

}  // namespace
BENCHMARK_MAIN();
