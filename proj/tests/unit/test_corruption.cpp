#include <doctest.h>

#include <fmt/format.h>

#include "support.hpp"
#include "vrduqa/corruption.hpp"
#include "vrduqa/error.hpp"
#include "vrduqa/prompts.hpp"

using namespace vrduqa;
using vrduqa::testing::chat_reply;
using vrduqa::testing::StubEndpoint;
using vrduqa::testing::TempDir;

namespace {

extract::Entity q_ent(const std::string& qid, const std::string& text, const std::string& surface,
                      const std::string& type, MacroCategory m) {
  const auto start = text.find(surface);
  REQUIRE(start != std::string::npos);
  return {surface, type, m, 0.9, extract::QuestionSource{qid, start, start + surface.size()}};
}

extract::Entity p_ent(const std::string& surface, const std::string& type, MacroCategory m, int page = 1,
                      const std::string& element = "p1-e001", ElementClass cls = ElementClass::PlainText) {
  return {surface, type, m, 0.9, extract::ElementSource{"doc", page, element, cls, Quadrant::TopLeft, 0, surface.size()}};
}

struct Example {
  Question q{"q1", "doc", "In which year did revenue grow in Boston?", {"2009"}};
  extract::EntityPool pool;
  std::vector<extract::Entity> ents;

  Example() {
    pool.document_id = "doc";
    pool.entities = {p_ent("2009", "year_numerical_value", MacroCategory::Temporal),
                     p_ent("2011", "year_numerical_value", MacroCategory::Temporal, 1, "p1-e002"),
                     p_ent("boston", "city", MacroCategory::Location, 2, "p2-e001", ElementClass::Table),
                     p_ent("Denver", "city", MacroCategory::Location, 2, "p2-e002", ElementClass::Figure),
                     p_ent("ACME", "company_name", MacroCategory::Miscellaneous, 3, "p3-e001")};
    ents = {q_ent("q1", q.text, "Boston", "city", MacroCategory::Location)};
  }
};

/// Independent restatement of the candidate rule.
std::vector<extract::Entity> naive_candidates(const extract::Entity& q, const extract::EntityPool& pool,
                                              const corrupt::CandidateFilter& f) {
  auto lower = [](std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
  };
  std::vector<extract::Entity> out;
  for (const auto& e : pool.entities) {
    if (e.fine_type != q.fine_type || lower(e.surface) == lower(q.surface)) continue;
    const auto& s = e.element();
    if (!f.element_classes.empty() && !f.element_classes.count(s.element_class)) continue;
    if (f.relation == corrupt::CandidateFilter::PageRelation::InPage && s.page != f.target_page) continue;
    if (f.relation == corrupt::CandidateFilter::PageRelation::OutPage && s.page == f.target_page) continue;
    out.push_back(e);
  }
  return out;
}

/// Refiner stub echoing the corrupted question from the prompt.
std::shared_ptr<StubEndpoint> echo_refiner() {
  return std::make_shared<StubEndpoint>([](const json& body) {
    const auto text = vrduqa::testing::request_text(body);
    const auto key = std::string("Corrupted question: \"");
    const auto a = text.find(key) + key.size();
    return chat_reply(text.substr(a, text.find("\"\n", a) - a));
  });
}

}  // namespace

TEST_SUITE("corruption") {
  TEST_CASE("candidates share the fine type and differ in surface") {
    Example ex;
    ex.ents.push_back(q_ent("q1", ex.q.text, "year", "year_numerical_value", MacroCategory::Temporal));
    const auto cands = corrupt::candidate_map(ex.ents, ex.pool);
    REQUIRE(cands.size() == 2);
    // "boston" equals "Boston" ignoring case.
    REQUIRE(cands[0].size() == 1);
    CHECK(cands[0][0].surface == "Denver");
    REQUIRE(cands[1].size() == 2);
    CHECK(cands[1][0].surface == "2009");
    CHECK(cands[1][1].surface == "2011");
  }

  TEST_CASE("candidate map with an empty pool") {
    Example ex;
    ex.pool.entities.clear();
    const auto cands = corrupt::candidate_map(ex.ents, ex.pool);
    REQUIRE(cands.size() == 1);
    CHECK(cands[0].empty());
    CHECK_THROWS_AS(corrupt::corrupt_question(ex.q, ex.ents, cands, 1, 0), NotEnoughCandidates);
  }

  TEST_CASE("filters restrict candidates") {
    Example ex;
    ex.pool.entities.push_back(p_ent("Austin", "city", MacroCategory::Location, 1, "p1-e009", ElementClass::Table));
    corrupt::CandidateFilter f;
    f.element_classes = {ElementClass::Table};
    auto c = corrupt::candidate_map(ex.ents, ex.pool, f);
    REQUIRE(c[0].size() == 1);
    CHECK(c[0][0].surface == "Austin");
    f.element_classes.clear();
    f.relation = corrupt::CandidateFilter::PageRelation::InPage;
    f.target_page = 2;
    c = corrupt::candidate_map(ex.ents, ex.pool, f);
    REQUIRE(c[0].size() == 1);
    CHECK(c[0][0].surface == "Denver");
    f.relation = corrupt::CandidateFilter::PageRelation::OutPage;
    c = corrupt::candidate_map(ex.ents, ex.pool, f);
    REQUIRE(c[0].size() == 1);
    CHECK(c[0][0].surface == "Austin");
  }

  TEST_CASE("candidate map agrees with the brute-force filter") {
    const std::vector<std::string> types = {"city", "year_numerical_value", "currency"};
    const std::vector<std::string> surfaces = {"A", "a", "B", "b", "C", "D"};
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      Rng rng(seed);
      extract::EntityPool pool;
      const std::size_t n = rng.uniform_index(15);
      for (std::size_t i = 0; i < n; ++i)
        pool.entities.push_back(p_ent(surfaces[rng.uniform_index(surfaces.size())], types[rng.uniform_index(3)],
                                      MacroCategory::Location, 1 + static_cast<int>(rng.uniform_index(3)),
                                      fmt::format("e{}", i), kAllElementClasses[rng.uniform_index(5)]));
      std::vector<extract::Entity> qents;
      for (std::size_t i = 0; i < 3; ++i)
        qents.push_back({surfaces[rng.uniform_index(surfaces.size())], types[rng.uniform_index(3)],
                         MacroCategory::Location, 0.9, extract::QuestionSource{"q", i, i + 1}});
      corrupt::CandidateFilter f;
      if (rng.uniform_index(2)) f.element_classes = {ElementClass::Figure, ElementClass::Table};
      f.relation = static_cast<corrupt::CandidateFilter::PageRelation>(rng.uniform_index(3));
      f.target_page = 1 + static_cast<int>(rng.uniform_index(3));
      const auto got = corrupt::candidate_map(qents, pool, f);
      for (std::size_t i = 0; i < qents.size(); ++i) REQUIRE(got[i] == naive_candidates(qents[i], pool, f));
    }
  }

  TEST_CASE("C=1 splices the substitute into the question") {
    Example ex;
    const auto cands = corrupt::candidate_map(ex.ents, ex.pool);
    const auto cq = corrupt::corrupt_question(ex.q, ex.ents, cands, 1, 7);
    CHECK(cq.corrupted_text == "In which year did revenue grow in Denver?");
    CHECK(cq.id == "q1-c1-v0");
    CHECK(cq.complexity == 1);
    REQUIRE(cq.replacements.size() == 1);
    CHECK(cq.replacements[0].original.surface == "Boston");
    CHECK(cq.replacements[0].substitute.surface == "Denver");
    CHECK(cq.refined_text.empty());
    CHECK_THROWS_AS(corrupt::corrupt_question(ex.q, ex.ents, cands, 2, 7), NotEnoughCandidates);
    CHECK_THROWS_AS(corrupt::corrupt_question(ex.q, ex.ents, cands, 0, 7), ConfigError);
    CHECK_THROWS_AS(corrupt::corrupt_question(ex.q, ex.ents, cands, 4, 7), ConfigError);
  }

  TEST_CASE("multi-entity corruption replaces disjoint spans right to left") {
    const Question q{"q2", "doc", "Did ACME earn $5 in Boston in 2009?", {}};
    const std::vector<extract::Entity> ents = {
        q_ent("q2", q.text, "ACME", "company_name", MacroCategory::Miscellaneous),
        q_ent("q2", q.text, "$5", "currency", MacroCategory::Numerical),
        q_ent("q2", q.text, "Boston", "city", MacroCategory::Location),
        q_ent("q2", q.text, "2009", "year_numerical_value", MacroCategory::Temporal)};
    extract::EntityPool pool;
    pool.entities = {p_ent("Initech", "company_name", MacroCategory::Miscellaneous),
                     p_ent("$1,250", "currency", MacroCategory::Numerical),
                     p_ent("Denver", "city", MacroCategory::Location),
                     p_ent("2011", "year_numerical_value", MacroCategory::Temporal)};
    const auto cands = corrupt::candidate_map(ents, pool);
    const auto cq = corrupt::corrupt_question(q, ents, cands, 3, 1);
    CHECK(cq.replacements.size() == 3);
    int changed = 0;
    for (const auto& r : cq.replacements) {
      CHECK(cq.corrupted_text.find(r.substitute.surface) != std::string::npos);
      CHECK(cq.corrupted_text.find(r.original.surface) == std::string::npos);
      ++changed;
    }
    CHECK(changed == 3);
    // Determinism: same seed, same record; seeds spread over the four subsets.
    CHECK(corrupt::corrupt_question(q, ents, cands, 3, 1) == cq);
    std::set<std::string> texts;
    for (std::uint64_t s = 0; s < 64; ++s) texts.insert(corrupt::corrupt_question(q, ents, cands, 3, s).corrupted_text);
    CHECK(texts.size() == 4);
  }

  TEST_CASE("overlapping question spans are never replaced together") {
    const Question q{"q3", "doc", "Was it March 2009?", {}};
    const std::vector<extract::Entity> ents = {
        q_ent("q3", q.text, "March 2009", "date_information", MacroCategory::Temporal),
        q_ent("q3", q.text, "2009", "year_numerical_value", MacroCategory::Temporal)};
    extract::EntityPool pool;
    pool.entities = {p_ent("July 2011", "date_information", MacroCategory::Temporal),
                     p_ent("2011", "year_numerical_value", MacroCategory::Temporal)};
    const auto cands = corrupt::candidate_map(ents, pool);
    CHECK_THROWS_AS(corrupt::corrupt_question(q, ents, cands, 2, 0), NotEnoughCandidates);
    CHECK_NOTHROW(corrupt::corrupt_question(q, ents, cands, 1, 0));
  }

  TEST_CASE("records replay from the serialized form") {
    TempDir tmp;
    Example ex;
    auto cq = corrupt::corrupt_question(ex.q, ex.ents, corrupt::candidate_map(ex.ents, ex.pool), 1, 3);
    cq.source_dataset = "synthetic";
    cq.refined_text = cq.corrupted_text;
    corrupt::save_corrupted(tmp / "c.jsonl", {cq});
    const auto back = corrupt::load_corrupted(tmp / "c.jsonl");
    REQUIRE(back.size() == 1);
    CHECK(back[0] == cq);
    // Replaying the stored replacements reproduces the corrupted text.
    std::string replay = back[0].original_text;
    const auto& r = back[0].replacements[0];
    replay.replace(r.original.question().start, r.original.question().end - r.original.question().start,
                   r.substitute.surface);
    CHECK(replay == back[0].corrupted_text);
  }

  TEST_CASE("refinement keeps substitutes and cleans quotes") {
    Example ex;
    auto cq = corrupt::corrupt_question(ex.q, ex.ents, corrupt::candidate_map(ex.ents, ex.pool), 1, 0);
    auto ep = std::make_shared<StubEndpoint>([](const json& body) {
      CHECK(vrduqa::testing::request_text(body).find("['Denver']") != std::string::npos);
      return chat_reply("  \"Did revenue grow in Denver in some year?\"\n");
    });
    const auto out = corrupt::refine(cq, *vrduqa::testing::stub_chat("refiner", ep));
    CHECK(out.refined_text == "Did revenue grow in Denver in some year?");
    CHECK_FALSE(out.unrefined_flag);
    CHECK(ep->calls() == 1);
  }

  TEST_CASE("refinement of the prompt example") {
    const Question q{"t", "doc", "What is the highest temperature recorded?", {}};
    corrupt::CorruptedQuestion cq;
    cq.id = "t-c1-v0";
    cq.original_text = q.text;
    cq.corrupted_text = "What is the 85 F temperature recorded?";
    cq.complexity = 1;
    cq.replacements = {{q_ent("t", q.text, "highest", "temperature", MacroCategory::Numerical),
                        p_ent("85 F", "temperature", MacroCategory::Numerical)}};
    auto ep = std::make_shared<StubEndpoint>([&](const json& body) {
      CHECK(vrduqa::testing::request_text(body) == prompts::refinement_prompt(cq.original_text, cq.corrupted_text, {"85 F"}));
      return chat_reply("Was 85 F the highest temperature recorded?");
    });
    CHECK(corrupt::refine(cq, *vrduqa::testing::stub_chat("refiner", ep)).refined_text ==
          "Was 85 F the highest temperature recorded?");
  }

  TEST_CASE("dropping a substitute triggers one retry then the fallback") {
    Example ex;
    auto cq = corrupt::corrupt_question(ex.q, ex.ents, corrupt::candidate_map(ex.ents, ex.pool), 1, 0);
    auto lossy = std::make_shared<StubEndpoint>([](const json&) { return chat_reply("Where did revenue grow?"); });
    const auto out = corrupt::refine(cq, *vrduqa::testing::stub_chat("refiner", lossy));
    CHECK(lossy->calls() == 2);
    CHECK(out.unrefined_flag);
    CHECK(out.refined_text == cq.corrupted_text);

    int n = 0;
    auto second_try = std::make_shared<StubEndpoint>([&](const json&) {
      return chat_reply(n++ == 0 ? "Where did revenue grow?" : "Did revenue grow in Denver?");
    });
    const auto ok = corrupt::refine(cq, *vrduqa::testing::stub_chat("refiner", second_try));
    CHECK_FALSE(ok.unrefined_flag);
    CHECK(ok.refined_text == "Did revenue grow in Denver?");

    auto down = std::make_shared<StubEndpoint>([](const json&) { return providers::HttpReply{500, "", ""}; });
    const auto fb = corrupt::refine(cq, *vrduqa::testing::stub_chat("refiner", down));
    CHECK(fb.unrefined_flag);
    CHECK(fb.refined_text == cq.corrupted_text);
  }

  TEST_CASE("generation over five questions with one entity each") {
    extract::EntityPool pool;
    pool.document_id = "doc";
    pool.entities = {p_ent("Denver", "city", MacroCategory::Location), p_ent("Austin", "city", MacroCategory::Location)};
    std::vector<corrupt::CorruptionSource> sources;
    for (int i = 0; i < 5; ++i) {
      Question q{fmt::format("q{}", i), "doc", fmt::format("How many stores in Boston in item {}?", i), {}};
      sources.push_back({q, "synthetic", {q_ent(q.id, q.text, "Boston", "city", MacroCategory::Location)}, &pool});
    }
    auto refiner_ep = echo_refiner();
    auto refiner = vrduqa::testing::stub_chat("refiner", refiner_ep);
    corrupt::GenerateOptions opts;
    opts.workers = 3;
    const auto out = corrupt::generate_dataset(sources, opts, refiner.get());
    REQUIRE(out.records.size() == 5);
    CHECK(out.manifest.counts.at("synthetic").at(1) == 5);
    CHECK(out.manifest.counts.at("synthetic").at(2) == 0);
    CHECK(out.manifest.counts.at("synthetic").at(3) == 0);
    // One failure per question for C=2 and C=3 each.
    CHECK(out.manifest.failures.size() == 10);
    CHECK(out.manifest.unrefined == 0);
    CHECK(refiner_ep->calls() == 5);
    // Manifest counts equal a recount of the records.
    std::map<int, std::size_t> recount;
    for (const auto& r : out.records) {
      ++recount[r.complexity];
      CHECK(r.refined_text == r.corrupted_text);
      CHECK(r.source_dataset == "synthetic");
    }
    CHECK(recount[1] == 5);
    CHECK(corrupt::to_json(out.manifest)["counts"]["synthetic"]["C1"] == 5);
  }

  TEST_CASE("duplicate variants are dropped and seeds get suffixed ids") {
    extract::EntityPool pool;
    pool.entities = {p_ent("Denver", "city", MacroCategory::Location)};
    Question q{"q", "doc", "Is Boston big?", {}};
    std::vector<corrupt::CorruptionSource> sources{
        {q, "s", {q_ent("q", q.text, "Boston", "city", MacroCategory::Location)}, &pool}};
    corrupt::GenerateOptions opts;
    opts.complexities = {1};
    opts.variants = 3;
    auto out = corrupt::generate_dataset(sources, opts, nullptr);
    REQUIRE(out.records.size() == 1);
    CHECK(out.manifest.failures.size() == 2);
    CHECK(out.manifest.failures[0].reason == "duplicate variant");
    opts.variants = 1;
    opts.seeds = {1, 2};
    out = corrupt::generate_dataset(sources, opts, nullptr);
    REQUIRE(out.records.size() == 2);
    CHECK(out.records[0].id == "q-c1-v0-s1");
    CHECK(out.records[1].id == "q-c1-v0-s2");
    opts.complexities = {4};
    CHECK_THROWS_AS(corrupt::generate_dataset(sources, opts, nullptr), ConfigError);
  }

  TEST_CASE("same_surface ignores ASCII case only") {
    CHECK(corrupt::same_surface("Boston", "BOSTON"));
    CHECK_FALSE(corrupt::same_surface("Boston", "Boston "));
    CHECK(corrupt::clean_refinement("  'x'  ") == "x");
    CHECK(corrupt::clean_refinement("\"") == "\"");
  }
}
