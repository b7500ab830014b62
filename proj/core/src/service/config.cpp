#include "vrduqa/service/config.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "vrduqa/error.hpp"
#include "vrduqa/hashing.hpp"

namespace vrduqa::service {

namespace {

void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> known) {
  if (!j.is_object()) throw ConfigError(fmt::format("{}: expected an object", where));
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError(fmt::format("{}: unknown key '{}'", where, key));
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

}  // namespace

const providers::ProviderConfig& PipelineConfig::provider(const std::string& name) const {
  for (const auto& p : providers)
    if (p.name == name) return p;
  throw ConfigError(fmt::format("no provider named '{}'", name));
}

PipelineConfig parse_config(const json& j, const fs::path& base_dir) {
  check_keys(j, "config",
             {"workspace", "cache_dir", "mock_script", "datasets", "providers", "roles", "models",
              "taxonomy_thresholds", "seed", "seeds", "complexities", "variants_per_question", "candidate_filter",
              "prompt_variants", "window_sizes", "window_stride", "max_window", "dedup_threshold", "crop_margin",
              "workers", "short_circuit", "pooled_acc_p", "page_element_classes", "server"});
  PipelineConfig c;
  try {
    c.base_dir = base_dir;
    c.workspace = resolve(base_dir, j.value("workspace", std::string("work")));
    c.cache_dir = j.contains("cache_dir") ? resolve(base_dir, j["cache_dir"].get<std::string>())
                                          : c.workspace / "cache";
    c.mock_script = resolve(base_dir, j.value("mock_script", std::string{}));

    for (const auto& d : j.value("datasets", json::array())) {
      check_keys(d, "datasets[]", {"name", "format", "path", "images", "layout", "sample"});
      DatasetSource ds;
      ds.name = d.at("name").get<std::string>();
      ds.format = d.value("format", std::string("native"));
      if (ds.format != "native" && ds.format != "mpdocvqa" && ds.format != "dude")
        throw ConfigError(fmt::format("dataset '{}': unknown format '{}'", ds.name, ds.format));
      ds.path = resolve(base_dir, d.at("path").get<std::string>());
      ds.images = resolve(base_dir, d.value("images", std::string{}));
      ds.layout = resolve(base_dir, d.value("layout", std::string{}));
      if (d.contains("sample") && !d["sample"].is_null()) ds.sample = d["sample"].get<std::size_t>();
      c.datasets.push_back(std::move(ds));
    }

    std::set<std::string> names;
    for (const auto& p : j.value("providers", json::array())) {
      auto pc = p.get<providers::ProviderConfig>();
      if (!names.insert(pc.name).second) throw ConfigError(fmt::format("provider '{}' defined twice", pc.name));
      c.providers.push_back(std::move(pc));
    }

    if (j.contains("roles")) {
      const json& r = j["roles"];
      check_keys(r, "roles", {"ocr", "captioner", "ner", "layout", "refiner", "judge", "standardizer"});
      c.roles.ocr = r.value("ocr", std::string{});
      c.roles.captioner = r.value("captioner", std::string{});
      c.roles.ner = r.value("ner", std::string{});
      c.roles.layout = r.value("layout", std::string{});
      c.roles.refiner = r.value("refiner", std::string{});
      c.roles.judge = r.value("judge", std::string{});
      c.roles.standardizer = r.value("standardizer", std::string{});
    }
    for (const std::string* role : {&c.roles.ocr, &c.roles.captioner, &c.roles.ner, &c.roles.layout,
                                    &c.roles.refiner, &c.roles.judge, &c.roles.standardizer})
      if (!role->empty() && !names.count(*role))
        throw ConfigError(fmt::format("role refers to unknown provider '{}'", *role));

    c.models = j.value("models", std::vector<std::string>{});
    for (const auto& m : c.models)
      if (!names.count(m)) throw ConfigError(fmt::format("model '{}' is not a configured provider", m));

    c.taxonomy_thresholds = j.value("taxonomy_thresholds", std::map<std::string, double>{});
    c.seed = j.value("seed", std::uint64_t{0});
    c.seeds = j.value("seeds", std::vector<std::uint64_t>{c.seed});
    c.complexities = j.value("complexities", std::vector<int>{1, 2, 3});
    for (int cx : c.complexities)
      if (cx < 1 || cx > corrupt::kMaxComplexity) throw ConfigError(fmt::format("complexity {} outside 1..3", cx));
    c.variants_per_question = j.value("variants_per_question", 1);
    if (c.variants_per_question < 1) throw ConfigError("variants_per_question must be >= 1");

    if (j.contains("candidate_filter")) {
      const json& f = j["candidate_filter"];
      check_keys(f, "candidate_filter", {"element_classes", "relation", "target_page"});
      for (const auto& name : f.value("element_classes", std::vector<std::string>{}))
        c.candidate_filter.element_classes.insert(parse_element_class(name));
      const std::string rel = f.value("relation", std::string("any"));
      if (rel == "any") c.candidate_filter.relation = corrupt::CandidateFilter::PageRelation::Any;
      else if (rel == "in_page") c.candidate_filter.relation = corrupt::CandidateFilter::PageRelation::InPage;
      else if (rel == "out_page") c.candidate_filter.relation = corrupt::CandidateFilter::PageRelation::OutPage;
      else throw ConfigError(fmt::format("candidate_filter.relation: unknown value '{}'", rel));
      c.candidate_filter.target_page = f.value("target_page", 1);
    }

    if (j.contains("prompt_variants")) {
      c.prompt_variants.clear();
      for (const auto& v : j["prompt_variants"]) c.prompt_variants.push_back(eval::PromptVariant::parse(v.get<std::string>()));
    }
    c.max_window = j.value("max_window", eval::kDefaultMaxWindow);
    c.window_sizes = j.value("window_sizes", std::vector<int>{1});
    c.window_stride = j.value("window_stride", 0);
    for (int w : c.window_sizes)
      if (w < 1 || w > c.max_window) throw ConfigError(fmt::format("window size {} outside 1..{}", w, c.max_window));
    c.dedup_threshold = j.value("dedup_threshold", 0.6);
    if (!(c.dedup_threshold > 0 && c.dedup_threshold <= 1)) throw ConfigError("dedup_threshold must be in (0, 1]");
    c.crop_margin = j.value("crop_margin", 2);
    c.workers = j.value("workers", std::size_t{4});
    if (c.workers < 1) throw ConfigError("workers must be >= 1");
    c.short_circuit = j.value("short_circuit", true);
    c.pooled_acc_p = j.value("pooled_acc_p", false);
    if (j.contains("page_element_classes")) {
      c.page_element_classes.clear();
      for (const auto& name : j["page_element_classes"].get<std::vector<std::string>>())
        c.page_element_classes.insert(parse_element_class(name));
    }
    if (j.contains("server")) {
      const json& s = j["server"];
      check_keys(s, "server", {"host", "port", "static_dir"});
      c.server.host = s.value("host", c.server.host);
      c.server.port = s.value("port", c.server.port);
      c.server.static_dir = resolve(base_dir, s.value("static_dir", std::string{}));
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config: {}", e.what()));
  } catch (const IngestionError& e) {
    throw ConfigError(fmt::format("config: {}", e.what()));
  }
  // Validate thresholds against the taxonomy early.
  EntityTaxonomy::standard().apply_overrides(c.taxonomy_thresholds);
  c.hash = sha256_hex(j.dump());
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  } catch (const IngestionError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(j, fs::absolute(path).parent_path());
}

}  // namespace vrduqa::service
