#pragma once

// Pipeline configuration file (JSON). Relative paths resolve against the
// directory of the config file; unknown keys are rejected at every level.
//
// {
//   "workspace": "work",                  stage artifacts
//   "cache_dir": "work/cache",            provider response cache ("" disables)
//   "mock_script": "mock.json",           scripted providers for --providers mock
//   "datasets": [{"name", "format": "native|mpdocvqa|dude", "path",
//                 "images", "layout", "sample"}],
//   "providers": [ProviderConfig...],
//   "roles": {"ocr", "captioner", "ner", "layout", "refiner", "judge", "standardizer"},
//   "models": ["<provider name>", ...],
//   "taxonomy_thresholds": {"<fine type>": 0.8},
//   "seed": 0, "seeds": [0], "complexities": [1, 2, 3], "variants_per_question": 1,
//   "candidate_filter": {"element_classes": [...], "relation": "any|in_page|out_page", "target_page": 1},
//   "prompt_variants": ["base", "ocr", "explicit", "ocr_explicit"],
//   "window_sizes": [1, 2, 3], "window_stride": 0, "max_window": 3,
//   "dedup_threshold": 0.6, "crop_margin": 2, "workers": 4,
//   "short_circuit": true, "pooled_acc_p": false,
//   "page_element_classes": ["figure", "table"],
//   "server": {"host": "127.0.0.1", "port": 8765, "static_dir": "ui/dist"}
// }

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vrduqa/corruption.hpp"
#include "vrduqa/evaluation.hpp"
#include "vrduqa/io.hpp"
#include "vrduqa/providers.hpp"

namespace vrduqa::service {

struct DatasetSource {
  std::string name;
  std::string format = "native";
  fs::path path;
  fs::path images;  // mpdocvqa / dude page image directory
  fs::path layout;  // optional precomputed detections
  std::optional<std::size_t> sample;
};

struct Roles {
  std::string ocr;
  std::string captioner;
  std::string ner;
  std::string layout;  // empty: detections come from dataset layout files
  std::string refiner;
  std::string judge;
  std::string standardizer;  // empty: rule pass only
};

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8765;
  fs::path static_dir;
};

struct PipelineConfig {
  fs::path base_dir;
  fs::path workspace;
  fs::path cache_dir;
  fs::path mock_script;
  std::vector<DatasetSource> datasets;
  std::vector<providers::ProviderConfig> providers;
  Roles roles;
  std::vector<std::string> models;
  std::map<std::string, double> taxonomy_thresholds;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds{0};
  std::vector<int> complexities{1, 2, 3};
  int variants_per_question = 1;
  corrupt::CandidateFilter candidate_filter;
  std::vector<eval::PromptVariant> prompt_variants = eval::PromptVariant::all();
  std::vector<int> window_sizes{1};
  int window_stride = 0;
  int max_window = eval::kDefaultMaxWindow;
  double dedup_threshold = 0.6;
  int crop_margin = 2;
  std::size_t workers = 4;
  bool short_circuit = true;
  bool pooled_acc_p = false;
  std::set<ElementClass> page_element_classes{ElementClass::Figure, ElementClass::Table};
  ServerConfig server;

  /// sha256 of the canonical serialization of the parsed file.
  std::string hash;

  const providers::ProviderConfig& provider(const std::string& name) const;
};

/// Throws ConfigError with the offending key on any schema violation.
PipelineConfig parse_config(const json& j, const fs::path& base_dir);
PipelineConfig load_config(const fs::path& path);

}  // namespace vrduqa::service
