#include <csignal>
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "vrduqa/error.hpp"
#include "vrduqa/hashing.hpp"
#include "vrduqa/service/config.hpp"
#include "vrduqa/service/review_server.hpp"
#include "vrduqa/service/stages.hpp"

namespace {

using namespace vrduqa;
using namespace vrduqa::service;

ReviewServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

struct Flags {
  std::string config = "vrduqa.json";
  std::string providers = "live";
  bool resume = false;
  std::size_t limit = 0;
  std::size_t sample = 0;
  std::vector<std::string> models;
  std::vector<std::string> variants;
  std::vector<int> window_sizes;
  std::vector<std::string> groups;
  std::string dataset;
  std::string host;
  int port = -1;
  std::string static_dir;
  bool verbose = false;
};

StageOptions stage_options(const Flags& f) {
  StageOptions o;
  if (f.providers == "mock") o.mode = ProviderMode::Mock;
  else if (f.providers == "live") o.mode = ProviderMode::Live;
  else throw ConfigError(fmt::format("--providers must be 'mock' or 'live', got '{}'", f.providers));
  o.resume = f.resume;
  if (f.limit > 0) o.limit = f.limit;
  o.models = f.models;
  o.variants = f.variants;
  o.window_sizes = f.window_sizes;
  o.groups = f.groups;
  o.dataset_filter = f.dataset;
  return o;
}

int serve(const PipelineConfig& cfg, const Flags& f) {
  ReviewServer server(Workspace{cfg.workspace}, f.static_dir.empty() ? cfg.server.static_dir : fs::path(f.static_dir));
  const std::string host = f.host.empty() ? cfg.server.host : f.host;
  const int port = server.bind(host, f.port >= 0 ? f.port : cfg.server.port);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << fmt::format("review server listening on http://{}:{}/", host, port) << std::endl;
  server.listen();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unanswerable-question generation and evaluation for visually rich documents"};
  app.require_subcommand(1);
  Flags f;
  app.add_option("-c,--config", f.config, "pipeline configuration file")->capture_default_str();
  app.add_flag("-v,--verbose", f.verbose, "debug logging");

  auto provider_flags = [&](CLI::App* sub) {
    sub->add_option("--providers", f.providers, "mock or live")->capture_default_str();
    sub->add_flag("--resume", f.resume, "keep completed work and continue");
    sub->add_option("--limit", f.limit, "stop after this many provider-backed units");
  };

  auto* import_cmd = app.add_subcommand("import", "import configured datasets into the workspace");
  import_cmd->add_option("--sample", f.sample, "seeded sample of N questions per dataset (overrides config)");
  auto* augment = app.add_subcommand("augment", "layout detection, OCR and captioning");
  provider_flags(augment);
  auto* corrupt = app.add_subcommand("corrupt", "entity extraction and question corruption");
  provider_flags(corrupt);
  auto* verify = app.add_subcommand("verify", "per-page judge verification");
  provider_flags(verify);
  auto* review = app.add_subcommand("review-serve", "serve the review API and UI");
  review->add_option("--host", f.host);
  review->add_option("--port", f.port);
  review->add_option("--static", f.static_dir, "directory with the review UI build");
  auto* export_cmd = app.add_subcommand("export", "apply review decisions to the verified set");
  auto* evaluate = app.add_subcommand("evaluate", "run models over the verified set");
  provider_flags(evaluate);
  evaluate->add_option("--models", f.models)->delimiter(',');
  evaluate->add_option("--variants", f.variants)->delimiter(',');
  evaluate->add_option("--window-sizes", f.window_sizes)->delimiter(',');
  auto* report = app.add_subcommand("report", "aggregate metrics");
  report->add_option("--group", f.groups, "dimension(s) to report")->delimiter(',');
  report->add_option("--dataset", f.dataset, "restrict to one source dataset");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(f.verbose ? spdlog::level::debug : spdlog::level::info);
  spdlog::set_pattern("%^%l%$: %v");

  try {
    PipelineConfig cfg = load_config(f.config);
    if (f.sample > 0) {
      for (auto& d : cfg.datasets) d.sample = f.sample;
      cfg.hash = sha256_hex(fmt::format("{}:sample={}", cfg.hash, f.sample));
    }
    const StageOptions opts = stage_options(f);
    if (review->parsed()) return serve(cfg, f);

    StageResult result;
    if (import_cmd->parsed()) result = run_import(cfg, opts);
    else if (augment->parsed()) result = run_augment(cfg, opts);
    else if (corrupt->parsed()) result = run_corrupt(cfg, opts);
    else if (verify->parsed()) result = run_verify(cfg, opts);
    else if (export_cmd->parsed()) result = run_export(cfg, opts);
    else if (evaluate->parsed()) result = run_evaluate(cfg, opts);
    else if (report->parsed()) result = run_report(cfg, opts);
    std::cout << result.message << std::endl;
    return result.ok ? 0 : 1;
  } catch (const ConfigError& e) {
    spdlog::error("configuration: {}", e.what());
    return 2;
  } catch (const ProviderConfigError& e) {
    spdlog::error("provider configuration: {}", e.what());
    return 2;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("unexpected: {}", e.what());
    return 1;
  }
}
