#pragma once

// Rendered synthetic fixture plus mock-mode pipeline runs, shared by the
// stage, review-server and CLI suites.

#include <memory>

#include "fixture.hpp"
#include "support.hpp"
#include "vrduqa/service/config.hpp"
#include "vrduqa/service/stages.hpp"

namespace vrduqa::testing {

struct PipelineRun {
  TempDir tmp;
  service::PipelineConfig cfg;
  service::Workspace ws;

  PipelineRun() {
    fixture::render(fixture_json(), tmp.path());
    cfg = service::load_config(tmp / "config.json");
    ws = service::Workspace{cfg.workspace};
  }

  static service::StageOptions mock() {
    service::StageOptions o;
    o.mode = service::ProviderMode::Mock;
    return o;
  }

  /// import, augment, corrupt and verify in mock mode.
  void through_verify() {
    service::run_import(cfg, mock());
    service::run_augment(cfg, mock());
    service::run_corrupt(cfg, mock());
    service::run_verify(cfg, mock());
  }
};

/// One verified workspace per process; tests must not modify its stage outputs.
inline PipelineRun& verified_run() {
  static std::unique_ptr<PipelineRun> run = [] {
    auto r = std::make_unique<PipelineRun>();
    r->through_verify();
    return r;
  }();
  return *run;
}

}  // namespace vrduqa::testing
