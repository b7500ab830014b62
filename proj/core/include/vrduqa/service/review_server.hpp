#pragma once

// HTTP backend for the human review gate.
//
//   GET  /api/review/queue[?reviewer=name]  -> [{question_id, refined_text, replacements, pages}]
//   GET  /api/documents/{doc}/pages/{n}/image
//   POST /api/review/{question_id}  {decision, reviewer, note}  -> 204
//
// Anything else is served from the static directory when one is configured.

#include <memory>
#include <mutex>
#include <string>

#include "vrduqa/service/stages.hpp"
#include "vrduqa/verification.hpp"

namespace httplib {
class Server;
}

namespace vrduqa::service {

class ReviewServer {
 public:
  /// Loads verified/unanswerable.jsonl and the augmented documents; throws
  /// MissingArtifact when verify has not run.
  ReviewServer(const Workspace& ws, fs::path static_dir = {});
  ~ReviewServer();

  /// Binds host:port (port 0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind.
  void listen();
  void stop();

  json queue(const std::string& reviewer) const;
  /// Validates and appends; throws ConfigError on a bad body and StateError
  /// for an unknown question.
  verify::ReviewDecision record(const std::string& question_id, const json& body);

 private:
  Workspace ws_;
  fs::path static_dir_;
  std::vector<corrupt::CorruptedQuestion> items_;
  std::map<std::string, std::size_t> index_;
  std::map<std::string, Document> docs_;
  std::unique_ptr<httplib::Server> server_;
  mutable std::mutex mu_;
};

}  // namespace vrduqa::service
