#include "vrduqa/service/review_server.hpp"

#include <httplib.h>

#include <algorithm>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "vrduqa/document_io.hpp"
#include "vrduqa/error.hpp"

namespace vrduqa::service {

namespace {

std::string mime_of(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".tif" || ext == ".tiff") return "image/tiff";
  return "application/octet-stream";
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", message}}.dump(), "application/json");
}

}  // namespace

ReviewServer::ReviewServer(const Workspace& ws, fs::path static_dir)
    : ws_(ws), static_dir_(std::move(static_dir)), server_(std::make_unique<httplib::Server>()) {
  const fs::path path = ws_.verified() / "unanswerable.jsonl";
  if (!fs::exists(path)) throw MissingArtifact(fmt::format("{} not found; run verify first", path.string()));
  items_ = corrupt::load_corrupted(path);
  for (std::size_t i = 0; i < items_.size(); ++i) index_.emplace(items_[i].id, i);
  for (const auto& q : items_) {
    if (docs_.count(q.document_id)) continue;
    const fs::path doc_path = ws_.augmented_doc(q.document_id);
    if (!fs::exists(doc_path)) throw MissingArtifact(fmt::format("{} not found; run augment first", doc_path.string()));
    docs_.emplace(q.document_id, load_document(doc_path));
  }

  auto& srv = *server_;
  srv.Get("/api/review/queue", [this](const httplib::Request& req, httplib::Response& res) {
    res.set_content(queue(req.get_param_value("reviewer")).dump(), "application/json");
  });

  srv.Get(R"(/api/documents/([^/]+)/pages/(\d+)/image)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string doc_id = req.matches[1];
    auto it = docs_.find(doc_id);
    if (it == docs_.end()) return send_error(res, 404, fmt::format("unknown document '{}'", doc_id));
    int n = 0;
    try {
      n = std::stoi(req.matches[2]);
    } catch (const std::exception&) {
      return send_error(res, 404, "bad page number");
    }
    if (n < 1 || static_cast<std::size_t>(n) > it->second.pages.size())
      return send_error(res, 404, fmt::format("document '{}' has no page {}", doc_id, n));
    const fs::path image = ws_.documents() / it->second.page(n).image;
    std::string bytes;
    try {
      bytes = read_file(image);
    } catch (const Error& e) {
      return send_error(res, 404, e.what());
    }
    res.set_content(std::move(bytes), mime_of(image));
  });

  srv.Post(R"(/api/review/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception& e) {
      return send_error(res, 400, fmt::format("invalid JSON: {}", e.what()));
    }
    try {
      record(req.matches[1], body);
      res.status = 204;
    } catch (const ConfigError& e) {
      send_error(res, 400, e.what());
    } catch (const StateError& e) {
      send_error(res, 404, e.what());
    }
  });

  if (!static_dir_.empty()) {
    if (!fs::is_directory(static_dir_))
      throw ConfigError(fmt::format("static directory {} does not exist", static_dir_.string()));
    srv.set_mount_point("/", static_dir_.string());
  }
  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  });
}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw ConfigError(fmt::format("cannot bind {}:{}", host, port));
  return bound;
}

void ReviewServer::listen() { server_->listen_after_bind(); }

void ReviewServer::stop() {
  if (server_) server_->stop();
}

json ReviewServer::queue(const std::string& reviewer) const {
  std::set<std::string> decided;
  {
    std::lock_guard lock(mu_);
    for (const auto& d : verify::load_decisions(ws_.decisions()))
      if (reviewer.empty() || d.reviewer == reviewer) decided.insert(d.question_id);
  }
  json out = json::array();
  for (const auto& q : items_) {
    if (decided.count(q.id)) continue;
    json pages = json::array();
    const auto& doc = docs_.at(q.document_id);
    for (const auto& p : doc.pages) pages.push_back(fmt::format("/api/documents/{}/pages/{}/image", doc.id, p.index));
    json full = q;
    out.push_back({{"question_id", q.id},
                   {"document_id", q.document_id},
                   {"original_text", q.original_text},
                   {"refined_text", q.refined_text},
                   {"complexity", q.complexity},
                   {"replacements", full.at("replacements")},
                   {"pages", pages}});
  }
  return out;
}

verify::ReviewDecision ReviewServer::record(const std::string& question_id, const json& body) {
  if (!index_.count(question_id)) throw StateError(fmt::format("unknown question '{}'", question_id));
  if (!body.is_object()) throw ConfigError("body must be a JSON object");
  verify::ReviewDecision d;
  d.question_id = question_id;
  try {
    d.decision = verify::parse_decision(body.at("decision").get<std::string>());
    d.reviewer = body.at("reviewer").get<std::string>();
    if (body.contains("note") && !body.at("note").is_null()) d.note = body.at("note").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("bad review body: {}", e.what()));
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (d.reviewer.empty()) throw ConfigError("reviewer must not be empty");
  d.timestamp = utc_timestamp();
  std::lock_guard lock(mu_);
  fs::create_directories(ws_.decisions().parent_path());
  JsonlAppender out(ws_.decisions(), 1);
  out.append(d);
  spdlog::info("review: {} {} by {}", question_id, verify::to_string(d.decision), d.reviewer);
  return d;
}

}  // namespace vrduqa::service
