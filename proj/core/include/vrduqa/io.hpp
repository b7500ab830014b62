#pragma once

#include <cstdio>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace vrduqa {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// Whole-file read; throws IngestionError naming the path.
std::string read_file(const fs::path& path);

/// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const fs::path& path, std::string_view contents);

json read_json_file(const fs::path& path);
/// Pretty-printed with two-space indent and a trailing newline.
void write_json_file(const fs::path& path, const json& value);

/// Parses a JSON-lines file. Blank lines are skipped; a malformed line raises
/// IngestionError with "<path>:<line>".
std::vector<json> read_jsonl(const fs::path& path);
void for_each_jsonl(const fs::path& path, const std::function<void(const json&, std::size_t line)>& fn);
void write_jsonl(const fs::path& path, const std::vector<json>& rows);

/// Append-only JSON-lines writer. Every line is flushed; fsync every
/// `sync_every` lines and on close.
class JsonlAppender {
 public:
  explicit JsonlAppender(const fs::path& path, std::size_t sync_every = 32);
  ~JsonlAppender();
  JsonlAppender(const JsonlAppender&) = delete;
  JsonlAppender& operator=(const JsonlAppender&) = delete;

  void append(const json& row);
  void sync();

 private:
  std::FILE* file_ = nullptr;
  std::size_t sync_every_;
  std::size_t pending_ = 0;
  std::mutex mu_;
};

/// SHA-256 of a file's bytes; used to chain stage manifests.
std::string file_sha256(const fs::path& path);

/// Current UTC time as RFC 3339 with seconds precision.
std::string utc_timestamp();

}  // namespace vrduqa
