#include "vrduqa/io.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <fstream>
#include <sstream>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "vrduqa/error.hpp"
#include "vrduqa/hashing.hpp"

namespace vrduqa {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  static std::atomic<std::uint64_t> counter{0};
  tmp += fmt::format(".tmp{}-{}", ::getpid(), counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IngestionError(fmt::format("cannot write '{}'", tmp.string()));
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IngestionError(fmt::format("short write to '{}'", tmp.string()));
  }
  fs::rename(tmp, path);
}

json read_json_file(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw IngestionError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_json_file(const fs::path& path, const json& value) {
  write_file_atomic(path, value.dump(2) + "\n");
}

void for_each_jsonl(const fs::path& path,
                    const std::function<void(const json&, std::size_t line)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(fmt::format("cannot open '{}'", path.string()));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error& e) {
      throw IngestionError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
    try {
      fn(row, lineno);
    } catch (const IngestionError&) {
      throw;
    } catch (const json::exception& e) {
      throw IngestionError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
  }
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::vector<json> rows;
  for_each_jsonl(path, [&](const json& row, std::size_t) { rows.push_back(row); });
  return rows;
}

void write_jsonl(const fs::path& path, const std::vector<json>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += r.dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

JsonlAppender::JsonlAppender(const fs::path& path, std::size_t sync_every)
    : sync_every_(sync_every == 0 ? 1 : sync_every) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  file_ = std::fopen(path.c_str(), "ab");
  if (!file_) throw IngestionError(fmt::format("cannot open '{}' for append", path.string()));
}

JsonlAppender::~JsonlAppender() {
  if (file_) {
    std::fflush(file_);
    ::fsync(::fileno(file_));
    std::fclose(file_);
  }
}

void JsonlAppender::append(const json& row) {
  const std::string line = row.dump() + "\n";
  std::lock_guard lock(mu_);
  std::fwrite(line.data(), 1, line.size(), file_);
  std::fflush(file_);
  if (++pending_ >= sync_every_) {
    ::fsync(::fileno(file_));
    pending_ = 0;
  }
}

void JsonlAppender::sync() {
  std::lock_guard lock(mu_);
  std::fflush(file_);
  ::fsync(::fileno(file_));
  pending_ = 0;
}

std::string file_sha256(const fs::path& path) { return sha256_hex(read_file(path)); }

std::string utc_timestamp() {
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(now)));
}

}  // namespace vrduqa
