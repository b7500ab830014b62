#include "vrduqa/service/importers.hpp"

#include <algorithm>
#include <regex>
#include <set>

#include <fmt/format.h>

#include "vrduqa/document_io.hpp"
#include "vrduqa/error.hpp"
#include "vrduqa/hashing.hpp"
#include "vrduqa/image.hpp"
#include "vrduqa/rng.hpp"

namespace vrduqa::service {

namespace {

std::string answers_string(const json& a) {
  return a.is_string() ? a.get<std::string>() : a.dump();
}

std::vector<std::string> answers_of(const json& rec) {
  std::vector<std::string> out;
  if (!rec.contains("answers") || rec["answers"].is_null()) return out;
  for (const auto& a : rec["answers"]) out.push_back(answers_string(a));
  return out;
}

std::string id_string(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

Page page_from_image(int index, const fs::path& image) {
  Page p;
  p.index = index;
  const auto [w, h] = image_size(image);
  p.width = w;
  p.height = h;
  p.image = image.string();
  return p;
}

fs::path find_image(const fs::path& dir, const std::string& stem) {
  for (const char* ext : {".jpg", ".png", ".jpeg", ".JPG", ".PNG"}) {
    fs::path p = dir / (stem + ext);
    if (fs::exists(p)) return p;
  }
  throw IngestionError(fmt::format("no image for page '{}' in {}", stem, dir.string()));
}

json load_data_array(const fs::path& json_path) {
  const json root = read_json_file(json_path);
  if (!root.contains("data") || !root["data"].is_array())
    throw IngestionError(fmt::format("{}: expected an object with a 'data' array", json_path.string()));
  return root["data"];
}

}  // namespace

ImportedDataset import_native(const fs::path& dir, const std::string& dataset_name) {
  ImportedDataset out;
  const fs::path docs_dir = dir / "documents";
  if (!fs::is_directory(docs_dir)) throw IngestionError(fmt::format("{}: missing documents/ directory", dir.string()));
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(docs_dir))
    if (entry.path().extension() == ".json" && entry.path().stem().extension() != ".manifest")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    Document doc = load_document(f);
    if (doc.source_dataset.empty()) doc.source_dataset = dataset_name;
    for (auto& p : doc.pages) p.image = (docs_dir / p.image).lexically_normal().string();
    out.documents.push_back(std::move(doc));
  }
  out.questions = load_questions(dir / "questions.jsonl");
  return out;
}

ImportedDataset import_mpdocvqa(const fs::path& json_path, const fs::path& images, const std::string& dataset_name) {
  const json data = load_data_array(json_path);
  ImportedDataset out;
  std::map<std::string, std::vector<std::string>> pages_of;
  std::vector<std::string> doc_order;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const json& rec = data[i];
    try {
      Question q{id_string(rec.at("questionId")), rec.at("doc_id").get<std::string>(),
                 rec.at("question").get<std::string>(), answers_of(rec)};
      auto [it, fresh] = pages_of.try_emplace(q.document_id);
      if (fresh) doc_order.push_back(q.document_id);
      for (const auto& pid : rec.at("page_ids"))
        if (std::find(it->second.begin(), it->second.end(), pid.get<std::string>()) == it->second.end())
          it->second.push_back(pid.get<std::string>());
      out.questions.push_back(std::move(q));
    } catch (const json::exception& e) {
      throw IngestionError(fmt::format("{}: data[{}]: {}", json_path.string(), i, e.what()));
    }
  }
  for (const auto& doc_id : doc_order) {
    Document doc{doc_id, dataset_name, {}};
    int index = 1;
    for (const auto& pid : pages_of[doc_id]) doc.pages.push_back(page_from_image(index++, find_image(images, pid)));
    out.documents.push_back(std::move(doc));
  }
  return out;
}

ImportedDataset import_dude(const fs::path& json_path, const fs::path& images, const std::string& dataset_name) {
  const json data = load_data_array(json_path);
  ImportedDataset out;
  std::vector<std::string> doc_order;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const json& rec = data[i];
    try {
      Question q{id_string(rec.at("questionId")), rec.at("docId").get<std::string>(),
                 rec.at("question").get<std::string>(), answers_of(rec)};
      if (std::find(doc_order.begin(), doc_order.end(), q.document_id) == doc_order.end())
        doc_order.push_back(q.document_id);
      out.questions.push_back(std::move(q));
    } catch (const json::exception& e) {
      throw IngestionError(fmt::format("{}: data[{}]: {}", json_path.string(), i, e.what()));
    }
  }
  const std::regex page_re(R"((.+)_(\d+)\.(jpg|jpeg|png|JPG|PNG))");
  std::map<std::string, std::vector<std::pair<long, fs::path>>> files;
  for (const auto& entry : fs::directory_iterator(images)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, page_re)) files[m[1].str()].emplace_back(std::stol(m[2].str()), entry.path());
  }
  for (const auto& doc_id : doc_order) {
    auto it = files.find(doc_id);
    if (it == files.end()) throw IngestionError(fmt::format("no page images for DUDE document '{}'", doc_id));
    std::sort(it->second.begin(), it->second.end());
    Document doc{doc_id, dataset_name, {}};
    int index = 1;
    for (const auto& [_, path] : it->second) doc.pages.push_back(page_from_image(index++, path));
    out.documents.push_back(std::move(doc));
  }
  return out;
}

ImportedDataset import_source(const DatasetSource& source) {
  if (source.format == "native") return import_native(source.path, source.name);
  if (source.format == "mpdocvqa") return import_mpdocvqa(source.path, source.images, source.name);
  if (source.format == "dude") return import_dude(source.path, source.images, source.name);
  throw ConfigError(fmt::format("unknown dataset format '{}'", source.format));
}

ImportedDataset sample_questions(ImportedDataset data, std::size_t n, std::uint64_t seed) {
  if (n >= data.questions.size()) return data;
  std::vector<std::size_t> idx(data.questions.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(derive_seed(seed, "sample"));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + rng.uniform_index(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  std::vector<Question> kept;
  std::set<std::string> docs;
  for (std::size_t i : idx) {
    docs.insert(data.questions[i].document_id);
    kept.push_back(std::move(data.questions[i]));
  }
  data.questions = std::move(kept);
  std::erase_if(data.documents, [&](const Document& d) { return !docs.count(d.id); });
  return data;
}

void write_dataset(const ImportedDataset& data, const fs::path& out) {
  const fs::path docs_dir = out / "documents";
  const fs::path images_dir = docs_dir / "images";
  fs::create_directories(images_dir);
  std::set<std::string> ids;
  for (const auto& doc : data.documents) {
    if (!ids.insert(doc.id).second) throw IngestionError(fmt::format("duplicate document id '{}'", doc.id));
    Document copy = doc;
    for (auto& page : copy.pages) {
      const std::string bytes = read_file(page.image);
      std::string ext = fs::path(page.image).extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
      if (ext == ".jpeg") ext = ".jpg";
      const std::string name = sha256_hex(bytes) + ext;
      const fs::path target = images_dir / name;
      if (!fs::exists(target)) write_file_atomic(target, bytes);
      page.image = "images/" + name;
    }
    validate(copy);
    save_document(docs_dir / (doc.id + ".json"), copy);
  }
  for (const auto& q : data.questions)
    if (!ids.count(q.document_id))
      throw IngestionError(fmt::format("question '{}' references unknown document '{}'", q.id, q.document_id));
  save_questions(out / "questions.jsonl", data.questions);
}

}  // namespace vrduqa::service
