#pragma once

// Dataset importers. Every source is normalized into document JSON files and
// a questions.jsonl; page images are copied under content-addressed names.

#include <string>
#include <vector>

#include "vrduqa/document.hpp"
#include "vrduqa/question.hpp"
#include "vrduqa/service/config.hpp"

namespace vrduqa::service {

/// Documents with page.image holding an absolute source path.
struct ImportedDataset {
  std::vector<Document> documents;
  std::vector<Question> questions;
};

/// Native layout: <dir>/documents/*.json (images relative to that directory)
/// and <dir>/questions.jsonl.
ImportedDataset import_native(const fs::path& dir, const std::string& dataset_name);

/// {"data": [{questionId, question, doc_id, page_ids, answers}]}; page images
/// at <images>/<page_id>.(jpg|png).
ImportedDataset import_mpdocvqa(const fs::path& json_path, const fs::path& images, const std::string& dataset_name);

/// {"data": [{questionId, question, docId, answers}]}; page images at
/// <images>/<docId>_<n>.(jpg|png), ordered by n.
ImportedDataset import_dude(const fs::path& json_path, const fs::path& images, const std::string& dataset_name);

ImportedDataset import_source(const DatasetSource& source);

/// N questions chosen uniformly without replacement by `seed`, kept in input
/// order; documents no longer referenced are dropped. N >= size keeps all.
ImportedDataset sample_questions(ImportedDataset data, std::size_t n, std::uint64_t seed);

/// Writes <out>/documents/<id>.json, <out>/documents/images/<sha256>.<ext> and
/// <out>/questions.jsonl.
void write_dataset(const ImportedDataset& data, const fs::path& out);

}  // namespace vrduqa::service
