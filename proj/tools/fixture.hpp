#pragma once

#include "vrduqa/io.hpp"

namespace vrduqa::fixture {

/// Writes <out>/dataset (native format plus layout.jsonl) from a fixture
/// description, and copies config.json / mock.json from beside it.
void render(const fs::path& fixture_json, const fs::path& out);

}  // namespace vrduqa::fixture
