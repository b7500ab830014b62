#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "vrduqa/document.hpp"
#include "vrduqa/io.hpp"

namespace vrduqa {

/// (width, height) of an encoded image file; throws IngestionError when the
/// file cannot be decoded.
std::pair<int, int> image_size(const fs::path& path);

/// PNG crop of `bbox` grown by `margin` pixels on each side, clamped to the
/// image. Throws IngestionError on unreadable images.
std::string crop_png(const fs::path& image_path, const BoundingBox& bbox, int margin = 2);

/// Re-encodes an image so its longer side lies within [min_px, max_px],
/// preserving aspect ratio. Images already in range are re-encoded unchanged.
std::string scale_image(std::string_view encoded, int min_px, int max_px);

/// MIME type guessed from the file extension.
std::string image_mime(const fs::path& path);

// Synthetic-fixture text channel. Fixture pages carry each element's text as
// a pixel run inside the element box; the mock OCR/captioning providers read
// it back. Layout of the run (raster order, `row_width` pixels per row):
//   magic, row_width lo/hi, length lo/hi, then one pixel per byte.

/// Writes `text` into a BGR 8-bit image buffer at (x, y). Returns false when
/// the run does not fit within `max_width` x `max_height`.
bool embed_text(unsigned char* bgr, int image_width, int image_height, int x, int y,
                int max_width, int max_height, std::string_view text);

/// Finds and decodes the first embedded run in an encoded image.
std::optional<std::string> extract_embedded_text(std::string_view encoded);

}  // namespace vrduqa
