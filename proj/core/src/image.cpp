#include "vrduqa/image.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <fmt/format.h>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "vrduqa/error.hpp"

namespace vrduqa {

namespace {

cv::Mat load(const fs::path& path) {
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (img.empty()) throw IngestionError(fmt::format("cannot decode image '{}'", path.string()));
  return img;
}

cv::Mat decode(std::string_view encoded) {
  std::vector<unsigned char> buf(encoded.begin(), encoded.end());
  cv::Mat img = cv::imdecode(buf, cv::IMREAD_COLOR);
  if (img.empty()) throw IngestionError("cannot decode in-memory image");
  return img;
}

std::string encode_png(const cv::Mat& img) {
  std::vector<unsigned char> buf;
  // Fixed parameters so identical pixels always give identical bytes.
  if (!cv::imencode(".png", img, buf, {cv::IMWRITE_PNG_COMPRESSION, 6}))
    throw IngestionError("PNG encoding failed");
  return std::string(buf.begin(), buf.end());
}

// Pixel markers in BGR order.
constexpr unsigned char kMagic[3] = {0x56, 0x34, 0x12};
constexpr unsigned char kDataB = 0x3C;  // data pixels: B = 0x3C, G = 0xC3, R = byte
constexpr unsigned char kDataG = 0xC3;

}  // namespace

std::pair<int, int> image_size(const fs::path& path) {
  const cv::Mat img = load(path);
  return {img.cols, img.rows};
}

std::string crop_png(const fs::path& image_path, const BoundingBox& bbox, int margin) {
  const cv::Mat img = load(image_path);
  const int x0 = std::clamp(static_cast<int>(std::floor(bbox.x0)) - margin, 0, img.cols);
  const int y0 = std::clamp(static_cast<int>(std::floor(bbox.y0)) - margin, 0, img.rows);
  const int x1 = std::clamp(static_cast<int>(std::ceil(bbox.x1)) + margin, 0, img.cols);
  const int y1 = std::clamp(static_cast<int>(std::ceil(bbox.y1)) + margin, 0, img.rows);
  if (x1 <= x0 || y1 <= y0)
    throw GeometryError(fmt::format("crop [{}, {}, {}, {}] empty for image '{}' ({}x{})", bbox.x0,
                                    bbox.y0, bbox.x1, bbox.y1, image_path.string(), img.cols, img.rows));
  return encode_png(img(cv::Rect(x0, y0, x1 - x0, y1 - y0)));
}

std::string scale_image(std::string_view encoded, int min_px, int max_px) {
  const cv::Mat img = decode(encoded);
  const int longer = std::max(img.cols, img.rows);
  double factor = 1.0;
  if (longer > max_px) factor = static_cast<double>(max_px) / longer;
  else if (longer < min_px) factor = static_cast<double>(min_px) / longer;
  if (factor == 1.0) return encode_png(img);
  cv::Mat out;
  cv::resize(img, out, cv::Size(), factor, factor, factor < 1 ? cv::INTER_AREA : cv::INTER_CUBIC);
  return encode_png(out);
}

std::string image_mime(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  return "image/png";
}

bool embed_text(unsigned char* bgr, int image_width, int image_height, int x, int y, int max_width,
                int max_height, std::string_view text) {
  if (text.size() > 0xFFFF || max_width < 6) return false;
  const int row_width = max_width;
  const std::size_t total = 5 + text.size();
  const int rows = static_cast<int>((total + row_width - 1) / row_width);
  if (rows > max_height || x + row_width > image_width || y + rows > image_height) return false;
  auto put = [&](std::size_t i, unsigned char b, unsigned char g, unsigned char r) {
    const int px = x + static_cast<int>(i % row_width);
    const int py = y + static_cast<int>(i / row_width);
    unsigned char* p = bgr + (static_cast<std::size_t>(py) * image_width + px) * 3;
    p[0] = b;
    p[1] = g;
    p[2] = r;
  };
  put(0, kMagic[0], kMagic[1], kMagic[2]);
  put(1, kDataB, kDataG, static_cast<unsigned char>(row_width & 0xFF));
  put(2, kDataB, kDataG, static_cast<unsigned char>(row_width >> 8));
  put(3, kDataB, kDataG, static_cast<unsigned char>(text.size() & 0xFF));
  put(4, kDataB, kDataG, static_cast<unsigned char>(text.size() >> 8));
  for (std::size_t i = 0; i < text.size(); ++i)
    put(5 + i, kDataB, kDataG, static_cast<unsigned char>(text[i]));
  return true;
}

std::optional<std::string> extract_embedded_text(std::string_view encoded) {
  const cv::Mat img = decode(encoded);
  auto px = [&](int col, int row) { return img.ptr<unsigned char>(row) + col * 3; };
  for (int row = 0; row < img.rows; ++row) {
    for (int col = 0; col < img.cols; ++col) {
      const unsigned char* p = px(col, row);
      if (p[0] != kMagic[0] || p[1] != kMagic[1] || p[2] != kMagic[2]) continue;
      if (col + 2 >= img.cols) continue;
      auto data = [&](int c, int r) -> std::optional<unsigned char> {
        if (c >= img.cols || r >= img.rows) return std::nullopt;
        const unsigned char* q = px(c, r);
        if (q[0] != kDataB || q[1] != kDataG) return std::nullopt;
        return q[2];
      };
      auto w0 = data(col + 1, row), w1 = data(col + 2, row);
      if (!w0 || !w1) continue;
      const int row_width = *w0 | (*w1 << 8);
      if (row_width < 6) continue;
      auto at = [&](std::size_t i) {
        return data(col + static_cast<int>(i % row_width), row + static_cast<int>(i / row_width));
      };
      auto l0 = at(3), l1 = at(4);
      if (!l0 || !l1) continue;
      const std::size_t len = *l0 | (*l1 << 8);
      std::string text;
      text.reserve(len);
      bool ok = true;
      for (std::size_t i = 0; i < len; ++i) {
        auto b = at(5 + i);
        if (!b) {
          ok = false;
          break;
        }
        text.push_back(static_cast<char>(*b));
      }
      if (ok) return text;
    }
  }
  return std::nullopt;
}

}  // namespace vrduqa
