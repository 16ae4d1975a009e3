#include "d2i/mnist.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "d2i/errors.hpp"

namespace d2i {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw FormatError(std::string("IDX stream truncated while reading ") + what);
  }
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

ImageDataset load_mnist(std::istream& image_stream, std::istream& label_stream) {
  const std::uint32_t image_magic = read_be32(image_stream, "image magic");
  if (image_magic != kImageMagic) {
    throw FormatError("bad IDX image magic 0x" + std::to_string(image_magic));
  }
  const std::uint32_t count = read_be32(image_stream, "image count");
  const std::uint32_t rows = read_be32(image_stream, "rows");
  const std::uint32_t cols = read_be32(image_stream, "cols");
  if (rows == 0 || cols == 0) throw FormatError("IDX image dims must be positive");

  const std::uint32_t label_magic = read_be32(label_stream, "label magic");
  if (label_magic != kLabelMagic) {
    throw FormatError("bad IDX label magic 0x" + std::to_string(label_magic));
  }
  const std::uint32_t label_count = read_be32(label_stream, "label count");
  if (label_count != count) {
    throw FormatError("IDX count mismatch: " + std::to_string(count) + " images vs " +
                      std::to_string(label_count) + " labels");
  }

  ImageDataset ds;
  ds.height = static_cast<int>(rows);
  ds.width = static_cast<int>(cols);
  ds.images.reserve(count);
  ds.labels.reserve(count);

  const std::size_t pixels = std::size_t(rows) * cols;
  std::vector<unsigned char> buf(pixels);
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!image_stream.read(reinterpret_cast<char*>(buf.data()), std::streamsize(pixels))) {
      throw FormatError("IDX image payload truncated at image " + std::to_string(i));
    }
    std::vector<float> img(pixels);
    for (std::size_t p = 0; p < pixels; ++p) img[p] = buf[p] / 255.0f;
    ds.images.push_back(std::move(img));

    char label = 0;
    if (!label_stream.get(label)) {
      throw FormatError("IDX label payload truncated at label " + std::to_string(i));
    }
    ds.labels.push_back(static_cast<unsigned char>(label));
  }
  return ds;
}

void write_idx(const ImageDataset& ds, std::ostream& image_stream, std::ostream& label_stream) {
  write_be32(image_stream, kImageMagic);
  write_be32(image_stream, static_cast<std::uint32_t>(ds.size()));
  write_be32(image_stream, static_cast<std::uint32_t>(ds.height));
  write_be32(image_stream, static_cast<std::uint32_t>(ds.width));
  for (const auto& img : ds.images) {
    for (float v : img) {
      const float clamped = std::clamp(v, 0.0f, 1.0f);
      image_stream.put(static_cast<char>(std::lround(clamped * 255.0f)));
    }
  }
  write_be32(label_stream, kLabelMagic);
  write_be32(label_stream, static_cast<std::uint32_t>(ds.size()));
  for (int label : ds.labels) label_stream.put(static_cast<char>(label));
}

}  // namespace d2i
