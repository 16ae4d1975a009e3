#pragma once

#include <istream>
#include <ostream>
#include <vector>

namespace d2i {

// Grayscale images scaled to [0,1], one flat row-major H*W vector per image.
struct ImageDataset {
  std::vector<std::vector<float>> images;
  std::vector<int> labels;
  int height = 0;
  int width = 0;

  std::size_t size() const { return images.size(); }
};

// IDX pair loader (big-endian headers, magic 0x00000803 / 0x00000801).
// Pixel bytes map to v/255. Throws FormatError on a bad magic, a count
// mismatch between the two files, or a truncated payload.
ImageDataset load_mnist(std::istream& image_stream, std::istream& label_stream);

// Writes the same IDX pair back out; load_mnist(write_idx(ds)) == ds up to
// the one byte of quantization.
void write_idx(const ImageDataset& ds, std::ostream& image_stream, std::ostream& label_stream);

}  // namespace d2i
