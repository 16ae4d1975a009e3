#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "d2i/embedding.hpp"
#include "d2i/text.hpp"

namespace d2i {

enum class Boundary { zero_pad, circular };
enum class Normalize { none, per_image_standardize, cosine };

struct D2IConfig {
  int k = 25;                  // half-window; image width is 2k
  Boundary boundary = Boundary::zero_pad;
  bool drop_zero_rows = true;  // elide all-zero rows (UNK centers, dead windows)
  Normalize normalize = Normalize::none;
};

// Banded inner-product image: one row per kept word, 2k columns holding the
// dot products with the word's neighbors at offsets -k..-1,+1..+k (the self
// product never appears). An image with zero rows is the "everything was
// elided" signal, not an error.
struct D2IImage {
  Eigen::MatrixXd data;
  std::vector<int> kept_word_indices;  // original token positions, strictly increasing
  int k = 0;
  D2IConfig config;

  bool empty() const { return data.rows() == 0; }
  // Column for a neighbor offset. Offsets -k..-1 map to columns 0..k-1,
  // offsets +1..+k to columns k..2k-1.
  int column_for_offset(int offset) const { return offset < 0 ? offset + k : k + offset - 1; }
};

// Full N x N matrix of pairwise embedding inner products, diagonal retained.
Eigen::MatrixXd self_attention_full(const TokenSequence& seq, const EmbeddingTable& table);

// The banded transform. Out-of-range neighbors contribute zero under
// zero_pad and wrap modulo N under circular; documents shorter than 2k+1
// fall back to zero_pad so no neighbor is counted twice. Normalization is
// applied after row elision. Throws DataError on an empty sequence.
D2IImage transform(const TokenSequence& seq, const EmbeddingTable& table, const D2IConfig& cfg);

enum class ResizeMethod { bilinear, crop_or_pad };

// bilinear: separable interpolation over the (rows-1)/(target-1) grid, so
// resizing to the image's own shape is the identity. crop_or_pad:
// center-crop oversize axes, zero-pad short ones symmetrically (extra
// row/column goes after).
D2IImage resize(const D2IImage& img, int target_h, int target_w, ResizeMethod method);

// Binary PGM (P5, maxval 255) with the per-image affine map min->0, max->255;
// a constant image maps to all zeros. Throws DataError on an empty image.
std::vector<std::uint8_t> export_pgm(const D2IImage& img);

struct EdgeCheckReport {
  double max_abs_discrepancy = 0.0;
  std::size_t checked = 0;
};

// Verifies the edge-filter identity on an unelided, unnormalized image:
// data[i][col(+m+1)] - data[i][col(+m)] must equal x_i . (x_{i+m+1} - x_{i+m})
// for every valid (i, m). Returns the worst absolute discrepancy found.
EdgeCheckReport edge_response(const D2IImage& raw, const TokenSequence& seq, const EmbeddingTable& table);

}  // namespace d2i
