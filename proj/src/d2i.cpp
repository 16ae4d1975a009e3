#include "d2i/d2i.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "d2i/errors.hpp"

namespace d2i {

namespace {

// Inner products accumulate in double regardless of the float32 storage.
double dot(const std::vector<float>& a, const std::vector<float>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += double(a[i]) * double(b[i]);
  return s;
}

// Per-token embedding views, optionally unit-normalized (zero vectors stay zero).
std::vector<std::vector<float>> gather_embeddings(const TokenSequence& seq, const EmbeddingTable& table,
                                                  bool cosine) {
  std::vector<std::vector<float>> xs;
  xs.reserve(seq.size());
  for (const auto& tok : seq.tokens) {
    std::vector<float> x = table.lookup(tok);
    if (cosine) {
      const double norm = std::sqrt(dot(x, x));
      if (norm > 0.0) {
        for (float& v : x) v = static_cast<float>(v / norm);
      }
    }
    xs.push_back(std::move(x));
  }
  return xs;
}

}  // namespace

Eigen::MatrixXd self_attention_full(const TokenSequence& seq, const EmbeddingTable& table) {
  if (seq.empty()) throw DataError("self_attention_full: empty token sequence");
  const int n = static_cast<int>(seq.size());
  auto xs = gather_embeddings(seq, table, false);
  Eigen::MatrixXd s(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const double v = dot(xs[i], xs[j]);
      s(i, j) = v;
      s(j, i) = v;
    }
  }
  return s;
}

D2IImage transform(const TokenSequence& seq, const EmbeddingTable& table, const D2IConfig& cfg) {
  if (cfg.k < 1) throw ConfigError("d2i: k must be >= 1");
  if (seq.empty()) throw DataError("d2i: empty token sequence");
  const int n = static_cast<int>(seq.size());
  const int k = cfg.k;
  auto xs = gather_embeddings(seq, table, cfg.normalize == Normalize::cosine);

  // Short documents cannot wrap without counting a neighbor twice.
  const bool circular = cfg.boundary == Boundary::circular && n >= 2 * k + 1;

  Eigen::MatrixXd full(n, 2 * k);
  for (int i = 0; i < n; ++i) {
    for (int offset = -k; offset <= k; ++offset) {
      if (offset == 0) continue;
      const int col = offset < 0 ? offset + k : k + offset - 1;
      int j = i + offset;
      if (j < 0 || j >= n) {
        if (!circular) {
          full(i, col) = 0.0;
          continue;
        }
        j = ((j % n) + n) % n;
      }
      full(i, col) = dot(xs[i], xs[j]);
    }
  }

  D2IImage img;
  img.k = k;
  img.config = cfg;
  if (cfg.drop_zero_rows) {
    std::vector<int> kept;
    for (int i = 0; i < n; ++i) {
      if ((full.row(i).array() != 0.0).any()) kept.push_back(i);
    }
    img.data.resize(static_cast<int>(kept.size()), 2 * k);
    for (std::size_t r = 0; r < kept.size(); ++r) img.data.row(static_cast<int>(r)) = full.row(kept[r]);
    img.kept_word_indices = std::move(kept);
  } else {
    img.data = std::move(full);
    img.kept_word_indices.resize(n);
    for (int i = 0; i < n; ++i) img.kept_word_indices[i] = i;
  }

  if (cfg.normalize == Normalize::per_image_standardize && !img.empty()) {
    const double mean = img.data.mean();
    const double var = (img.data.array() - mean).square().mean();
    const double sd = std::sqrt(var);
    if (sd > 0.0) {
      img.data = (img.data.array() - mean) / sd;
    } else {
      img.data.setZero();
    }
  }
  return img;
}

D2IImage resize(const D2IImage& img, int target_h, int target_w, ResizeMethod method) {
  if (target_h < 1 || target_w < 1) throw ConfigError("resize: target dims must be >= 1");
  if (img.data.rows() == 0 || img.data.cols() == 0) throw DataError("resize: empty image");
  const int src_h = static_cast<int>(img.data.rows());
  const int src_w = static_cast<int>(img.data.cols());

  D2IImage out;
  out.k = img.k;
  out.config = img.config;
  out.kept_word_indices = img.kept_word_indices;  // provenance of the pre-resize rows
  out.data.setZero(target_h, target_w);

  if (method == ResizeMethod::bilinear) {
    auto src_coord = [](int t, int target, int source) {
      if (target == 1 || source == 1) return 0.0;
      return double(t) * double(source - 1) / double(target - 1);
    };
    for (int r = 0; r < target_h; ++r) {
      const double sy = src_coord(r, target_h, src_h);
      const int y0 = std::min(int(sy), src_h - 1);
      const int y1 = std::min(y0 + 1, src_h - 1);
      const double fy = sy - y0;
      for (int c = 0; c < target_w; ++c) {
        const double sx = src_coord(c, target_w, src_w);
        const int x0 = std::min(int(sx), src_w - 1);
        const int x1 = std::min(x0 + 1, src_w - 1);
        const double fx = sx - x0;
        const double top = img.data(y0, x0) * (1.0 - fx) + img.data(y0, x1) * fx;
        const double bot = img.data(y1, x0) * (1.0 - fx) + img.data(y1, x1) * fx;
        out.data(r, c) = top * (1.0 - fy) + bot * fy;
      }
    }
  } else {
    // Source row/col range that lands in the target, and where it starts there.
    const int src_y = src_h > target_h ? (src_h - target_h) / 2 : 0;
    const int dst_y = src_h < target_h ? (target_h - src_h) / 2 : 0;
    const int src_x = src_w > target_w ? (src_w - target_w) / 2 : 0;
    const int dst_x = src_w < target_w ? (target_w - src_w) / 2 : 0;
    const int copy_h = std::min(src_h, target_h);
    const int copy_w = std::min(src_w, target_w);
    out.data.block(dst_y, dst_x, copy_h, copy_w) = img.data.block(src_y, src_x, copy_h, copy_w);
  }
  return out;
}

std::vector<std::uint8_t> export_pgm(const D2IImage& img) {
  if (img.data.rows() == 0 || img.data.cols() == 0) throw DataError("export_pgm: empty image");
  const int h = static_cast<int>(img.data.rows());
  const int w = static_cast<int>(img.data.cols());
  const double lo = img.data.minCoeff();
  const double hi = img.data.maxCoeff();
  const double span = hi - lo;

  char header[64];
  const int header_len = std::snprintf(header, sizeof(header), "P5\n%d %d\n255\n", w, h);
  std::vector<std::uint8_t> bytes(header, header + header_len);
  bytes.reserve(bytes.size() + std::size_t(h) * w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double v = span > 0.0 ? (img.data(r, c) - lo) / span : 0.0;
      bytes.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
    }
  }
  return bytes;
}

EdgeCheckReport edge_response(const D2IImage& raw, const TokenSequence& seq, const EmbeddingTable& table) {
  if (raw.config.drop_zero_rows || raw.config.normalize != Normalize::none) {
    throw ConfigError("edge_response: image must be built with drop_zero_rows=false, normalize=none");
  }
  const int n = static_cast<int>(seq.size());
  const int k = raw.k;
  auto xs = gather_embeddings(seq, table, false);
  const bool circular = raw.config.boundary == Boundary::circular && n >= 2 * k + 1;
  const std::vector<float> zero(table.dim(), 0.0f);

  auto neighbor = [&](int i, int offset) -> const std::vector<float>& {
    int j = i + offset;
    if (j >= 0 && j < n) return xs[j];
    if (!circular) return zero;
    return xs[((j % n) + n) % n];
  };

  EdgeCheckReport report;
  for (int i = 0; i < n; ++i) {
    for (int m = 1; m + 1 <= k; ++m) {
      const auto& a = neighbor(i, m + 1);
      const auto& b = neighbor(i, m);
      const double expected = dot(xs[i], a) - dot(xs[i], b);
      const double got = raw.data(i, raw.column_for_offset(m + 1)) - raw.data(i, raw.column_for_offset(m));
      report.max_abs_discrepancy = std::max(report.max_abs_discrepancy, std::abs(got - expected));
      ++report.checked;
    }
  }
  return report;
}

}  // namespace d2i
