#include "d2i/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "d2i/errors.hpp"

namespace d2i::synth {

namespace {

std::string numbered(const char* prefix, int i) { return prefix + std::to_string(i); }

}  // namespace

std::vector<TokenSequence> zipf_corpus(const ZipfCorpusOptions& opts) {
  if (opts.vocab < 2 || opts.tokens < 1) throw ConfigError("zipf_corpus: bad vocab/token counts");
  if (opts.planted_pairs < 0) throw ConfigError("zipf_corpus: negative planted pair count");
  const int planted = std::min(opts.planted_pairs, opts.vocab / 2);

  std::vector<double> weights(opts.vocab);
  for (int r = 0; r < opts.vocab; ++r) weights[r] = 1.0 / std::pow(double(r + 1), opts.zipf_exponent);
  std::mt19937_64 rng(opts.seed);
  std::discrete_distribution<int> unigram(weights.begin(), weights.end());
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  std::vector<TokenSequence> docs;
  TokenSequence cur;
  cur.source_id = "synth0";
  long emitted = 0;
  auto emit = [&](int word) {
    cur.tokens.push_back(numbered("w", word));
    ++emitted;
    if (static_cast<int>(cur.tokens.size()) == opts.doc_length) {
      docs.push_back(std::move(cur));
      cur = TokenSequence{};
      cur.source_id = numbered("synth", static_cast<int>(docs.size()));
    }
  };

  while (emitted < opts.tokens) {
    if (planted > 0 && coin(rng) < opts.plant_prob && emitted + 1 < opts.tokens) {
      std::uniform_int_distribution<int> pick(0, planted - 1);
      const int m = pick(rng);
      emit(2 * m);
      emit(2 * m + 1);
    } else {
      emit(unigram(rng));
    }
  }
  if (!cur.tokens.empty()) docs.push_back(std::move(cur));
  return docs;
}

SeparableCorpus separable_corpus(const SeparableCorpusOptions& opts) {
  if (opts.documents < 2) throw ConfigError("separable_corpus: need at least two documents");
  if (opts.min_length < 1 || opts.max_length < opts.min_length) {
    throw ConfigError("separable_corpus: bad length range");
  }
  std::mt19937_64 rng(opts.seed);

  std::unordered_map<std::string, std::vector<float>> entries;
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double scale = 1.0 / std::sqrt(double(opts.embedding_dim));
  auto add_word = [&](const std::string& token) {
    std::vector<float> vec(opts.embedding_dim);
    for (auto& v : vec) v = static_cast<float>(gauss(rng) * scale);
    entries.emplace(token, std::move(vec));
  };
  for (int i = 0; i < opts.keywords_per_class; ++i) add_word(numbered("apple", i));
  for (int i = 0; i < opts.keywords_per_class; ++i) add_word(numbered("brick", i));
  for (int i = 0; i < opts.filler_words; ++i) add_word(numbered("fill", i));

  std::uniform_int_distribution<int> length(opts.min_length, opts.max_length);
  std::uniform_int_distribution<int> keyword(0, opts.keywords_per_class - 1);
  std::uniform_int_distribution<int> filler(0, opts.filler_words - 1);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  SeparableCorpus out{PairDataset{}, EmbeddingTable(opts.embedding_dim, std::move(entries))};
  for (int d = 0; d < opts.documents; ++d) {
    const int label = d % 2;  // balanced by construction
    const char* prefix = label == 0 ? "apple" : "brick";
    std::string text;
    const int len = length(rng);
    for (int t = 0; t < len; ++t) {
      if (!text.empty()) text += ' ';
      text += coin(rng) < opts.keyword_prob ? numbered(prefix, keyword(rng))
                                            : numbered("fill", filler(rng));
    }
    PairRecord rec;
    rec.group_id = numbered("doc", d);
    rec.label = label;
    rec.text_a = std::move(text);
    out.data.records.push_back(std::move(rec));
  }
  return out;
}

namespace {

// 5x7 glyphs, row-major, one string per digit.
constexpr const char* kGlyphs[10] = {
    "01110"
    "10001"
    "10011"
    "10101"
    "11001"
    "10001"
    "01110",
    "00100"
    "01100"
    "00100"
    "00100"
    "00100"
    "00100"
    "01110",
    "01110"
    "10001"
    "00001"
    "00010"
    "00100"
    "01000"
    "11111",
    "11111"
    "00010"
    "00100"
    "00010"
    "00001"
    "10001"
    "01110",
    "00010"
    "00110"
    "01010"
    "10010"
    "11111"
    "00010"
    "00010",
    "11111"
    "10000"
    "11110"
    "00001"
    "00001"
    "10001"
    "01110",
    "00110"
    "01000"
    "10000"
    "11110"
    "10001"
    "10001"
    "01110",
    "11111"
    "00001"
    "00010"
    "00100"
    "01000"
    "01000"
    "01000",
    "01110"
    "10001"
    "10001"
    "01110"
    "10001"
    "10001"
    "01110",
    "01110"
    "10001"
    "10001"
    "01111"
    "00001"
    "00010"
    "01100"};

}  // namespace

ImageDataset synth_digits(int count, std::uint64_t seed) {
  if (count < 1) throw ConfigError("synth_digits: count must be >= 1");
  constexpr int kSize = 28;
  ImageDataset ds;
  ds.height = kSize;
  ds.width = kSize;
  ds.images.reserve(count);
  ds.labels.reserve(count);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> digit(0, 9);
  std::uniform_int_distribution<int> glyph_scale(2, 3);
  std::uniform_real_distribution<double> intensity(0.6, 1.0);
  std::normal_distribution<double> noise(0.0, 0.06);

  for (int i = 0; i < count; ++i) {
    const int label = digit(rng);
    const char* glyph = kGlyphs[label];
    const int scale = glyph_scale(rng);
    const int gw = 5 * scale, gh = 7 * scale;
    std::uniform_int_distribution<int> off_x(1, kSize - gw - 2);
    std::uniform_int_distribution<int> off_y(1, kSize - gh - 2);
    const int ox = off_x(rng), oy = off_y(rng);
    const double level = intensity(rng);

    std::vector<float> img(kSize * kSize, 0.0f);
    for (int y = 0; y < gh; ++y) {
      for (int x = 0; x < gw; ++x) {
        if (glyph[(y / scale) * 5 + x / scale] == '1') {
          img[(oy + y) * kSize + (ox + x)] = static_cast<float>(level);
        }
      }
    }
    // 3x3 box blur softens the hard glyph edges.
    std::vector<float> blurred(kSize * kSize, 0.0f);
    for (int y = 0; y < kSize; ++y) {
      for (int x = 0; x < kSize; ++x) {
        double acc = 0.0;
        int cells = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int sy = y + dy, sx = x + dx;
            if (sy < 0 || sy >= kSize || sx < 0 || sx >= kSize) continue;
            acc += img[sy * kSize + sx];
            ++cells;
          }
        }
        blurred[y * kSize + x] = static_cast<float>(acc / cells);
      }
    }
    for (auto& v : blurred) {
      v = std::clamp(v + static_cast<float>(noise(rng)), 0.0f, 1.0f);
    }
    ds.images.push_back(std::move(blurred));
    ds.labels.push_back(label);
  }
  return ds;
}

}  // namespace d2i::synth
