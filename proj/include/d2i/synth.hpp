#pragma once

#include <cstdint>
#include <vector>

#include "d2i/embedding.hpp"
#include "d2i/mnist.hpp"
#include "d2i/pair_dataset.hpp"
#include "d2i/text.hpp"

namespace d2i::synth {

// Zipf-distributed unigram stream with planted adjacent word pairs, split
// into fixed-length documents. Feeds the co-occurrence / bound lab.
struct ZipfCorpusOptions {
  int vocab = 50;
  long tokens = 100000;
  double zipf_exponent = 1.0;
  int planted_pairs = 8;       // pair m couples word 2m with word 2m+1; clamped to vocab/2
  double plant_prob = 0.2;     // chance a position starts a planted pair
  int doc_length = 1000;
  std::uint64_t seed = 0;
};

std::vector<TokenSequence> zipf_corpus(const ZipfCorpusOptions& opts);

// Two-class corpus with disjoint keyword vocabularies plus shared filler
// words, and a random Gaussian embedding table covering all of them.
// Class c documents draw keywords only from vocabulary c, so the classes
// are separable by construction.
struct SeparableCorpusOptions {
  int documents = 2000;
  int keywords_per_class = 40;
  int filler_words = 100;
  int min_length = 30;
  int max_length = 80;
  double keyword_prob = 0.5;
  int embedding_dim = 16;
  std::uint64_t seed = 0;
};

struct SeparableCorpus {
  PairDataset data;        // group_id "doc<N>", binary labels, text_a only
  EmbeddingTable table;
};

SeparableCorpus separable_corpus(const SeparableCorpusOptions& opts);

// Procedurally rendered 28x28 digit images in the ten-class MNIST layout:
// a 5x7 glyph per digit, random scale/placement/intensity, light blur and
// pixel noise. A stand-in when the real corpus is not on disk.
ImageDataset synth_digits(int count, std::uint64_t seed);

}  // namespace d2i::synth
