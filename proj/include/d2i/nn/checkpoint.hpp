#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "d2i/nn/model.hpp"

namespace d2i::nn {

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::uint32_t epochs = 0;
  std::string dataset_tag;
};

struct LoadedCheckpoint {
  Cnn<float> model;
  CheckpointMeta meta;
};

// Binary checkpoint: magic "D2I1", u16 version, training metadata, input
// shape, per-layer spec headers, float32 little-endian parameter payloads,
// trailing CRC32 over everything before it. Reload reproduces forward
// outputs bit-identically.
void save_checkpoint(Cnn<float>& model, const CheckpointMeta& meta, const std::filesystem::path& path);

// Throws FormatError on a bad magic/version, truncation or CRC mismatch.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace d2i::nn
