#include "d2i/nn/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "d2i/errors.hpp"

static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes little-endian");

namespace d2i::nn {

namespace {

constexpr char kMagic[4] = {'D', '2', 'I', '1'};
constexpr std::uint16_t kVersion = 1;

class ByteWriter {
 public:
  template <class T>
  void put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const char*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

  template <class T>
  T get() {
    T v;
    if (pos_ + sizeof(T) > bytes_.size()) throw FormatError("checkpoint truncated");
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void get_bytes(void* out, std::size_t n) {
    if (pos_ + n > bytes_.size()) throw FormatError("checkpoint truncated");
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t pos() const { return pos_; }
  std::size_t size() const { return bytes_.size(); }

 private:
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const char* data, std::size_t n) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(data), static_cast<uInt>(n)));
}

}  // namespace

void save_checkpoint(Cnn<float>& model, const CheckpointMeta& meta, const std::filesystem::path& path) {
  ByteWriter out;
  out.put_bytes(kMagic, 4);
  out.put<std::uint16_t>(kVersion);
  out.put<std::uint64_t>(meta.seed);
  out.put<std::uint32_t>(meta.epochs);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(meta.dataset_tag.size()));
  out.put_bytes(meta.dataset_tag.data(), meta.dataset_tag.size());

  const Shape3 in = model.input_shape();
  out.put<std::uint32_t>(static_cast<std::uint32_t>(in.c));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(in.h));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(in.w));
  out.put<std::uint64_t>(model.init_seed());

  const auto specs = model.specs();
  out.put<std::uint32_t>(static_cast<std::uint32_t>(specs.size()));
  for (const auto& s : specs) {
    out.put<std::uint8_t>(static_cast<std::uint8_t>(s.kind));
    out.put<std::uint32_t>(static_cast<std::uint32_t>(s.out_channels));
    out.put<std::uint32_t>(static_cast<std::uint32_t>(s.kernel));
    out.put<std::uint32_t>(static_cast<std::uint32_t>(s.units));
    out.put<float>(s.rate);
  }
  for (auto* p : model.params()) {
    out.put<std::uint64_t>(p->size());
    out.put_bytes(p->value.data(), p->size() * sizeof(float));
  }
  out.put<std::uint32_t>(crc_of(out.bytes().data(), out.bytes().size()));

  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open checkpoint for writing: " + path.string());
  file.write(out.bytes().data(), static_cast<std::streamsize>(out.bytes().size()));
  if (!file) throw IoError("short write to checkpoint: " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open checkpoint: " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());

  if (bytes.size() < 4 + sizeof(std::uint16_t) + sizeof(std::uint32_t)) {
    throw FormatError("checkpoint truncated");
  }
  const std::uint32_t stored_crc = [&] {
    std::uint32_t v;
    std::memcpy(&v, bytes.data() + bytes.size() - sizeof(v), sizeof(v));
    return v;
  }();
  if (crc_of(bytes.data(), bytes.size() - sizeof(std::uint32_t)) != stored_crc) {
    throw FormatError("checkpoint CRC mismatch");
  }

  ByteReader in(std::move(bytes));
  char magic[4];
  in.get_bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad checkpoint magic");
  if (in.get<std::uint16_t>() != kVersion) throw FormatError("unsupported checkpoint version");

  CheckpointMeta meta;
  meta.seed = in.get<std::uint64_t>();
  meta.epochs = in.get<std::uint32_t>();
  const auto tag_len = in.get<std::uint32_t>();
  meta.dataset_tag.resize(tag_len);
  in.get_bytes(meta.dataset_tag.data(), tag_len);

  Shape3 input;
  input.c = static_cast<int>(in.get<std::uint32_t>());
  input.h = static_cast<int>(in.get<std::uint32_t>());
  input.w = static_cast<int>(in.get<std::uint32_t>());
  const auto init_seed = in.get<std::uint64_t>();

  const auto layer_count = in.get<std::uint32_t>();
  std::vector<LayerSpec> specs;
  specs.reserve(layer_count);
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    LayerSpec s;
    s.kind = static_cast<LayerSpec::Kind>(in.get<std::uint8_t>());
    s.out_channels = static_cast<int>(in.get<std::uint32_t>());
    s.kernel = static_cast<int>(in.get<std::uint32_t>());
    s.units = static_cast<int>(in.get<std::uint32_t>());
    s.rate = in.get<float>();
    specs.push_back(s);
  }

  LoadedCheckpoint loaded{Cnn<float>(input, specs, init_seed), meta};
  for (auto* p : loaded.model.params()) {
    const auto count = in.get<std::uint64_t>();
    if (count != p->size()) throw FormatError("checkpoint parameter count mismatch");
    in.get_bytes(p->value.data(), count * sizeof(float));
  }
  if (in.pos() + sizeof(std::uint32_t) != in.size()) {
    throw FormatError("checkpoint has trailing bytes");
  }
  return loaded;
}

}  // namespace d2i::nn
