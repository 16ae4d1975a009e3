#include "d2i/embedding.hpp"

#include <charconv>
#include <sstream>
#include <utility>

#include "d2i/errors.hpp"

namespace d2i {

EmbeddingTable::EmbeddingTable(int dim, std::unordered_map<std::string, std::vector<float>> entries)
    : dim_(dim), entries_(std::move(entries)), zero_(static_cast<std::size_t>(dim), 0.0f) {
  if (dim <= 0) throw ConfigError("embedding dimension must be positive");
  for (const auto& [token, vec] : entries_) {
    if (vec.size() != static_cast<std::size_t>(dim)) {
      throw ConfigError("embedding vector for '" + token + "' has wrong dimension");
    }
  }
}

const std::vector<float>& EmbeddingTable::lookup(const std::string& token) const {
  auto it = entries_.find(token);
  return it == entries_.end() ? zero_ : it->second;
}

void EmbeddingTable::write(std::ostream& out) const {
  std::ostringstream line;
  line.precision(9);  // round-trips float32 exactly
  for (const auto& [token, vec] : entries_) {
    line.str("");
    line << token;
    for (float v : vec) line << ' ' << v;
    out << line.str() << '\n';
  }
}

EmbeddingTable parse_embedding_file(std::istream& in) {
  std::unordered_map<std::string, std::vector<float>> entries;
  std::string line;
  int dim = -1;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string token;
    fields >> token;
    std::vector<float> vec;
    std::string field;
    while (fields >> field) {
      double value = 0.0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
      if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw FormatError("embedding file line " + std::to_string(line_no) +
                          ": non-numeric field '" + field + "'");
      }
      vec.push_back(static_cast<float>(value));
    }
    if (vec.empty()) {
      throw FormatError("embedding file line " + std::to_string(line_no) + ": no values");
    }
    if (dim < 0) {
      dim = static_cast<int>(vec.size());
    } else if (vec.size() != static_cast<std::size_t>(dim)) {
      throw FormatError("embedding file line " + std::to_string(line_no) +
                        ": dimension mismatch (expected " + std::to_string(dim) + ", got " +
                        std::to_string(vec.size()) + ")");
    }
    entries.try_emplace(std::move(token), std::move(vec));  // first occurrence wins
  }
  if (entries.empty()) throw DataError("embedding file holds no records");
  return EmbeddingTable(dim, std::move(entries));
}

}  // namespace d2i
