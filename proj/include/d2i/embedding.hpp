#pragma once

#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace d2i {

// Immutable token -> vector map. Values are parsed as doubles and stored as
// 32-bit floats to match the neural engine precision. Any token absent from
// the table resolves to the all-zero vector of the table's dimension.
class EmbeddingTable {
 public:
  EmbeddingTable(int dim, std::unordered_map<std::string, std::vector<float>> entries);

  int dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  bool contains(const std::string& token) const { return entries_.count(token) != 0; }

  // Unknown tokens return a reference to the shared zero vector.
  const std::vector<float>& lookup(const std::string& token) const;

  // One record per line: token followed by dim space-separated values.
  // Reparsing the output yields identical lookups for every stored token.
  void write(std::ostream& out) const;

  const std::unordered_map<std::string, std::vector<float>>& entries() const { return entries_; }

 private:
  int dim_;
  std::unordered_map<std::string, std::vector<float>> entries_;
  std::vector<float> zero_;
};

// Parses the `token v1 v2 ... vd` line format. The first line fixes d;
// on duplicate tokens the first occurrence wins.
// Throws FormatError (naming the line) on dimension mismatch or a
// non-numeric field, DataError if the stream holds no records at all.
EmbeddingTable parse_embedding_file(std::istream& in);

}  // namespace d2i
