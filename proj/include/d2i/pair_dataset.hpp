#pragma once

#include <istream>
#include <optional>
#include <string>
#include <vector>

namespace d2i {

// One row of the canonical TSV layout: `group_id TAB label TAB text_a [TAB text_b]`.
struct PairRecord {
  std::string group_id;
  int label = 0;
  std::string text_a;
  std::optional<std::string> text_b;
};

struct PairDataset {
  std::vector<PairRecord> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  int num_classes() const;  // max label + 1
};

// Records come back in file order. Throws FormatError (with the line number)
// on a wrong column count or a non-integer label.
PairDataset parse_pair_tsv(std::istream& in);

}  // namespace d2i
