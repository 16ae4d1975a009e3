#include "d2i/pair_dataset.hpp"

#include <algorithm>
#include <charconv>

#include "d2i/errors.hpp"

namespace d2i {

int PairDataset::num_classes() const {
  int max_label = -1;
  for (const auto& r : records) max_label = std::max(max_label, r.label);
  return max_label + 1;
}

PairDataset parse_pair_tsv(std::istream& in) {
  PairDataset ds;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols.size() < 3 || cols.size() > 4) {
      throw FormatError("dataset line " + std::to_string(line_no) + ": expected 3 or 4 columns, got " +
                        std::to_string(cols.size()));
    }
    if (cols[0].empty()) {
      throw FormatError("dataset line " + std::to_string(line_no) + ": empty group_id");
    }
    PairRecord rec;
    rec.group_id = cols[0];
    auto [ptr, ec] = std::from_chars(cols[1].data(), cols[1].data() + cols[1].size(), rec.label);
    if (ec != std::errc() || ptr != cols[1].data() + cols[1].size()) {
      throw FormatError("dataset line " + std::to_string(line_no) + ": non-integer label '" + cols[1] + "'");
    }
    if (rec.label < 0) {
      throw FormatError("dataset line " + std::to_string(line_no) + ": negative label");
    }
    rec.text_a = cols[2];
    if (cols.size() == 4) rec.text_b = cols[3];
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

}  // namespace d2i
