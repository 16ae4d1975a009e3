#pragma once

#include <string>
#include <vector>

namespace d2i {

struct TokenSequence {
  std::vector<std::string> tokens;
  std::string source_id;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
};

// Lowercases, splits on whitespace, strips leading/trailing punctuation per
// token and drops tokens that end up empty. Bytes outside ASCII pass through
// unchanged. Idempotent on its own output joined by single spaces.
TokenSequence tokenize(const std::string& text, std::string source_id = {});

}  // namespace d2i
