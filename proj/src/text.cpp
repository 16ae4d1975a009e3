#include "d2i/text.hpp"

#include <cctype>
#include <utility>

namespace d2i {

namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }
bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; }

}  // namespace

TokenSequence tokenize(const std::string& text, std::string source_id) {
  TokenSequence seq;
  seq.source_id = std::move(source_id);
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    while (i < n && is_space(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t begin = i;
    while (i < n && !is_space(static_cast<unsigned char>(text[i]))) ++i;
    if (begin == i) break;
    std::size_t end = i;
    while (begin < end && is_punct(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && is_punct(static_cast<unsigned char>(text[end - 1]))) --end;
    if (begin == end) continue;
    std::string token = text.substr(begin, end - begin);
    for (char& c : token) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    seq.tokens.push_back(std::move(token));
  }
  return seq;
}

}  // namespace d2i
