#include "dcs/tokenizer.hpp"

#include <cctype>

namespace dcs {
namespace {

bool is_word(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }
bool is_upper(unsigned char c) { return c >= 'A' && c <= 'Z'; }
bool is_lower(unsigned char c) { return c >= 'a' && c <= 'z'; }
bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }

void split_camel(std::string_view word, std::vector<std::string>& out) {
  std::size_t start = 0;
  for (std::size_t i = 1; i < word.size(); ++i) {
    const auto prev = static_cast<unsigned char>(word[i - 1]);
    const auto cur = static_cast<unsigned char>(word[i]);
    bool boundary = false;
    if (is_upper(cur) && (is_lower(prev) || is_digit(prev))) {
      boundary = true;
    } else if (is_upper(cur) && is_upper(prev) && i + 1 < word.size() &&
               is_lower(static_cast<unsigned char>(word[i + 1]))) {
      boundary = true;
    }
    if (boundary) {
      out.push_back(to_lower(word.substr(start, i - start)));
      start = i;
    }
  }
  out.push_back(to_lower(word.substr(start)));
}

}  // namespace

std::string to_lower(std::string_view text) {
  std::string out(text);
  for (auto& c : out) {
    if (is_upper(static_cast<unsigned char>(c))) c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !is_word(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && is_word(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) split_camel(text.substr(start, i - start), tokens);
  }
  return tokens;
}

std::vector<std::string_view> split_identifiers(std::string_view text) {
  std::vector<std::string_view> out;
  auto ident = [](char c) {
    const auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) != 0 || c == '_' || c == '$';
  };
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !ident(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && ident(text[i])) ++i;
    if (i > start) out.push_back(text.substr(start, i - start));
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  auto push = [&lines](std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
  };
  std::size_t start = 0;
  while (start < text.size()) {
    const auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      push(text.substr(start));
      break;
    }
    push(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

bool is_blank(std::string_view line) {
  for (char c : line) {
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

}  // namespace dcs

namespace dcs {

bool contains_identifier(std::string_view text, std::string_view name) {
  if (name.empty()) return false;
  const auto needle = to_lower(name);
  for (auto ident : split_identifiers(text)) {
    if (ident.size() == needle.size() && to_lower(ident) == needle) return true;
  }
  return false;
}

}  // namespace dcs
