#include "dcs/toml.hpp"

#include <cctype>
#include <string>

#include <fmt/format.h>

#include "dcs/corpus.hpp"
#include "dcs/error.hpp"

namespace dcs {
namespace {

class TomlParser {
 public:
  TomlParser(std::string_view text, std::string_view name) : s_(text), name_(name) {}

  Json parse() {
    Json root = Json::object();
    Json* table = &root;
    while (true) {
      skip_ws_comments_newlines();
      if (eof()) break;
      if (peek() == '[') {
        ++pos_;
        if (peek() == '[') fail("arrays of tables are not supported");
        table = &root;
        for (const auto& part : dotted_key(']')) {
          auto& next = (*table)[part];
          if (next.is_null()) next = Json::object();
          if (!next.is_object()) fail(fmt::format("'{}' is not a table", part));
          table = &next;
        }
        expect(']');
      } else {
        auto keys = dotted_key('=');
        expect('=');
        skip_inline_ws();
        Json* target = table;
        for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
          auto& next = (*target)[keys[i]];
          if (next.is_null()) next = Json::object();
          target = &next;
        }
        if (target->contains(keys.back())) fail(fmt::format("duplicate key '{}'", keys.back()));
        (*target)[keys.back()] = value();
      }
      end_of_line();
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(fmt::format("{}:{}: {}", name_, line_, what));
  }

  bool eof() const { return pos_ >= s_.size(); }
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < s_.size() ? s_[pos_ + ahead] : '\0';
  }
  bool starts_with(std::string_view lit) const { return s_.substr(pos_).starts_with(lit); }

  void advance() {
    if (s_[pos_] == '\n') ++line_;
    ++pos_;
  }

  void skip_inline_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }

  void skip_ws_comments_newlines() {
    while (!eof()) {
      const char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else if (c == '#') {
        while (!eof() && peek() != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  void end_of_line() {
    skip_inline_ws();
    if (!eof() && peek() == '#') {
      while (!eof() && peek() != '\n') ++pos_;
    }
    if (!eof() && peek() == '\r') ++pos_;
    if (!eof() && peek() != '\n') fail("expected end of line");
  }

  void expect(char c) {
    skip_inline_ws();
    if (peek() != c) fail(fmt::format("expected '{}'", c));
    ++pos_;
  }

  std::vector<std::string> dotted_key(char terminator) {
    std::vector<std::string> parts;
    while (true) {
      skip_inline_ws();
      if (peek() == '"') {
        parts.push_back(basic_string());
      } else if (peek() == '\'') {
        parts.push_back(literal_string());
      } else {
        std::string key;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
                          peek() == '-')) {
          key += peek();
          ++pos_;
        }
        if (key.empty()) fail("expected a key");
        parts.push_back(std::move(key));
      }
      skip_inline_ws();
      if (peek() == '.') {
        ++pos_;
        continue;
      }
      if (peek() != terminator) fail(fmt::format("expected '{}' after key", terminator));
      return parts;
    }
  }

  Json value() {
    if (starts_with("\"\"\"")) return multiline_basic();
    if (starts_with("'''")) return multiline_literal();
    if (peek() == '"') return basic_string();
    if (peek() == '\'') return literal_string();
    if (peek() == '[') return array();
    if (starts_with("true")) {
      pos_ += 4;
      return true;
    }
    if (starts_with("false")) {
      pos_ += 5;
      return false;
    }
    return number();
  }

  Json array() {
    ++pos_;
    Json out = Json::array();
    while (true) {
      skip_ws_comments_newlines();
      if (peek() == ']') {
        ++pos_;
        return out;
      }
      out.push_back(value());
      skip_ws_comments_newlines();
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  Json number() {
    std::string text;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' ||
                      peek() == '-' || peek() == '.' || peek() == '_')) {
      if (peek() != '_') text += peek();
      ++pos_;
    }
    if (text.empty()) fail("expected a value");
    try {
      std::size_t used = 0;
      if (text.find_first_of(".eE") == std::string::npos) {
        const long long v = std::stoll(text, &used);
        if (used == text.size()) return v;
      } else {
        const double v = std::stod(text, &used);
        if (used == text.size()) return v;
      }
    } catch (const std::exception&) {
    }
    fail(fmt::format("invalid value '{}'", text));
  }

  void escape(std::string& out) {
    ++pos_;
    const char c = peek();
    ++pos_;
    switch (c) {
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      case 'r': out += '\r'; break;
      case 'b': out += '\b'; break;
      case 'f': out += '\f'; break;
      case '"': out += '"'; break;
      case '\\': out += '\\'; break;
      case 'u':
      case 'U': {
        const std::size_t len = c == 'u' ? 4 : 8;
        if (pos_ + len > s_.size()) fail("truncated unicode escape");
        const auto cp = std::stoul(std::string(s_.substr(pos_, len)), nullptr, 16);
        pos_ += len;
        append_utf8(out, static_cast<char32_t>(cp));
        break;
      }
      default:
        fail(fmt::format("invalid escape '\\{}'", c));
    }
  }

  static void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
      out += static_cast<char>(cp);
    } else if (cp < 0x800) {
      out += static_cast<char>(0xc0 | (cp >> 6));
      out += static_cast<char>(0x80 | (cp & 0x3f));
    } else if (cp < 0x10000) {
      out += static_cast<char>(0xe0 | (cp >> 12));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
      out += static_cast<char>(0x80 | (cp & 0x3f));
    } else {
      out += static_cast<char>(0xf0 | (cp >> 18));
      out += static_cast<char>(0x80 | ((cp >> 12) & 0x3f));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
      out += static_cast<char>(0x80 | (cp & 0x3f));
    }
  }

  std::string basic_string() {
    ++pos_;
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      if (peek() == '"') {
        ++pos_;
        return out;
      }
      if (peek() == '\\') {
        escape(out);
      } else {
        out += peek();
        ++pos_;
      }
    }
  }

  std::string literal_string() {
    ++pos_;
    const auto end = s_.find('\'', pos_);
    const auto nl = s_.find('\n', pos_);
    if (end == std::string_view::npos || (nl != std::string_view::npos && nl < end)) {
      fail("unterminated literal string");
    }
    std::string out(s_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return out;
  }

  void skip_leading_newline() {
    if (starts_with("\r\n")) {
      pos_ += 2;
      ++line_;
    } else if (peek() == '\n') {
      advance();
    }
  }

  std::string multiline_basic() {
    pos_ += 3;
    skip_leading_newline();
    std::string out;
    while (true) {
      if (eof()) fail("unterminated multi-line string");
      if (starts_with("\"\"\"")) {
        pos_ += 3;
        while (peek() == '"') {
          out += '"';
          ++pos_;
        }
        return out;
      }
      if (peek() == '\\') {
        const char next = peek(1);
        if (next == '\n' || next == '\r' || next == ' ' || next == '\t') {
          // line-ending backslash: trim the newline and following whitespace
          ++pos_;
          while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) advance();
          continue;
        }
        escape(out);
        continue;
      }
      out += peek();
      advance();
    }
  }

  std::string multiline_literal() {
    pos_ += 3;
    skip_leading_newline();
    const auto end = s_.find("'''", pos_);
    if (end == std::string_view::npos) fail("unterminated multi-line literal string");
    std::string out(s_.substr(pos_, end - pos_));
    for (char c : out) {
      if (c == '\n') ++line_;
    }
    pos_ = end + 3;
    return out;
  }

  std::string_view s_;
  std::string_view name_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

}  // namespace

Json parse_toml(std::string_view text, std::string_view source_name) {
  return TomlParser(text, source_name).parse();
}

Json load_toml(const std::filesystem::path& path) {
  return parse_toml(read_file(path), path.string());
}

}  // namespace dcs
