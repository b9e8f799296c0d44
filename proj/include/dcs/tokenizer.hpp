#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace dcs {

/// Bumped whenever tokenize() output changes; persisted indexes record it.
inline constexpr std::string_view kTokenizerTag = "dcs-tok-v1";

/// Lowercased word pieces. Splits on any non-alphanumeric byte (so snake_case
/// splits on '_') and on camelCase boundaries, including acronym runs:
/// "XMLDocument" -> {"xml", "document"}, "getArrayUtil" -> {"get", "array", "util"}.
/// Letter/digit transitions do not split ("parm1" stays whole). Bytes >= 0x80
/// are treated as word characters so UTF-8 text survives intact.
std::vector<std::string> tokenize(std::string_view text);

/// Maximal runs of identifier characters [A-Za-z0-9_$], case preserved.
std::vector<std::string_view> split_identifiers(std::string_view text);

std::string to_lower(std::string_view text);

/// Splits on '\n'. A trailing newline does not produce an extra empty line.
std::vector<std::string_view> split_lines(std::string_view text);

bool is_blank(std::string_view line);

}  // namespace dcs

namespace dcs {

/// True when `name` occurs in `text` as a whole identifier, case-insensitively
/// ("new ArrayUtil()" matches ArrayUtil, "arrayOfUtils" does not).
bool contains_identifier(std::string_view text, std::string_view name);

}  // namespace dcs
