#pragma once

#include <filesystem>
#include <string_view>

#include "json.hpp"

namespace dcs {

/// Reads the TOML subset used by deepcodeseek.toml and prompts.toml into a
/// JSON object: [table] and [a.b] headers, bare/quoted keys, basic and literal
/// strings (single- and multi-line), integers, floats, booleans, and flat
/// arrays of those. Throws ConfigError with a line number on anything else.
nlohmann::json parse_toml(std::string_view text, std::string_view source_name = "<toml>");
nlohmann::json load_toml(const std::filesystem::path& path);

}  // namespace dcs
