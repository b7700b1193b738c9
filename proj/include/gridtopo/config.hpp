#pragma once

#include <map>
#include <string>

namespace gridtopo {

// Parses a `key = value` file; '#' starts a comment, blank lines ignored.
std::map<std::string, std::string> parse_kv_file(const std::string& path);
std::map<std::string, std::string> parse_kv_text(const std::string& text);

}  // namespace gridtopo
