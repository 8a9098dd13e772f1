#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace wozlab::utf8 {

/// Decodes UTF-8; invalid bytes map to U+FFFD one byte at a time.
std::u32string decode(std::string_view s);
void append(std::string& out, char32_t cp);
std::string encode(std::u32string_view s);
std::size_t length(std::string_view s);

}  // namespace wozlab::utf8
