#pragma once

#include <filesystem>
#include <string_view>

namespace wozlab {

/// Resolves a shipped data file (lexicons, stopwords, distributions).
/// Search order: $WOZLAB_DATA_DIR, the source tree, the install prefix.
/// Throws ConfigError if the file is found nowhere.
std::filesystem::path data_file(std::string_view name);

}  // namespace wozlab
