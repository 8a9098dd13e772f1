#include "wozlab/data_files.hpp"

#include <cstdlib>
#include <string>

#include "wozlab/error.hpp"

#ifndef WOZLAB_SOURCE_DATA_DIR
#define WOZLAB_SOURCE_DATA_DIR ""
#endif
#ifndef WOZLAB_INSTALL_DATA_DIR
#define WOZLAB_INSTALL_DATA_DIR ""
#endif

namespace wozlab {

std::filesystem::path data_file(std::string_view name) {
  namespace fs = std::filesystem;
  std::string tried;
  auto probe = [&](const char* dir) -> fs::path {
    if (dir == nullptr || *dir == '\0') return {};
    fs::path p = fs::path(dir) / name;
    tried += " " + p.string();
    return fs::exists(p) ? p : fs::path{};
  };
  if (auto p = probe(std::getenv("WOZLAB_DATA_DIR")); !p.empty()) return p;
  if (auto p = probe(WOZLAB_SOURCE_DATA_DIR); !p.empty()) return p;
  if (auto p = probe(WOZLAB_INSTALL_DATA_DIR); !p.empty()) return p;
  throw ConfigError("data file '" + std::string(name) + "' not found; tried" + tried);
}

}  // namespace wozlab
