#pragma once

#include <cstdlib>
#include <string>
#include <string_view>

#ifndef BIOINVERT_DATA_DIR
#define BIOINVERT_DATA_DIR "."
#endif

namespace bioinvert {

// Shipped data (prompts/, fixtures/). BIOINVERT_DATA_DIR in the environment
// overrides the build-time location.
inline std::string data_path(std::string_view relative) {
  const char* env = std::getenv("BIOINVERT_DATA_DIR");
  std::string root = env && *env ? env : BIOINVERT_DATA_DIR;
  return root + "/" + std::string(relative);
}

}  // namespace bioinvert
