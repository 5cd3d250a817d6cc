#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

inline std::filesystem::path fixtures_dir() {
  const char* env = std::getenv("CVSSLAB_FIXTURES");
  return env != nullptr ? std::filesystem::path(env)
                        : std::filesystem::path("tests/fixtures");
}
