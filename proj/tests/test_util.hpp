#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "difftomo/error.hpp"

#define CHECK_ERROR_KIND(expr, expected_kind)                          \
  do {                                                                 \
    bool thrown_ = false;                                              \
    try {                                                              \
      (void)(expr);                                                    \
    } catch (const difftomo::Error& e_) {                              \
      thrown_ = true;                                                  \
      CHECK_MESSAGE(e_.kind() == (expected_kind), e_.what());          \
    }                                                                  \
    CHECK_MESSAGE(thrown_, "expected an exception from " #expr);       \
  } while (0)

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("difftomo_test_" + name);
  std::filesystem::create_directories(p);
  return p;
}
