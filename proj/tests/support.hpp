#pragma once

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "bioinvert/error.hpp"
#include "bioinvert/paths.hpp"
#include "tempdir.hpp"

namespace bioinvert::testing {

inline std::string fixture(const std::string& rel) { return data_path("fixtures/" + rel); }

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace bioinvert::testing

// Expects `stmt` to throw bioinvert::Error with `code`.
#define EXPECT_BIO_ERROR(stmt, expected)                                                         \
  do {                                                                                           \
    try {                                                                                        \
      stmt;                                                                                      \
      ADD_FAILURE() << "expected " << ::bioinvert::to_string(expected) << ", nothing thrown";    \
    } catch (const ::bioinvert::Error& e_) {                                                     \
      EXPECT_EQ(::bioinvert::to_string(e_.code()), ::bioinvert::to_string(expected)) << e_.what(); \
    }                                                                                            \
  } while (0)
