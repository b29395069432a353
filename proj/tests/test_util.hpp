#ifndef AIRFI_TESTS_TEST_UTIL_HPP
#define AIRFI_TESTS_TEST_UTIL_HPP

#include <filesystem>
#include <random>
#include <string>

namespace airfi::testing {

// Self-cleaning scratch directory under the system temp root.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() /
           (tag + "_" + std::to_string(rd()) + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

}  // namespace airfi::testing

#endif  // AIRFI_TESTS_TEST_UTIL_HPP
