#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "attrsel/rng.hpp"
#include "attrsel/tensor.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("attrsel_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

inline attrsel::Matrix random_matrix(std::size_t rows, std::size_t cols, attrsel::Rng& rng, double scale = 1.0) {
  attrsel::Matrix m(rows, cols);
  for (double& x : m.data()) x = scale * rng.normal();
  return m;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace testing
