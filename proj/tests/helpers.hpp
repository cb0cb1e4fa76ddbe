#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <span>
#include <vector>

#include "l2l/rng.hpp"
#include "l2l/tensor.hpp"

namespace l2l::test {

inline Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = true, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("l2l_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
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

 private:
  std::filesystem::path path_;
};

}  // namespace l2l::test

namespace l2l::test {

// dst row r ← src row source_of[r]; rank-1 tensors are treated as columns.
inline void copy_rows_permuted(const Tensor& src, Tensor dst, const std::vector<std::size_t>& source_of,
                               std::size_t first_row = 0) {
  const std::size_t width = src.rank() == 1 ? 1 : src.numel() / src.dim(0);
  auto out = dst.mutable_data();
  const auto in = src.data();
  for (std::size_t r = 0; r < source_of.size(); ++r)
    for (std::size_t c = 0; c < width; ++c)
      out[(first_row + r) * width + c] = in[(first_row + source_of[r]) * width + c];
}

inline std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  rng.shuffle(p);
  return p;
}

}  // namespace l2l::test
