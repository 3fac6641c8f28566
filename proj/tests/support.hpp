// Copyright (C) 2026 The spdr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "spdr/embedding_set.hpp"
#include "spdr/rng.hpp"
#include "spdr/sparse_vector.hpp"

namespace spdr::test {

inline std::filesystem::path data_dir() { return SPDR_TEST_DATA_DIR; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "spdr") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
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

/// Random sparse vector with roughly `density` of the dims set, values in
/// (0, scale].
inline SparseVector random_sparse(Rng& rng, std::uint32_t dim, double density,
                                  double scale = 1.0) {
  std::vector<SparseEntry> entries;
  for (std::uint32_t i = 0; i < dim; ++i) {
    if (rng.uniform() < density) {
      const float v = static_cast<float>(scale * (1.0 - rng.uniform()));
      if (v > 0.0f) entries.push_back({i, v});
    }
  }
  return SparseVector(dim, std::move(entries));
}

inline std::vector<double> random_vector(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

inline SparseEmbeddingSet random_sparse_set(Rng& rng, std::size_t count, std::uint32_t dim,
                                            double density) {
  SparseEmbeddingSet set(dim);
  for (std::size_t i = 0; i < count; ++i) {
    set.add("r" + std::to_string(i), random_sparse(rng, dim, density));
  }
  return set;
}

inline DenseEmbeddingSet random_dense_set(Rng& rng, std::size_t count, std::uint32_t dim) {
  DenseEmbeddingSet set(dim);
  for (std::size_t i = 0; i < count; ++i) {
    const auto v = random_vector(rng, dim);
    set.add<double>("d" + std::to_string(i), v);
  }
  return set;
}

}  // namespace spdr::test
