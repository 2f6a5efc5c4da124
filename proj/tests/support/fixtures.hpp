// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "qat/data/dataset.hpp"

namespace qat::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Learnable toy images: each class lights a different horizontal band,
/// plus uniform noise. No mean attached.
data::Dataset synthetic_dataset(std::size_t n, const ad::Shape& image, std::size_t classes,
                                data::Split split, std::uint64_t seed);

/// Writes train/test as the four MNIST IDX files (images must be 1x28x28).
void write_mnist_dir(const std::filesystem::path& dir, const data::Dataset& train,
                     const data::Dataset& test);

/// A small MNIST-format dataset on disk: 28x28, 10 classes.
void make_toy_mnist(const std::filesystem::path& dir, std::size_t train_n = 256,
                    std::size_t test_n = 128, std::uint64_t seed = 7);

}  // namespace qat::testing
