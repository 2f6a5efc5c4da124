// SPDX-License-Identifier: Apache-2.0
#include "fixtures.hpp"

#include <atomic>
#include <random>
#include <system_error>
#include <unistd.h>

#include "qat/data/loaders.hpp"

namespace qat::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("qat_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

data::Dataset synthetic_dataset(std::size_t n, const ad::Shape& image, std::size_t classes,
                                data::Split split, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> noise(0, 60);
  std::uniform_int_distribution<std::size_t> pick(0, classes - 1);
  data::Dataset d;
  d.name = "mnist";
  d.split = split;
  d.image_shape = image;
  d.classes = classes;
  const std::size_t C = image[0], H = image[1], W = image[2];
  d.pixels.resize(n * C * H * W);
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = pick(rng);
    d.labels[i] = static_cast<int>(label);
    const std::size_t band = H / classes ? H / classes : 1;
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t y = 0; y < H; ++y) {
        const bool lit = (y / band) % classes == label;
        for (std::size_t x = 0; x < W; ++x) {
          d.pixels[((i * C + c) * H + y) * W + x] = static_cast<std::uint8_t>((lit ? 180 : 0) + noise(rng));
        }
      }
    }
  }
  return d;
}

void write_mnist_dir(const fs::path& dir, const data::Dataset& train, const data::Dataset& test) {
  auto write = [&](const std::string& prefix, const data::Dataset& d) {
    data::IdxImages img{d.size(), d.image_shape[1], d.image_shape[2], d.pixels};
    data::write_idx_images(dir / (prefix + "-images-idx3-ubyte"), img);
    data::write_idx_labels(dir / (prefix + "-labels-idx1-ubyte"), d.labels);
  };
  write("train", train);
  write("t10k", test);
}

void make_toy_mnist(const fs::path& dir, std::size_t train_n, std::size_t test_n, std::uint64_t seed) {
  write_mnist_dir(dir, synthetic_dataset(train_n, {1, 28, 28}, 10, data::Split::train, seed),
                  synthetic_dataset(test_n, {1, 28, 28}, 10, data::Split::test, seed + 1));
}

}  // namespace qat::testing
