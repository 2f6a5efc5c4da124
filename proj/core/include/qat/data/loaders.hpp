// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "qat/data/dataset.hpp"

namespace qat::data {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
inline constexpr std::size_t kCifarRecordBytes = 3073;
inline constexpr std::size_t kCifarClasses = 10;

struct IdxImages {
  std::size_t count = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> pixels;
};

/// Big-endian IDX readers. Throw DataFormatError on bad magic, short
/// files or trailing garbage.
IdxImages read_idx_images(const std::filesystem::path& path);
std::vector<int> read_idx_labels(const std::filesystem::path& path);

void write_idx_images(const std::filesystem::path& path, const IdxImages& images);
void write_idx_labels(const std::filesystem::path& path, std::span<const int> labels);

struct CifarBatch {
  std::vector<std::uint8_t> pixels;  // N x 3 x 32 x 32, channel-planar
  std::vector<int> labels;
};

/// One CIFAR-10 binary batch: 3073-byte records of label + R,G,B planes.
CifarBatch read_cifar10_batch(const std::filesystem::path& path);
void write_cifar10_batch(const std::filesystem::path& path, const CifarBatch& batch);

/// `dir` holds train-{images,labels} and t10k-{images,labels} IDX files.
std::pair<Dataset, Dataset> load_mnist(const std::filesystem::path& dir);

/// `dir` holds data_batch_1..5.bin and test_batch.bin.
std::pair<Dataset, Dataset> load_cifar10(const std::filesystem::path& dir);

}  // namespace qat::data
