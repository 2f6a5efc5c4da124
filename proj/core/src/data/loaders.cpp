// SPDX-License-Identifier: Apache-2.0
#include "qat/data/loaders.hpp"

#include <cstdio>
#include <string>

#include "qat/error.hpp"
#include "qat/io.hpp"

namespace qat::data {

namespace fs = std::filesystem;

namespace {

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08X", v);
  return buf;
}

std::string read_existing(const fs::path& path) {
  if (!fs::exists(path)) throw DatasetMissingError("dataset file not found: '" + path.string() + "'");
  return read_file(path);
}

std::uint32_t be32(const std::string& bytes, std::size_t at) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + at);
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

void put_be32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>(v & 0xFF));
}

// Validates magic and header length; returns the header size.
std::size_t check_header(const std::string& bytes, const fs::path& path, std::uint32_t magic,
                         std::size_t dims) {
  if (bytes.size() < 4) {
    throw DataFormatError("'" + path.string() + "': truncated IDX header");
  }
  const std::uint32_t got = be32(bytes, 0);
  if (got != magic) {
    throw DataFormatError("'" + path.string() + "': bad magic " + hex32(got) + ", expected " +
                          hex32(magic));
  }
  const std::size_t header = 4 + 4 * dims;
  if (bytes.size() < header) {
    throw DataFormatError("'" + path.string() + "': truncated IDX header");
  }
  return header;
}

}  // namespace

IdxImages read_idx_images(const fs::path& path) {
  const std::string bytes = read_existing(path);
  const std::size_t header = check_header(bytes, path, kIdxImagesMagic, 3);
  IdxImages img;
  img.count = be32(bytes, 4);
  img.rows = be32(bytes, 8);
  img.cols = be32(bytes, 12);
  const std::size_t expected = img.count * img.rows * img.cols;
  const std::size_t body = bytes.size() - header;
  if (body < expected) {
    throw DataFormatError("'" + path.string() + "': truncated, header declares " +
                          std::to_string(img.count) + " images but only " + std::to_string(body) +
                          " pixel bytes follow");
  }
  if (body > expected) {
    throw DataFormatError("'" + path.string() + "': " + std::to_string(body - expected) +
                          " trailing bytes after image data");
  }
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return img;
}

std::vector<int> read_idx_labels(const fs::path& path) {
  const std::string bytes = read_existing(path);
  const std::size_t header = check_header(bytes, path, kIdxLabelsMagic, 1);
  const std::size_t count = be32(bytes, 4);
  const std::size_t body = bytes.size() - header;
  if (body < count) {
    throw DataFormatError("'" + path.string() + "': truncated, header declares " +
                          std::to_string(count) + " labels but only " + std::to_string(body) +
                          " bytes follow");
  }
  if (body > count) {
    throw DataFormatError("'" + path.string() + "': " + std::to_string(body - count) +
                          " trailing bytes after label data");
  }
  std::vector<int> labels(count);
  for (std::size_t i = 0; i < count; ++i) {
    labels[i] = static_cast<unsigned char>(bytes[header + i]);
  }
  return labels;
}

void write_idx_images(const fs::path& path, const IdxImages& images) {
  if (images.pixels.size() != images.count * images.rows * images.cols) {
    throw ShapeError("IDX image payload does not match count x rows x cols");
  }
  std::string out;
  put_be32(out, kIdxImagesMagic);
  put_be32(out, static_cast<std::uint32_t>(images.count));
  put_be32(out, static_cast<std::uint32_t>(images.rows));
  put_be32(out, static_cast<std::uint32_t>(images.cols));
  out.append(reinterpret_cast<const char*>(images.pixels.data()), images.pixels.size());
  write_file_atomic(path, out);
}

void write_idx_labels(const fs::path& path, std::span<const int> labels) {
  std::string out;
  put_be32(out, kIdxLabelsMagic);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (int l : labels) {
    if (l < 0 || l > 255) throw ShapeError("IDX label out of byte range");
    out.push_back(static_cast<char>(l));
  }
  write_file_atomic(path, out);
}

CifarBatch read_cifar10_batch(const fs::path& path) {
  const std::string bytes = read_existing(path);
  if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0) {
    throw DataFormatError("'" + path.string() + "': size " + std::to_string(bytes.size()) +
                          " is not a positive multiple of " + std::to_string(kCifarRecordBytes));
  }
  const std::size_t n = bytes.size() / kCifarRecordBytes;
  const std::size_t dim = kCifarRecordBytes - 1;
  CifarBatch b;
  b.labels.resize(n);
  b.pixels.resize(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    const char* rec = bytes.data() + i * kCifarRecordBytes;
    const int label = static_cast<unsigned char>(rec[0]);
    if (label >= static_cast<int>(kCifarClasses)) {
      throw DataFormatError("'" + path.string() + "': record " + std::to_string(i) + " has label " +
                            std::to_string(label) + " (must be < 10)");
    }
    b.labels[i] = label;
    std::copy(rec + 1, rec + kCifarRecordBytes, reinterpret_cast<char*>(b.pixels.data() + i * dim));
  }
  return b;
}

void write_cifar10_batch(const fs::path& path, const CifarBatch& batch) {
  const std::size_t dim = kCifarRecordBytes - 1;
  if (batch.pixels.size() != batch.labels.size() * dim) {
    throw ShapeError("CIFAR payload does not match label count x 3072");
  }
  std::string out;
  out.reserve(batch.labels.size() * kCifarRecordBytes);
  for (std::size_t i = 0; i < batch.labels.size(); ++i) {
    if (batch.labels[i] < 0 || batch.labels[i] > 255) throw ShapeError("CIFAR label out of byte range");
    out.push_back(static_cast<char>(batch.labels[i]));
    out.append(reinterpret_cast<const char*>(batch.pixels.data() + i * dim), dim);
  }
  write_file_atomic(path, out);
}

namespace {

Dataset mnist_split(const fs::path& dir, const std::string& prefix, Split split) {
  const fs::path images_path = dir / (prefix + "-images-idx3-ubyte");
  const fs::path labels_path = dir / (prefix + "-labels-idx1-ubyte");
  IdxImages img = read_idx_images(images_path);
  std::vector<int> labels = read_idx_labels(labels_path);
  if (img.count != labels.size()) {
    throw DataFormatError("count mismatch: '" + images_path.string() + "' has " +
                          std::to_string(img.count) + " images but '" + labels_path.string() +
                          "' has " + std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 10) {
      throw DataFormatError("'" + labels_path.string() + "': label " + std::to_string(labels[i]) +
                            " at index " + std::to_string(i) + " (must be < 10)");
    }
  }
  Dataset d;
  d.name = "mnist";
  d.split = split;
  d.image_shape = {1, img.rows, img.cols};
  d.classes = 10;
  d.pixels = std::move(img.pixels);
  d.labels = std::move(labels);
  return d;
}

void require_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw DatasetMissingError("dataset directory not found: '" + dir.string() + "'");
  }
}

}  // namespace

std::pair<Dataset, Dataset> load_mnist(const fs::path& dir) {
  require_dir(dir);
  Dataset train = mnist_split(dir, "train", Split::train);
  Dataset test = mnist_split(dir, "t10k", Split::test);
  attach_mean(train, test);
  return {std::move(train), std::move(test)};
}

std::pair<Dataset, Dataset> load_cifar10(const fs::path& dir) {
  require_dir(dir);
  auto make = [](Split split) {
    Dataset d;
    d.name = "cifar10";
    d.split = split;
    d.image_shape = {3, 32, 32};
    d.classes = kCifarClasses;
    return d;
  };
  Dataset train = make(Split::train);
  for (int i = 1; i <= 5; ++i) {
    CifarBatch b = read_cifar10_batch(dir / ("data_batch_" + std::to_string(i) + ".bin"));
    train.pixels.insert(train.pixels.end(), b.pixels.begin(), b.pixels.end());
    train.labels.insert(train.labels.end(), b.labels.begin(), b.labels.end());
  }
  Dataset test = make(Split::test);
  CifarBatch t = read_cifar10_batch(dir / "test_batch.bin");
  test.pixels = std::move(t.pixels);
  test.labels = std::move(t.labels);
  attach_mean(train, test);
  return {std::move(train), std::move(test)};
}

}  // namespace qat::data
