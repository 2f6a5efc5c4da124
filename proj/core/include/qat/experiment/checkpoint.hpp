// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "qat/autodiff/tensor.hpp"
#include "qat/nn/model.hpp"
#include "qat/quant/quantizer.hpp"

namespace qat::experiment {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Everything needed to rebuild the model a checkpoint belongs to.
struct CheckpointMeta {
  std::string dataset;
  std::string model;
  std::uint64_t width = 0;
  ad::Shape input;
  std::uint64_t classes = 0;
  std::uint64_t spec_hash = 0;
  quant::QuantConfig qc;
  std::uint32_t phase_index = 0;  // phases completed; 0 for a pretrained model
  std::string phase_name;
  std::string rng_state;  // textual std::mt19937_64 state
};

struct Blob {
  ad::Shape shape;
  std::uint8_t elem_bytes = 4;
  std::vector<std::uint8_t> bytes;  // little-endian reals

  template <class Real>
  ad::Tensor<Real> as() const;
  template <class Real>
  static Blob from(const ad::Tensor<Real>& t);
};

/// Single self-describing file: magic, version, metadata, named blobs and
/// a trailing FNV-1a 64 checksum of all preceding bytes.
struct Checkpoint {
  CheckpointMeta meta;
  std::map<std::string, Blob> blobs;

  void save(const std::filesystem::path& path) const;
  /// Throws CheckpointError on bad magic, unknown version, truncation or a
  /// checksum mismatch.
  static Checkpoint load(const std::filesystem::path& path);

  /// Adds "<prefix>param/<name>" and "<prefix>buffer/<name>" blobs.
  template <class Real>
  void store_model(nn::Model<Real>& model, const std::string& prefix = "");
  /// Copies parameters and BN buffers into `model`. Throws CheckpointError
  /// when the spec hash differs or a blob is missing or misshapen.
  template <class Real>
  void restore_model(nn::Model<Real>& model, const std::string& prefix = "") const;
  bool has(const std::string& name) const { return blobs.count(name) > 0; }
};

}  // namespace qat::experiment
