// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qat/autodiff/tensor.hpp"

namespace qat::nn {

enum class LayerKind {
  conv,
  fc,
  batchnorm,
  act,  // clip(x, 0, 1), quantized to k_a bits in quantized models
  relu,
  maxpool,
  avgpool,  // kernel 0 means global
  flatten,
  residual_block,
  scalar,  // trainable output multiplier, active only in quantized models
};

const char* to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::act;
  std::string name;
  std::size_t out = 0;  // output channels (conv, residual_block) or features (fc)
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t pad = 1;
  bool bias = false;
  bool quantize_weights = true;
  bool quantize_acts = true;
  std::optional<std::string> tap_id;
};

/// Declarative network description. Input shape is (C,H,W).
struct ModelSpec {
  std::string name;
  ad::Shape input;
  std::size_t classes = 0;
  std::vector<LayerSpec> layers;

  std::vector<std::string> tap_ids() const;
  /// Stable text form; the basis of `hash()`.
  std::string canonical() const;
  /// FNV-1a 64 of `canonical()`.
  std::uint64_t hash() const;
};

/// Checks the structural rules and returns the per-sample output shape of
/// every layer. Throws ConfigError with the offending layer named.
///  - every conv is immediately followed by batchnorm
///  - fc layers consume a flattened input
///  - exactly two distinct taps, placed on act or residual_block layers
///  - the last fc produces `classes` outputs; a scalar layer may only follow it
std::vector<ad::Shape> validate(const ModelSpec& spec);

/// Trainable parameter count. `with_scalar` adds the output multiplier.
std::size_t parameter_count(const ModelSpec& spec, bool with_scalar);

}  // namespace qat::nn
