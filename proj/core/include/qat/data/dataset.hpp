// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "qat/autodiff/tensor.hpp"

namespace qat::data {

enum class Split { train, test };

/// Labelled images kept in their 8-bit source form. Pixel reals are
/// v / 255; the per-pixel mean is a train-split statistic shared by both
/// splits of a dataset.
struct Dataset {
  std::string name;
  Split split = Split::train;
  ad::Shape image_shape;  // (C,H,W)
  std::size_t classes = 0;
  std::vector<std::uint8_t> pixels;
  std::vector<int> labels;
  std::vector<double> mean;

  std::size_t size() const { return labels.size(); }
  std::size_t image_size() const { return ad::numel(image_shape); }

  /// The first `n` samples (all when n == 0 or n >= size()).
  Dataset head(std::size_t n) const;
};

/// Per-pixel mean of `train` in [0,1] units.
std::vector<double> mean_image(const Dataset& train);

/// Computes the mean from `train` and attaches it to both splits.
void attach_mean(Dataset& train, Dataset& test);

/// All images as (N,C,H,W) reals v / 255, no centering.
template <class Real>
ad::Tensor<Real> raw_images(const Dataset& d);

}  // namespace qat::data
