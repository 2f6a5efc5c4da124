// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "qat/nn/spec.hpp"

namespace qat::nn {

/// Plain CNN: three conv/BN/act/maxpool stages, two hidden FC layers with
/// BN (the guidance taps "fc1" and "fc2"), a biased classifier and the
/// scalar output layer. `width` is the first stage's channel count.
ModelSpec mini_alexnet(const ad::Shape& input, std::size_t classes, std::size_t width = 16);

/// Stem conv, three groups of two basic residual blocks (width, 2w, 4w;
/// the last two groups downsample), global average pool, biased
/// classifier and scalar layer. Taps sit on the outputs of groups 2 and 3.
ModelSpec mini_resnet(const ad::Shape& input, std::size_t classes, std::size_t width = 16);

/// Looks up "mini-alexnet" or "mini-resnet".
ModelSpec model_by_name(const std::string& name, const ad::Shape& input, std::size_t classes,
                        std::size_t width);

}  // namespace qat::nn
