// SPDX-License-Identifier: Apache-2.0
#include "qat/data/dataset.hpp"

#include <algorithm>

#include "qat/error.hpp"

namespace qat::data {

Dataset Dataset::head(std::size_t n) const {
  if (n == 0 || n >= size()) return *this;
  Dataset d;
  d.name = name;
  d.split = split;
  d.image_shape = image_shape;
  d.classes = classes;
  d.pixels.assign(pixels.begin(), pixels.begin() + static_cast<std::ptrdiff_t>(n * image_size()));
  d.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n));
  d.mean = mean;
  return d;
}

std::vector<double> mean_image(const Dataset& train) {
  if (train.split != Split::train) throw ConfigError("mean image must come from the train split");
  if (train.size() == 0) throw ConfigError("mean image of an empty dataset");
  const std::size_t dim = train.image_size();
  std::vector<double> sum(dim, 0.0);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const std::uint8_t* p = train.pixels.data() + i * dim;
    for (std::size_t k = 0; k < dim; ++k) sum[k] += p[k];
  }
  const double scale = 1.0 / (255.0 * static_cast<double>(train.size()));
  for (auto& v : sum) v *= scale;
  return sum;
}

void attach_mean(Dataset& train, Dataset& test) {
  train.mean = mean_image(train);
  test.mean = train.mean;
}

template <class Real>
ad::Tensor<Real> raw_images(const Dataset& d) {
  ad::Shape s{d.size()};
  s.insert(s.end(), d.image_shape.begin(), d.image_shape.end());
  ad::Tensor<Real> t(s);
  auto out = t.data();
  for (std::size_t i = 0; i < d.pixels.size(); ++i) {
    out[i] = static_cast<Real>(d.pixels[i] / 255.0);
  }
  return t;
}

template ad::Tensor<float> raw_images<float>(const Dataset&);
template ad::Tensor<double> raw_images<double>(const Dataset&);

}  // namespace qat::data
