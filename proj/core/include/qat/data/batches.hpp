// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "qat/autodiff/tensor.hpp"
#include "qat/data/dataset.hpp"

namespace qat::data {

struct AugmentConfig {
  bool enabled = false;
  std::size_t crop_padding = 0;
  double flip_prob = 0.0;

  /// Rejects flip_prob outside [0,1] and any flipping of MNIST digits.
  void validate(const std::string& dataset_name) const;
};

/// pad-4 crop + flip for cifar10, nothing for mnist.
AugmentConfig default_augment(const std::string& dataset_name);

template <class Real>
struct Batch {
  ad::Tensor<Real> images;  // (B,C,H,W), mean-subtracted
  std::vector<int> labels;
  std::vector<std::size_t> indices;
};

/// One epoch of mean-subtracted mini-batches. Sample order and every
/// augmentation draw are fixed in the constructor from `seed`, so the
/// batches are identical whether or not a prefetch thread is used. The
/// last batch may be short. Augmentation only ever applies to the train
/// split.
template <class Real>
class BatchStream {
 public:
  BatchStream(const Dataset& dataset, std::size_t batch_size, bool shuffle,
              const AugmentConfig& augment, std::uint64_t seed, std::size_t prefetch = 0);
  ~BatchStream();
  BatchStream(const BatchStream&) = delete;
  BatchStream& operator=(const BatchStream&) = delete;

  std::optional<Batch<Real>> next();
  std::size_t batch_count() const { return batch_count_; }
  const std::vector<std::size_t>& order() const { return order_; }

 private:
  struct Draw {
    int dy = 0;
    int dx = 0;
    bool flip = false;
  };

  Batch<Real> build(std::size_t b) const;
  void produce();

  const Dataset& dataset_;
  std::size_t batch_size_;
  std::size_t batch_count_;
  bool augment_ = false;
  std::size_t pad_ = 0;
  std::vector<std::size_t> order_;
  std::vector<Draw> draws_;
  std::size_t cursor_ = 0;

  std::size_t capacity_ = 0;
  std::thread worker_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Batch<Real>> queue_;
  bool stop_ = false;
  bool failed_ = false;
  std::string error_;
};

extern template class BatchStream<float>;
extern template class BatchStream<double>;

}  // namespace qat::data
