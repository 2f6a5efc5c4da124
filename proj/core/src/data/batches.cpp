// SPDX-License-Identifier: Apache-2.0
#include "qat/data/batches.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "qat/error.hpp"

namespace qat::data {

void AugmentConfig::validate(const std::string& dataset_name) const {
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw ConfigError("flip_prob must lie in [0,1]");
  if (dataset_name == "mnist" && flip_prob > 0.0) {
    throw ConfigError("horizontal flips are not allowed for mnist");
  }
}

AugmentConfig default_augment(const std::string& dataset_name) {
  if (dataset_name == "cifar10") return AugmentConfig{true, 4, 0.5};
  return AugmentConfig{};
}

template <class Real>
BatchStream<Real>::BatchStream(const Dataset& dataset, std::size_t batch_size, bool shuffle,
                               const AugmentConfig& augment, std::uint64_t seed,
                               std::size_t prefetch)
    : dataset_(dataset), batch_size_(batch_size), capacity_(prefetch) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (dataset.size() == 0) throw ConfigError("empty dataset");
  if (dataset.mean.size() != dataset.image_size()) {
    throw ConfigError("dataset '" + dataset.name + "' has no mean image attached");
  }
  augment.validate(dataset.name);
  batch_count_ = (dataset.size() + batch_size - 1) / batch_size;

  std::mt19937_64 rng(seed);
  order_.resize(dataset.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (shuffle) std::shuffle(order_.begin(), order_.end(), rng);

  augment_ = augment.enabled && dataset.split == Split::train &&
             (augment.crop_padding > 0 || augment.flip_prob > 0.0);
  if (augment_) {
    pad_ = augment.crop_padding;
    std::uniform_int_distribution<int> offset(0, static_cast<int>(2 * pad_));
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    draws_.resize(order_.size());
    for (auto& d : draws_) {
      d.dy = offset(rng);
      d.dx = offset(rng);
      d.flip = coin(rng) < augment.flip_prob;
    }
  }

  if (capacity_ > 0) worker_ = std::thread([this] { produce(); });
}

template <class Real>
BatchStream<Real>::~BatchStream() {
  if (worker_.joinable()) {
    {
      std::lock_guard lock(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    worker_.join();
  }
}

template <class Real>
Batch<Real> BatchStream<Real>::build(std::size_t b) const {
  const std::size_t begin = b * batch_size_;
  const std::size_t end = std::min(begin + batch_size_, order_.size());
  const std::size_t n = end - begin;
  const std::size_t C = dataset_.image_shape[0];
  const std::size_t H = dataset_.image_shape[1];
  const std::size_t W = dataset_.image_shape[2];
  const std::size_t dim = C * H * W;

  Batch<Real> batch;
  batch.images = ad::Tensor<Real>({n, C, H, W});
  batch.labels.resize(n);
  batch.indices.resize(n);
  auto out = batch.images.data();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t idx = order_[begin + i];
    batch.indices[i] = idx;
    batch.labels[i] = dataset_.labels[idx];
    const std::uint8_t* src = dataset_.pixels.data() + idx * dim;
    Real* dst = out.data() + i * dim;
    if (!augment_) {
      for (std::size_t k = 0; k < dim; ++k) {
        dst[k] = static_cast<Real>(src[k] / 255.0 - dataset_.mean[k]);
      }
      continue;
    }
    // Crop window of the zero-padded (post-centering) image, then flip.
    const Draw& d = draws_[begin + i];
    const long pad = static_cast<long>(pad_);
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t y = 0; y < H; ++y) {
        const long sy = static_cast<long>(y) + d.dy - pad;
        for (std::size_t x = 0; x < W; ++x) {
          const std::size_t ox = d.flip ? W - 1 - x : x;
          const long sx = static_cast<long>(x) + d.dx - pad;
          Real v = Real(0);
          if (sy >= 0 && sy < static_cast<long>(H) && sx >= 0 && sx < static_cast<long>(W)) {
            const std::size_t k = (c * H + static_cast<std::size_t>(sy)) * W + static_cast<std::size_t>(sx);
            v = static_cast<Real>(src[k] / 255.0 - dataset_.mean[k]);
          }
          dst[(c * H + y) * W + ox] = v;
        }
      }
    }
  }
  return batch;
}

template <class Real>
void BatchStream<Real>::produce() {
  try {
    for (std::size_t b = 0; b < batch_count_; ++b) {
      Batch<Real> batch = build(b);
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return stop_ || queue_.size() < capacity_; });
      if (stop_) return;
      queue_.push_back(std::move(batch));
      cv_.notify_all();
    }
  } catch (const std::exception& e) {
    std::lock_guard lock(mu_);
    failed_ = true;
    error_ = e.what();
    cv_.notify_all();
  }
}

template <class Real>
std::optional<Batch<Real>> BatchStream<Real>::next() {
  if (cursor_ >= batch_count_) return std::nullopt;
  if (capacity_ == 0) return build(cursor_++);
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return !queue_.empty() || failed_; });
  if (queue_.empty()) throw Error("batch prefetch failed: " + error_);
  Batch<Real> batch = std::move(queue_.front());
  queue_.pop_front();
  ++cursor_;
  cv_.notify_all();
  return batch;
}

template class BatchStream<float>;
template class BatchStream<double>;

}  // namespace qat::data
