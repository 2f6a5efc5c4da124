// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace qat::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Dense row-major CPU array. Value semantics; copying copies the data.
///
/// `Real` is `float` for training and `double` for gradient-check runs.
template <class Real>
class Tensor {
 public:
  using value_type = Real;

  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = Real(0));
  Tensor(Shape shape, std::vector<Real> data);

  static Tensor scalar(Real v) { return Tensor(Shape{1}, std::vector<Real>{v}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<Real> data() { return data_; }
  std::span<const Real> data() const { return data_; }
  const std::vector<Real>& storage() const { return data_; }

  Real& operator[](std::size_t i) { return data_[i]; }
  const Real& operator[](std::size_t i) const { return data_[i]; }

  /// Single element of a one-element tensor.
  Real item() const;

  bool all_finite() const;
  void fill(Real v);

  /// Same data, new shape with equal element count.
  Tensor reshaped(Shape shape) const;

  template <class Other>
  Tensor<Other> cast() const {
    std::vector<Other> out(data_.begin(), data_.end());
    return Tensor<Other>(shape_, std::move(out));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<Real> data_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

/// Trainable tensor owned by a model. Gradients accumulate into `grad`
/// during backward and are consumed by the optimizer step.
template <class Real>
struct Parameter {
  std::string name;
  Tensor<Real> value;
  Tensor<Real> grad;
  bool decay = true;
  bool grad_ready = false;

  Parameter() = default;
  Parameter(std::string n, Tensor<Real> v, bool apply_decay = true)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()), decay(apply_decay) {}

  void zero_grad() {
    grad.fill(Real(0));
    grad_ready = false;
  }
};

}  // namespace qat::ad
