// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qat/autodiff/graph.hpp"
#include "qat/autodiff/ops.hpp"
#include "qat/nn/spec.hpp"
#include "qat/quant/quantizer.hpp"

namespace qat::nn {

enum class Mode { train, eval };

struct ForwardOptions {
  /// Bind parameters as gradient-carrying leaves.
  bool trainable = true;
  /// Fold batch statistics into the BN running buffers (train mode only).
  bool update_bn_stats = true;
};

template <class Real>
struct ForwardResult {
  ad::Var<Real> logits;
  std::map<std::string, ad::Var<Real>> taps;
};

template <class Real>
struct NamedBuffer {
  std::string name;
  ad::Tensor<Real>* tensor;
};

/// Parameters, BN buffers and quantization placement for one ModelSpec.
///
/// The scalar output layer exists in every model but is only applied
/// (and only trainable) while the quantization config is active.
template <class Real>
class Model {
 public:
  Model(ModelSpec spec, quant::QuantConfig qc, std::uint64_t seed);

  const ModelSpec& spec() const { return spec_; }
  const quant::QuantConfig& quant_config() const { return qc_; }
  void set_quant_config(const quant::QuantConfig& qc);

  /// Trainable parameters under the current quantization config.
  std::vector<ad::Parameter<Real>*> parameters();
  /// Every parameter, including an inactive scalar layer.
  std::vector<ad::Parameter<Real>*> all_parameters();
  std::vector<const ad::Parameter<Real>*> all_parameters() const;
  std::vector<NamedBuffer<Real>> buffers();

  std::size_t parameter_count() const;
  bool uses_scalar_layer() const { return qc_.any() && has_scalar_; }

  ForwardResult<Real> forward(ad::Graph<Real>& graph, const ad::Tensor<Real>& batch, Mode mode,
                              ForwardOptions options = {});

  /// Copies parameters and buffers from a model built from the same spec.
  void load_state_from(const Model& other);

  /// FNV-1a 64 over every parameter and buffer byte; equal hashes mean
  /// bit-identical state.
  std::uint64_t state_hash() const;

 private:
  struct Layer {
    std::vector<std::size_t> params;
    std::vector<std::size_t> bns;
    std::vector<std::string> bn_names;
    bool quantize_weights = false;
    bool quantize_acts = false;
    bool projection = false;
    std::size_t in_channels = 0;
  };

  ad::Var<Real> weight(ad::Graph<Real>& g, std::size_t index, bool quantize, bool trainable);
  ad::Var<Real> bind(ad::Graph<Real>& g, std::size_t index, bool trainable);
  ad::Var<Real> activation(ad::Var<Real> x, bool quantize) const;
  ad::Var<Real> batchnorm(ad::Graph<Real>& g, ad::Var<Real> x, const Layer& layer, std::size_t which,
                          std::size_t bn_slot, Mode mode, const ForwardOptions& options);

  ModelSpec spec_;
  quant::QuantConfig qc_;
  std::vector<ad::Parameter<Real>> params_;
  std::vector<ad::BatchNormBuffers<Real>> bns_;
  std::vector<Layer> layers_;
  std::size_t scalar_index_ = 0;
  bool has_scalar_ = false;
  std::size_t first_conv_ = 0;
  std::size_t last_fc_ = 0;
};

extern template class Model<float>;
extern template class Model<double>;

}  // namespace qat::nn
