// SPDX-License-Identifier: Apache-2.0
#include "qat/nn/model.hpp"

#include <cmath>
#include <random>

#include "qat/error.hpp"

namespace qat::nn {

template <class Real>
Model<Real>::Model(ModelSpec spec, quant::QuantConfig qc, std::uint64_t seed)
    : spec_(std::move(spec)), qc_(qc) {
  qc_.validate();
  const auto shapes = validate(spec_);
  std::mt19937_64 rng(seed);

  auto he = [&](const std::string& name, ad::Shape shape, std::size_t fan_in) {
    ad::Tensor<Real> w(std::move(shape));
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (auto& v : w.data()) v = static_cast<Real>(dist(rng));
    params_.emplace_back(name, std::move(w), true);
    return params_.size() - 1;
  };
  auto affine = [&](Layer& layer, const std::string& prefix, std::size_t channels) {
    params_.emplace_back(prefix + ".gamma", ad::Tensor<Real>(ad::Shape{channels}, Real(1)), false);
    layer.params.push_back(params_.size() - 1);
    params_.emplace_back(prefix + ".beta", ad::Tensor<Real>(ad::Shape{channels}, Real(0)), false);
    layer.params.push_back(params_.size() - 1);
    bns_.emplace_back(channels);
    layer.bns.push_back(bns_.size() - 1);
    layer.bn_names.push_back(prefix);
  };

  bool seen_conv = false;
  ad::Shape in = spec_.input;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const auto& l = spec_.layers[i];
    Layer layer;
    layer.quantize_weights = l.quantize_weights;
    layer.quantize_acts = l.quantize_acts;
    layer.in_channels = in[0];
    switch (l.kind) {
      case LayerKind::conv:
        if (!seen_conv) {
          first_conv_ = i;
          seen_conv = true;
        }
        layer.params.push_back(he(l.name + ".weight", {l.out, in[0], l.kernel, l.kernel},
                                  in[0] * l.kernel * l.kernel));
        break;
      case LayerKind::fc:
        last_fc_ = i;
        layer.params.push_back(he(l.name + ".weight", {l.out, in[0]}, in[0]));
        if (l.bias) {
          params_.emplace_back(l.name + ".bias", ad::Tensor<Real>(ad::Shape{l.out}), false);
          layer.params.push_back(params_.size() - 1);
        }
        break;
      case LayerKind::batchnorm:
        affine(layer, l.name, in[0]);
        break;
      case LayerKind::residual_block: {
        const std::size_t c = in[0], o = l.out;
        layer.params.push_back(he(l.name + ".conv1.weight", {o, c, 3, 3}, c * 9));
        affine(layer, l.name + ".bn1", o);
        layer.params.push_back(he(l.name + ".conv2.weight", {o, o, 3, 3}, o * 9));
        affine(layer, l.name + ".bn2", o);
        layer.projection = l.stride != 1 || c != o;
        if (layer.projection) {
          layer.params.push_back(he(l.name + ".shortcut.weight", {o, c, 1, 1}, c));
          affine(layer, l.name + ".shortcut_bn", o);
        }
        break;
      }
      case LayerKind::scalar:
        params_.emplace_back(l.name + ".alpha",
                             ad::Tensor<Real>::scalar(static_cast<Real>(quant::kScalarLayerInit)),
                             false);
        layer.params.push_back(params_.size() - 1);
        scalar_index_ = params_.size() - 1;
        has_scalar_ = true;
        break;
      default:
        break;
    }
    layers_.push_back(std::move(layer));
    in = shapes[i];
  }
}

template <class Real>
void Model<Real>::set_quant_config(const quant::QuantConfig& qc) {
  qc.validate();
  qc_ = qc;
}

template <class Real>
std::vector<ad::Parameter<Real>*> Model<Real>::parameters() {
  std::vector<ad::Parameter<Real>*> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (has_scalar_ && i == scalar_index_ && !uses_scalar_layer()) continue;
    out.push_back(&params_[i]);
  }
  return out;
}

template <class Real>
std::vector<ad::Parameter<Real>*> Model<Real>::all_parameters() {
  std::vector<ad::Parameter<Real>*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

template <class Real>
std::vector<const ad::Parameter<Real>*> Model<Real>::all_parameters() const {
  std::vector<const ad::Parameter<Real>*> out;
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

template <class Real>
std::vector<NamedBuffer<Real>> Model<Real>::buffers() {
  std::vector<NamedBuffer<Real>> out;
  for (const auto& layer : layers_) {
    for (std::size_t b = 0; b < layer.bns.size(); ++b) {
      auto& buf = bns_[layer.bns[b]];
      out.push_back({layer.bn_names[b] + ".running_mean", &buf.running_mean});
      out.push_back({layer.bn_names[b] + ".running_var", &buf.running_var});
    }
  }
  return out;
}

template <class Real>
std::size_t Model<Real>::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (has_scalar_ && i == scalar_index_ && !uses_scalar_layer()) continue;
    n += params_[i].value.size();
  }
  return n;
}

template <class Real>
ad::Var<Real> Model<Real>::bind(ad::Graph<Real>& g, std::size_t index, bool trainable) {
  return trainable ? g.parameter(params_[index]) : g.constant(params_[index].value);
}

template <class Real>
ad::Var<Real> Model<Real>::weight(ad::Graph<Real>& g, std::size_t index, bool quantize,
                                  bool trainable) {
  auto w = bind(g, index, trainable);
  return quantize ? quant::quantize_weights(w, qc_.weight_bits, qc_.weight_affine_map) : w;
}

template <class Real>
ad::Var<Real> Model<Real>::activation(ad::Var<Real> x, bool quantize) const {
  return quantize ? quant::quantize_activations(x, qc_.act_bits) : ad::clip01(x);
}

template <class Real>
ad::Var<Real> Model<Real>::batchnorm(ad::Graph<Real>& g, ad::Var<Real> x, const Layer& layer,
                                     std::size_t which, std::size_t bn_slot, Mode mode,
                                     const ForwardOptions& options) {
  auto gamma = bind(g, layer.params[which], options.trainable);
  auto beta = bind(g, layer.params[which + 1], options.trainable);
  const auto bn_mode = mode == Mode::train ? ad::BnMode::train : ad::BnMode::eval;
  return ad::batchnorm2d(x, gamma, beta, bns_[layer.bns[bn_slot]], bn_mode,
                         mode == Mode::train && options.update_bn_stats);
}

template <class Real>
ForwardResult<Real> Model<Real>::forward(ad::Graph<Real>& g, const ad::Tensor<Real>& batch,
                                         Mode mode, ForwardOptions options) {
  const auto& bs = batch.shape();
  if (bs.size() != 4 || !std::equal(spec_.input.begin(), spec_.input.end(), bs.begin() + 1)) {
    throw ShapeError("model '" + spec_.name + "': batch shape " + ad::to_string(bs) +
                     " does not match (N," + ad::to_string(spec_.input).substr(1));
  }
  const bool qw = qc_.quantizes_weights();
  const bool qa = qc_.quantizes_acts();
  ForwardResult<Real> result;
  ad::Var<Real> x = g.constant(batch);

  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const auto& l = spec_.layers[i];
    const auto& layer = layers_[i];
    const bool exempt = !qc_.quantize_first_last && (i == first_conv_ || i == last_fc_);
    const bool quant_w = qw && layer.quantize_weights && !exempt;
    switch (l.kind) {
      case LayerKind::conv:
        x = ad::conv2d(x, weight(g, layer.params[0], quant_w, options.trainable),
                       ad::Conv2dAttrs{l.stride, l.pad});
        break;
      case LayerKind::fc:
        x = ad::matmul(x, weight(g, layer.params[0], quant_w, options.trainable), true);
        if (l.bias) x = ad::add(x, bind(g, layer.params[1], options.trainable));
        break;
      case LayerKind::batchnorm:
        x = batchnorm(g, x, layer, 0, 0, mode, options);
        break;
      case LayerKind::act:
        x = activation(x, qa && layer.quantize_acts);
        break;
      case LayerKind::relu:
        x = ad::relu(x);
        break;
      case LayerKind::maxpool:
        x = ad::maxpool2d(x, ad::PoolAttrs{l.kernel, l.stride});
        break;
      case LayerKind::avgpool:
        x = ad::avgpool2d(x, ad::PoolAttrs{l.kernel, l.stride});
        break;
      case LayerKind::flatten:
        x = ad::flatten(x);
        break;
      case LayerKind::residual_block: {
        const bool quant_a = qa && layer.quantize_acts;
        auto h = ad::conv2d(x, weight(g, layer.params[0], quant_w, options.trainable),
                            ad::Conv2dAttrs{l.stride, 1});
        h = batchnorm(g, h, layer, 1, 0, mode, options);
        h = activation(h, quant_a);
        h = ad::conv2d(h, weight(g, layer.params[3], quant_w, options.trainable),
                       ad::Conv2dAttrs{1, 1});
        h = batchnorm(g, h, layer, 4, 1, mode, options);
        auto shortcut = x;
        if (layer.projection) {
          shortcut = ad::conv2d(x, weight(g, layer.params[6], quant_w, options.trainable),
                                ad::Conv2dAttrs{l.stride, 0});
          shortcut = batchnorm(g, shortcut, layer, 7, 2, mode, options);
        }
        x = activation(ad::add(h, shortcut), quant_a);
        break;
      }
      case LayerKind::scalar:
        if (uses_scalar_layer()) {
          x = quant::scalar_layer(x, bind(g, layer.params[0], options.trainable));
        }
        break;
    }
    if (l.tap_id) result.taps.emplace(*l.tap_id, x);
  }
  result.logits = x;
  return result;
}

template <class Real>
void Model<Real>::load_state_from(const Model& other) {
  if (other.spec_.hash() != spec_.hash()) {
    throw ConfigError("cannot load state from model '" + other.spec_.name +
                      "': architecture differs from '" + spec_.name + "'");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) params_[i].value = other.params_[i].value;
  for (std::size_t i = 0; i < bns_.size(); ++i) {
    bns_[i].running_mean = other.bns_[i].running_mean;
    bns_[i].running_var = other.bns_[i].running_var;
  }
}

template <class Real>
std::uint64_t Model<Real>::state_hash() const {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&h](const ad::Tensor<Real>& t) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(t.data().data());
    for (std::size_t i = 0; i < t.size() * sizeof(Real); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& p : params_) mix(p.value);
  for (const auto& b : bns_) {
    mix(b.running_mean);
    mix(b.running_var);
  }
  return h;
}

template class Model<float>;
template class Model<double>;

}  // namespace qat::nn
