// SPDX-License-Identifier: Apache-2.0
#include "qat/nn/spec.hpp"

#include <set>
#include <sstream>

#include "qat/error.hpp"

namespace qat::nn {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::fc: return "fc";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::act: return "act";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::avgpool: return "avgpool";
    case LayerKind::flatten: return "flatten";
    case LayerKind::residual_block: return "residual_block";
    case LayerKind::scalar: return "scalar";
  }
  return "?";
}

std::vector<std::string> ModelSpec::tap_ids() const {
  std::vector<std::string> ids;
  for (const auto& l : layers) {
    if (l.tap_id) ids.push_back(*l.tap_id);
  }
  return ids;
}

std::string ModelSpec::canonical() const {
  std::ostringstream os;
  os << "model " << name << " input " << ad::to_string(input) << " classes " << classes << "\n";
  for (const auto& l : layers) {
    os << to_string(l.kind) << " " << l.name << " out=" << l.out << " k=" << l.kernel
       << " s=" << l.stride << " p=" << l.pad << " bias=" << l.bias << " qw=" << l.quantize_weights
       << " qa=" << l.quantize_acts << " tap=" << l.tap_id.value_or("-") << "\n";
  }
  return os.str();
}

std::uint64_t ModelSpec::hash() const {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

[[noreturn]] void fail(const LayerSpec& l, std::size_t index, const std::string& what) {
  throw ConfigError("layer " + std::to_string(index) + " (" + to_string(l.kind) + " '" + l.name +
                    "'): " + what);
}

std::size_t conv_out(std::size_t in, std::size_t k, std::size_t s, std::size_t p) {
  return (in + 2 * p - k) / s + 1;
}

}  // namespace

std::vector<ad::Shape> validate(const ModelSpec& spec) {
  if (spec.input.size() != 3 || ad::numel(spec.input) == 0) {
    throw ConfigError("model input must be (C,H,W) with positive extents, got " +
                      ad::to_string(spec.input));
  }
  if (spec.classes < 2) throw ConfigError("model needs at least two classes");
  if (spec.layers.empty()) throw ConfigError("model has no layers");

  std::vector<ad::Shape> shapes;
  ad::Shape cur = spec.input;
  std::set<std::string> taps;
  std::set<std::string> names;
  std::size_t last_fc = spec.layers.size();
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].kind == LayerKind::fc) last_fc = i;
  }
  if (last_fc == spec.layers.size()) throw ConfigError("model has no fully-connected classifier");

  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    if (l.name.empty()) fail(l, i, "layer needs a name");
    if (!names.insert(l.name).second) fail(l, i, "duplicate layer name");
    const bool spatial = cur.size() == 3;
    switch (l.kind) {
      case LayerKind::conv:
      case LayerKind::residual_block: {
        if (!spatial) fail(l, i, "needs a (C,H,W) input, got " + ad::to_string(cur));
        if (l.out == 0 || l.stride == 0) fail(l, i, "channels and stride must be positive");
        const std::size_t k = l.kind == LayerKind::conv ? l.kernel : 3;
        const std::size_t p = l.kind == LayerKind::conv ? l.pad : 1;
        if (k == 0 || cur[1] + 2 * p < k || cur[2] + 2 * p < k) {
          fail(l, i, "kernel does not fit input " + ad::to_string(cur));
        }
        if (l.kind == LayerKind::conv &&
            (i + 1 >= spec.layers.size() || spec.layers[i + 1].kind != LayerKind::batchnorm)) {
          fail(l, i, "convolution must be followed by batchnorm");
        }
        cur = {l.out, conv_out(cur[1], k, l.stride, p), conv_out(cur[2], k, l.stride, p)};
        break;
      }
      case LayerKind::fc:
        if (cur.size() != 1) fail(l, i, "needs a flattened input, got " + ad::to_string(cur));
        if (l.out == 0) fail(l, i, "features must be positive");
        if (i == last_fc && l.out != spec.classes) {
          fail(l, i, "classifier produces " + std::to_string(l.out) + " outputs for " +
                         std::to_string(spec.classes) + " classes");
        }
        cur = {l.out};
        break;
      case LayerKind::batchnorm:
        if (i == 0 || (spec.layers[i - 1].kind != LayerKind::conv &&
                       spec.layers[i - 1].kind != LayerKind::fc)) {
          fail(l, i, "batchnorm must follow a conv or fc layer");
        }
        if (i - 1 == last_fc) fail(l, i, "the classifier output is not normalised");
        break;
      case LayerKind::act:
      case LayerKind::relu:
        break;
      case LayerKind::maxpool:
      case LayerKind::avgpool: {
        if (!spatial) fail(l, i, "needs a (C,H,W) input");
        const std::size_t kh = l.kernel == 0 ? cur[1] : l.kernel;
        const std::size_t kw = l.kernel == 0 ? cur[2] : l.kernel;
        const std::size_t s = l.kernel == 0 ? 1 : l.stride;
        if (s == 0 || kh > cur[1] || kw > cur[2]) fail(l, i, "pool window does not fit input");
        cur = {cur[0], (cur[1] - kh) / s + 1, (cur[2] - kw) / s + 1};
        break;
      }
      case LayerKind::flatten:
        cur = {ad::numel(cur)};
        break;
      case LayerKind::scalar:
        if (i < last_fc || i + 1 != spec.layers.size()) {
          fail(l, i, "scalar layer must be the last layer, after the classifier");
        }
        break;
    }
    if (l.tap_id) {
      if (l.kind != LayerKind::act && l.kind != LayerKind::residual_block) {
        fail(l, i, "taps are only allowed on activation outputs");
      }
      if (!taps.insert(*l.tap_id).second) fail(l, i, "duplicate tap '" + *l.tap_id + "'");
    }
    shapes.push_back(cur);
  }
  if (taps.size() != 2) {
    throw ConfigError("model must declare exactly two guidance taps, found " +
                      std::to_string(taps.size()));
  }
  return shapes;
}

std::size_t parameter_count(const ModelSpec& spec, bool with_scalar) {
  const auto shapes = validate(spec);
  std::size_t total = 0;
  ad::Shape in = spec.input;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    switch (l.kind) {
      case LayerKind::conv:
        total += l.out * in[0] * l.kernel * l.kernel;
        break;
      case LayerKind::fc:
        total += l.out * in[0] + (l.bias ? l.out : 0);
        break;
      case LayerKind::batchnorm:
        total += 2 * in[0];
        break;
      case LayerKind::residual_block: {
        const std::size_t c = in[0], o = l.out;
        total += o * c * 9 + 2 * o + o * o * 9 + 2 * o;
        if (l.stride != 1 || c != o) total += o * c + 2 * o;
        break;
      }
      case LayerKind::scalar:
        total += with_scalar ? 1 : 0;
        break;
      default:
        break;
    }
    in = shapes[i];
  }
  return total;
}

}  // namespace qat::nn
