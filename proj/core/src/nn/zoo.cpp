// SPDX-License-Identifier: Apache-2.0
#include "qat/nn/zoo.hpp"

#include "qat/error.hpp"

namespace qat::nn {

namespace {

LayerSpec conv(std::string name, std::size_t out, std::size_t kernel = 3, std::size_t stride = 1,
               std::size_t pad = 1) {
  LayerSpec l;
  l.kind = LayerKind::conv;
  l.name = std::move(name);
  l.out = out;
  l.kernel = kernel;
  l.stride = stride;
  l.pad = pad;
  return l;
}

LayerSpec simple(LayerKind kind, std::string name) {
  LayerSpec l;
  l.kind = kind;
  l.name = std::move(name);
  return l;
}

LayerSpec act(std::string name, std::optional<std::string> tap = std::nullopt) {
  LayerSpec l = simple(LayerKind::act, std::move(name));
  l.tap_id = std::move(tap);
  return l;
}

LayerSpec pool(LayerKind kind, std::string name, std::size_t kernel, std::size_t stride) {
  LayerSpec l = simple(kind, std::move(name));
  l.kernel = kernel;
  l.stride = stride;
  return l;
}

LayerSpec fc(std::string name, std::size_t out, bool bias) {
  LayerSpec l = simple(LayerKind::fc, std::move(name));
  l.out = out;
  l.bias = bias;
  return l;
}

LayerSpec block(std::string name, std::size_t out, std::size_t stride,
                std::optional<std::string> tap = std::nullopt) {
  LayerSpec l = simple(LayerKind::residual_block, std::move(name));
  l.out = out;
  l.stride = stride;
  l.tap_id = std::move(tap);
  return l;
}

}  // namespace

ModelSpec mini_alexnet(const ad::Shape& input, std::size_t classes, std::size_t width) {
  ModelSpec s;
  s.name = "mini-alexnet";
  s.input = input;
  s.classes = classes;
  auto& L = s.layers;
  for (std::size_t stage = 0; stage < 3; ++stage) {
    const std::string id = std::to_string(stage + 1);
    L.push_back(conv("conv" + id, width << stage));
    L.push_back(simple(LayerKind::batchnorm, "bn" + id));
    L.push_back(act("act" + id));
    L.push_back(pool(LayerKind::maxpool, "pool" + id, 2, 2));
  }
  L.push_back(simple(LayerKind::flatten, "flatten"));
  L.push_back(fc("fc1", width * 8, false));
  L.push_back(simple(LayerKind::batchnorm, "fc1_bn"));
  L.push_back(act("fc1_act", "fc1"));
  L.push_back(fc("fc2", width * 8, false));
  L.push_back(simple(LayerKind::batchnorm, "fc2_bn"));
  L.push_back(act("fc2_act", "fc2"));
  L.push_back(fc("classifier", classes, true));
  L.push_back(simple(LayerKind::scalar, "scalar"));
  validate(s);
  return s;
}

ModelSpec mini_resnet(const ad::Shape& input, std::size_t classes, std::size_t width) {
  ModelSpec s;
  s.name = "mini-resnet";
  s.input = input;
  s.classes = classes;
  auto& L = s.layers;
  L.push_back(conv("stem", width));
  L.push_back(simple(LayerKind::batchnorm, "stem_bn"));
  L.push_back(act("stem_act"));
  for (std::size_t group = 0; group < 3; ++group) {
    const std::size_t channels = width << group;
    const std::size_t stride = group == 0 ? 1 : 2;
    const std::string g = "group" + std::to_string(group + 1);
    L.push_back(block(g + ".block1", channels, stride));
    std::optional<std::string> tap;
    if (group > 0) tap = g;
    L.push_back(block(g + ".block2", channels, 1, tap));
  }
  L.push_back(pool(LayerKind::avgpool, "gap", 0, 1));
  L.push_back(simple(LayerKind::flatten, "flatten"));
  L.push_back(fc("classifier", classes, true));
  L.push_back(simple(LayerKind::scalar, "scalar"));
  validate(s);
  return s;
}

ModelSpec model_by_name(const std::string& name, const ad::Shape& input, std::size_t classes,
                        std::size_t width) {
  if (name == "mini-alexnet") return mini_alexnet(input, classes, width);
  if (name == "mini-resnet") return mini_resnet(input, classes, width);
  throw ConfigError("unknown model '" + name + "' (expected mini-alexnet or mini-resnet)");
}

}  // namespace qat::nn
