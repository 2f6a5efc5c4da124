// SPDX-License-Identifier: Apache-2.0
#include "qat/experiment/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

#include "qat/error.hpp"
#include "qat/io.hpp"

namespace qat::experiment {

namespace fs = std::filesystem;

namespace {

const std::vector<std::pair<std::string, std::string>>& defaults() {
  static const std::vector<std::pair<std::string, std::string>> d = {
      {"dataset", "mnist"},
      {"model", "mini-alexnet"},
      {"width", "16"},
      {"strategy", ""},
      {"bits", "auto"},
      {"bit_schedule", "auto"},
      {"quantize_first_last", "true"},
      {"weight_affine_map", "true"},
      {"stage1_act_bits", "32"},
      {"lambda", "1.0"},
      {"joint", "true"},
      {"seed", "0"},
      {"out", "runs/qat"},
      {"data_dir", "auto"},
      {"init_checkpoint", ""},
      {"resume", ""},
      {"train_subset", "0"},
      {"test_subset", "0"},
      {"batch_size", "64"},
      {"eval_batch_size", "500"},
      {"prefetch", "2"},
      {"augment", "auto"},
      {"crop_padding", "auto"},
      {"flip_prob", "auto"},
      {"pretrain_epochs", "15"},
      {"pretrain_lr", "0.01"},
      {"pretrain_lr_factor", "0.1"},
      {"pretrain_lr_period", "10"},
      {"phase_epochs", "15"},
      {"phase_lr", "0.001"},
      {"phase_lr_factor", "0.1"},
      {"phase_lr_period", "10"},
      {"momentum", "0.9"},
      {"weight_decay", "0.0001"},
      {"nesterov", "true"},
      {"deterministic", "false"},
  };
  return d;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("key '" + key + "': expected a boolean, got '" + v + "'");
}

unsigned long long to_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const auto x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a nonnegative integer, got '" + v + "'");
  }
}

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const int x = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
  }
}

double to_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
}

std::string fmt_real(double v) {
  std::ostringstream o;
  o.precision(17);
  o << v;
  return o.str();
}

const char* fmt_bool(bool b) { return b ? "true" : "false"; }

}  // namespace

ConfigMap::ConfigMap() {
  for (const auto& [k, v] : defaults()) values_[k] = v;
}

const std::vector<std::string>& ConfigMap::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [key, value] : defaults()) out.push_back(key);
    return out;
  }();
  return k;
}

void ConfigMap::set(const std::string& key, const std::string& value) {
  if (!values_.count(key)) throw ConfigError("unknown config key '" + key + "'");
  values_[key] = value;
  explicit_[key] = true;
}

const std::string& ConfigMap::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

void ConfigMap::merge_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    try {
      set(key, trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void ConfigMap::merge_file(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: '" + path.string() + "'");
  merge_text(read_file(path), path.string());
}

fs::path dataset_dir(const fs::path& root, const std::string& dataset) {
  const std::string probe = dataset == "mnist" ? "train-images-idx3-ubyte" : "data_batch_1.bin";
  if (fs::exists(root / probe)) return root;
  return root / (dataset == "mnist" ? "mnist" : "cifar-10-batches-bin");
}

ExperimentConfig resolve(const ConfigMap& raw) {
  ExperimentConfig c;
  auto g = [&](const char* k) -> const std::string& { return raw.get(k); };

  c.dataset = g("dataset");
  if (c.dataset != "mnist" && c.dataset != "cifar10") {
    throw ConfigError("key 'dataset': expected mnist or cifar10, got '" + c.dataset + "'");
  }
  c.model = g("model");
  if (c.model != "mini-alexnet" && c.model != "mini-resnet") {
    throw ConfigError("key 'model': expected mini-alexnet or mini-resnet, got '" + c.model + "'");
  }
  c.width = to_uint("width", g("width"));
  if (c.width == 0) throw ConfigError("key 'width' must be positive");

  c.strategy = g("strategy");
  const bool baseline = c.strategy == "baseline";
  c.strategies = baseline ? strategies::StrategySet{false, true, false}
                          : strategies::StrategySet::parse(c.strategy);

  const bool bits_auto = g("bits") == "auto";
  const bool sched_auto = g("bit_schedule") == "auto";
  if (!sched_auto) c.bit_schedule = strategies::BitSchedule::parse(g("bit_schedule"));
  if (!bits_auto) {
    c.bits = to_int("bits", g("bits"));
  } else if (!sched_auto && !c.bit_schedule.bits.empty()) {
    c.bits = c.bit_schedule.target();
  } else {
    c.bits = 2;
  }
  if (c.bits < 1 || c.bits >= quant::kFullPrecision) {
    throw ConfigError("key 'bits': target precision must lie in [1, 31]");
  }
  if (sched_auto) {
    c.bit_schedule.bits = {quant::kFullPrecision};
    if (!baseline) {
      for (int b : {8, 4, 2}) {
        if (b > c.bits) c.bit_schedule.bits.push_back(b);
      }
    }
    c.bit_schedule.bits.push_back(c.bits);
  }
  c.bit_schedule.validate();
  if (c.bit_schedule.target() != c.bits) {
    throw ConfigError("key 'bit_schedule': " + c.bit_schedule.to_string() + " does not end at bits=" +
                      std::to_string(c.bits));
  }
  if (baseline && c.bit_schedule.bits.size() != 2) {
    throw ConfigError("strategy 'baseline' quantizes directly: bit_schedule must be 32," +
                      std::to_string(c.bits));
  }

  c.quantize_first_last = to_bool("quantize_first_last", g("quantize_first_last"));
  c.weight_affine_map = to_bool("weight_affine_map", g("weight_affine_map"));
  c.stage1_act_bits = g("stage1_act_bits");
  if (c.stage1_act_bits != "prev") {
    const int a = to_int("stage1_act_bits", c.stage1_act_bits);
    if (a < 1 || a > quant::kFullPrecision) {
      throw ConfigError("key 'stage1_act_bits': expected 1..32 or 'prev'");
    }
  }
  c.guided.lambda = to_real("lambda", g("lambda"));
  c.guided.joint = to_bool("joint", g("joint"));
  c.guided.validate();

  c.seed = to_uint("seed", g("seed"));
  c.out = g("out");
  if (c.out.empty()) throw ConfigError("key 'out' must not be empty");

  std::string dir = g("data_dir");
  if (dir == "auto") {
    const char* env = std::getenv("QAT_DATA_DIR");
    dir = env ? env : "";
  }
  if (!dir.empty()) c.data_dir = dataset_dir(dir, c.dataset);

  c.init_checkpoint = g("init_checkpoint");
  c.resume = g("resume");
  c.train_subset = to_uint("train_subset", g("train_subset"));
  c.test_subset = to_uint("test_subset", g("test_subset"));
  c.eval_batch_size = to_uint("eval_batch_size", g("eval_batch_size"));
  if (c.eval_batch_size == 0) throw ConfigError("key 'eval_batch_size' must be positive");
  c.prefetch = to_uint("prefetch", g("prefetch"));

  c.augment = data::default_augment(c.dataset);
  if (g("augment") != "auto") c.augment.enabled = to_bool("augment", g("augment"));
  if (g("crop_padding") != "auto") c.augment.crop_padding = to_uint("crop_padding", g("crop_padding"));
  if (g("flip_prob") != "auto") c.augment.flip_prob = to_real("flip_prob", g("flip_prob"));
  c.augment.validate(c.dataset);

  const std::size_t batch = to_uint("batch_size", g("batch_size"));
  ad::SgdConfig sgd;
  sgd.momentum = to_real("momentum", g("momentum"));
  sgd.weight_decay = to_real("weight_decay", g("weight_decay"));
  sgd.nesterov = to_bool("nesterov", g("nesterov"));
  auto schedule = [&](const std::string& prefix) {
    strategies::TrainSchedule s;
    s.epochs = to_int(prefix + "_epochs", g((prefix + "_epochs").c_str()));
    s.batch_size = batch;
    s.lr.initial = to_real(prefix + "_lr", g((prefix + "_lr").c_str()));
    s.lr.factor = to_real(prefix + "_lr_factor", g((prefix + "_lr_factor").c_str()));
    s.lr.period = to_int(prefix + "_lr_period", g((prefix + "_lr_period").c_str()));
    s.sgd = sgd;
    s.sgd.lr = s.lr.initial;
    s.validate();
    return s;
  };
  c.pretrain = schedule("pretrain");
  c.phase = schedule("phase");
  c.deterministic = to_bool("deterministic", g("deterministic"));
  return c;
}

strategies::PlanOptions ExperimentConfig::plan_options() const {
  strategies::PlanOptions o;
  o.schedule = bit_schedule;
  o.stage1_prev = stage1_act_bits == "prev";
  o.stage1_act_bits = o.stage1_prev ? quant::kFullPrecision : std::stoi(stage1_act_bits);
  o.quantize_first_last = quantize_first_last;
  o.weight_affine_map = weight_affine_map;
  return o;
}

std::string ExperimentConfig::to_text() const {
  std::map<std::string, std::string> v;
  v["dataset"] = dataset;
  v["model"] = model;
  v["width"] = std::to_string(width);
  v["strategy"] = strategy;
  v["bits"] = std::to_string(bits);
  v["bit_schedule"] = bit_schedule.to_string();
  v["quantize_first_last"] = fmt_bool(quantize_first_last);
  v["weight_affine_map"] = fmt_bool(weight_affine_map);
  v["stage1_act_bits"] = stage1_act_bits;
  v["lambda"] = fmt_real(guided.lambda);
  v["joint"] = fmt_bool(guided.joint);
  v["seed"] = std::to_string(seed);
  v["out"] = out.string();
  v["data_dir"] = data_dir.string();
  v["init_checkpoint"] = init_checkpoint.string();
  v["resume"] = resume.string();
  v["train_subset"] = std::to_string(train_subset);
  v["test_subset"] = std::to_string(test_subset);
  v["batch_size"] = std::to_string(phase.batch_size);
  v["eval_batch_size"] = std::to_string(eval_batch_size);
  v["prefetch"] = std::to_string(prefetch);
  v["augment"] = fmt_bool(augment.enabled);
  v["crop_padding"] = std::to_string(augment.crop_padding);
  v["flip_prob"] = fmt_real(augment.flip_prob);
  for (const auto& [prefix, s] : {std::pair<std::string, const strategies::TrainSchedule*>{"pretrain", &pretrain},
                                  {"phase", &phase}}) {
    v[prefix + "_epochs"] = std::to_string(s->epochs);
    v[prefix + "_lr"] = fmt_real(s->lr.initial);
    v[prefix + "_lr_factor"] = fmt_real(s->lr.factor);
    v[prefix + "_lr_period"] = std::to_string(s->lr.period);
  }
  v["momentum"] = fmt_real(phase.sgd.momentum);
  v["weight_decay"] = fmt_real(phase.sgd.weight_decay);
  v["nesterov"] = fmt_bool(phase.sgd.nesterov);
  v["deterministic"] = fmt_bool(deterministic);

  std::string text;
  for (const auto& key : ConfigMap::keys()) text += key + " = " + v.at(key) + "\n";
  return text;
}

}  // namespace qat::experiment
