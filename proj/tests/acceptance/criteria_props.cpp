// SPDX-License-Identifier: Apache-2.0
#include <chrono>
#include <cmath>
#include <limits>
#include <set>

#include "criteria.hpp"
#include "fixtures.hpp"
#include "gen.hpp"
#include "gradcheck.hpp"
#include "gradcheck_cases.hpp"
#include "qat/autodiff/ops.hpp"
#include "qat/data/loaders.hpp"
#include "qat/error.hpp"
#include "qat/io.hpp"
#include "qat/quant/quantizer.hpp"

namespace qat::acceptance {

namespace {

using TensorD = ad::Tensor<double>;
using Clock = std::chrono::steady_clock;

constexpr int kGridPoints = 10000;
constexpr int kGridBits[] = {1, 2, 4, 8};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string tag(const std::string& what, int k) { return what + " k=" + std::to_string(k); }

Outcome quantizer_grid(const Env&) {
  const auto start = Clock::now();
  Checks c;
  std::size_t violations = 0;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) ++violations;
    c.expect(ok, what);
  };
  for (int k : kGridBits) {
    const double levels = std::ldexp(1.0, k) - 1;
    const double half_step = 0.5 / levels + 4 * std::numeric_limits<double>::epsilon();
    std::set<double> distinct;
    double prev = -1.0;
    bool idem = true, mono = true, bound = true;
    for (int i = 0; i < kGridPoints; ++i) {
      const double z = static_cast<double>(i) / (kGridPoints - 1);
      const double q = quant::quantize_unit(z, k);
      idem = idem && quant::quantize_unit(q, k) == q;
      mono = mono && q >= prev;
      bound = bound && std::abs(q - z) <= half_step;
      distinct.insert(q);
      prev = q;
    }
    check(idem, tag("idempotence", k));
    check(mono, tag("monotonicity", k));
    check(bound, tag("half-step bound", k));
    check(distinct.size() <= (std::size_t{1} << k), tag("unit level count", k));

    TensorD w({kGridPoints});
    TensorD x({kGridPoints});
    for (int i = 0; i < kGridPoints; ++i) {
      w[i] = -3.0 + 6.0 * i / (kGridPoints - 1);
      x[i] = -1.0 + 3.0 * i / (kGridPoints - 1);
    }
    for (bool affine : {true, false}) {
      const TensorD qw = quant::quantize_weights(w, k, affine);
      const double lo = affine ? -1.0 : 0.0;
      std::set<double> wl(qw.data().begin(), qw.data().end());
      check(*wl.begin() >= lo && *wl.rbegin() <= 1.0, tag(affine ? "weight range [-1,1]" : "weight range [0,1]", k));
      check(wl.size() <= (std::size_t{1} << k), tag("weight level count", k));
    }
    const TensorD qa = quant::quantize_activations(x, k);
    std::set<double> al(qa.data().begin(), qa.data().end());
    check(*al.begin() >= 0.0 && *al.rbegin() <= 1.0, tag("activation range", k));
    check(al.size() <= (std::size_t{1} << k), tag("activation level count", k));
    check(quant::quantize_activations(qa, k) == qa, tag("activation idempotence", k));
  }
  const double secs = seconds_since(start);
  c.expect(secs < 5.0, "runtime " + fixed(secs, 2) + " s >= 5 s");
  return c.outcome(std::to_string(kGridPoints) + "-point grids for k in {1,2,4,8}, " + std::to_string(violations) +
                   " violations, " + fixed(secs, 2) + " s");
}

// Weight quantizer with rounding replaced by identity, in extended precision.
long double surrogate(const std::vector<long double>& w, const std::vector<long double>& up, bool affine) {
  long double m = 0;
  for (auto v : w) m = std::max(m, std::fabs(std::tanh(v)));
  long double s = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const long double n = std::tanh(w[i]) / (2 * m) + 0.5L;
    s += up[i] * (affine ? 2 * n - 1 : n);
  }
  return s;
}

Outcome ste_contract(const Env&) {
  Checks c;
  std::size_t ste = 0, mask = 0, surrogate_checks = 0;
  double worst = 0;
  for (int inst = 0; inst < 50; ++inst) {
    testing::Gen gen(9000 + inst);
    const int k = kGridBits[inst % 4];
    const std::size_t n = gen.index(1, 40);

    ad::Graph<double> g;
    auto z = g.input(gen.tensor({n}, 0.0, 1.0));
    const TensorD up = gen.normal_tensor({n});
    g.backward(testing::weighted_sum(quant::quantize_unit(z, k), up));
    c.expect(g.grad(z) == up, "quantize_unit upstream pass-through, instance " + std::to_string(inst));
    ste += n;

    ad::Graph<double> ga;
    TensorD xv = gen.tensor({n + 2}, -1.0, 2.0);
    xv[0] = 0.0;
    xv[1] = 1.0;
    auto x = ga.input(xv);
    const TensorD upa = gen.normal_tensor({n + 2});
    ga.backward(testing::weighted_sum(quant::quantize_activations(x, k), upa));
    TensorD expect(upa.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) expect[i] = xv[i] >= 0.0 && xv[i] <= 1.0 ? upa[i] : 0.0;
    c.expect(ga.grad(x) == expect, "clip mask, instance " + std::to_string(inst));
    mask += n + 2;

    const bool affine = gen.coin();
    std::vector<long double> w(n + 1), wu(n + 1);
    for (auto& v : w) v = gen.uniform(-2, 2);
    for (auto& v : wu) v = gen.normal();
    ad::Graph<double> gw;
    TensorD wt({w.size()}), ut({w.size()});
    for (std::size_t i = 0; i < w.size(); ++i) {
      wt[i] = static_cast<double>(w[i]);
      ut[i] = static_cast<double>(wu[i]);
      w[i] = wt[i];
      wu[i] = ut[i];
    }
    auto wv = gw.input(wt);
    gw.backward(testing::weighted_sum(quant::quantize_weights(wv, k, affine), ut));
    for (std::size_t i = 0; i < w.size(); ++i) {
      auto wp = w, wm = w;
      const long double h = testing::kFdStep;
      wp[i] += h;
      wm[i] -= h;
      const double numeric = static_cast<double>((surrogate(wp, wu, affine) - surrogate(wm, wu, affine)) / (2 * h));
      const double analytic = gw.grad(wv)[i];
      const double err = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-3});
      worst = std::max(worst, err);
      c.expect(err <= testing::kGradTolerance, "weight quantizer surrogate, instance " + std::to_string(inst) +
                                                   " element " + std::to_string(i) + " error " + std::to_string(err));
      ++surrogate_checks;
    }
  }
  return c.outcome(std::to_string(ste) + " STE elements exact, " + std::to_string(mask) + " clip-mask elements exact, " +
                   std::to_string(surrogate_checks) + " surrogate derivatives, worst relative error " +
                   scientific(worst));
}

Outcome gradient_checks(const Env&) {
  const auto start = Clock::now();
  Checks c;
  double worst = 0;
  std::size_t checked = 0, skipped = 0;
  for (const auto& gc : testing::gradcheck_cases()) {
    for (int i = 0; i < testing::kGradInstances; ++i) {
      const testing::GradCheck r = gc.run(i);
      worst = std::max(worst, r.max_error);
      checked += r.checked;
      skipped += r.skipped;
      c.expect(r.checked > 0 && r.max_error <= testing::kGradTolerance,
               gc.name + " instance " + std::to_string(i) + ": " + r.worst);
      c.expect(r.checked >= 4 * r.skipped, gc.name + " instance " + std::to_string(i) + " mostly straddles kinks");
    }
  }
  const double secs = seconds_since(start);
  c.expect(secs < 120.0, "runtime " + fixed(secs, 1) + " s >= 120 s");
  return c.outcome(std::to_string(testing::gradcheck_cases().size()) + " ops/models x " +
                   std::to_string(testing::kGradInstances) + " instances, " + std::to_string(checked) +
                   " derivatives, worst relative error " + scientific(worst) + ", " + std::to_string(skipped) +
                   " kink-straddling perturbations excluded, " + fixed(secs, 1) + " s");
}

std::string be32(std::uint32_t v) {
  return {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8), static_cast<char>(v)};
}

template <class Err, class F>
bool raises(F&& f, const std::string& needle = "") {
  try {
    f();
  } catch (const Err& e) {
    return needle.empty() || std::string(e.what()).find(needle) != std::string::npos;
  } catch (...) {
    return false;
  }
  return false;
}

Outcome data_loaders(const Env&) {
  testing::TempDir dir("loaders");
  Checks c;
  const auto images = [](std::uint32_t magic, std::uint32_t n, std::uint32_t r, std::uint32_t w,
                         const std::string& body) { return be32(magic) + be32(n) + be32(r) + be32(w) + body; };
  const auto labels = [](std::uint32_t n, const std::string& body) {
    return be32(data::kIdxLabelsMagic) + be32(n) + body;
  };

  // Two 2x3 images, labels 4 and 9.
  const std::string px("\x00\x10\x80\xff\x01\x02" "\x03\x04\x05\x06\x07\x08", 12);
  for (const std::string p : {"train", "t10k"}) {
    write_file_atomic(dir / (p + "-images-idx3-ubyte"), images(data::kIdxImagesMagic, 2, 2, 3, px));
    write_file_atomic(dir / (p + "-labels-idx1-ubyte"), labels(2, std::string("\x04\x09", 2)));
  }
  auto [train, test] = data::load_mnist(dir.path());
  const auto raw = data::raw_images<double>(train);
  c.expect(raw.shape() == ad::Shape{2, 1, 2, 3}, "IDX tensor shape");
  c.expect(raw[0] == 0.0 && raw[1] == 16 / 255.0 && raw[3] == 1.0 && raw[11] == 8 / 255.0, "IDX pixel values");
  c.expect(train.labels == std::vector<int>{4, 9} && test.labels == train.labels, "IDX labels");
  c.expect(train.mean.size() == 6 && train.mean[0] == 1.5 / 255.0, "IDX mean image");

  std::string rec = std::string(1, '\x07');
  for (int p = 0; p < 3072; ++p) rec.push_back(static_cast<char>(p / 1024 * 100 + p % 1024 % 50));
  write_file_atomic(dir / "one.bin", rec);
  const auto batch = data::read_cifar10_batch(dir / "one.bin");
  c.expect(batch.labels == std::vector<int>{7}, "CIFAR label");
  c.expect(batch.pixels.size() == 3072 && batch.pixels[0] == 0 && batch.pixels[1024] == 100 &&
               batch.pixels[2048 + 6] == 206,
           "CIFAR planar pixels");

  const auto bad = [&](const std::string& name, const std::string& bytes) {
    write_file_atomic(dir / name, bytes);
    return dir / name;
  };
  const auto magic = bad("magic", images(0x0801, 1, 1, 1, "a"));
  c.expect(raises<DataFormatError>([&] { data::read_idx_images(magic); }, "0x00000803"), "IDX wrong magic");
  c.expect(raises<DataFormatError>([&] { data::read_idx_images(magic); }, magic.string()), "IDX error names the file");
  c.expect(raises<DataFormatError>([&] { data::read_idx_images(bad("hdr", be32(data::kIdxImagesMagic))); }),
           "IDX truncated header");
  c.expect(raises<DataFormatError>([&] { data::read_idx_images(bad("body", images(data::kIdxImagesMagic, 2, 2, 2, "abc"))); }),
           "IDX truncated body");
  c.expect(raises<DataFormatError>([&] { data::read_idx_images(bad("tail", images(data::kIdxImagesMagic, 1, 1, 1, "ab"))); }),
           "IDX trailing bytes");
  c.expect(raises<DataFormatError>([&] { data::read_idx_labels(bad("lbl", labels(3, "ab"))); }), "IDX truncated labels");
  c.expect(raises<DataFormatError>([&] { data::read_idx_labels(bad("lmagic", images(data::kIdxImagesMagic, 1, 1, 1, ""))); }),
           "IDX labels with image magic");

  testing::TempDir mismatch("loaders");
  for (const std::string p : {"train", "t10k"}) {
    write_file_atomic(mismatch / (p + "-images-idx3-ubyte"), images(data::kIdxImagesMagic, 2, 1, 1, "ab"));
    write_file_atomic(mismatch / (p + "-labels-idx1-ubyte"), labels(3, std::string("\1\2\3", 3)));
  }
  c.expect(raises<DataFormatError>([&] { data::load_mnist(mismatch.path()); }, "count mismatch"), "IDX count mismatch");
  testing::TempDir big("loaders");
  for (const std::string p : {"train", "t10k"}) {
    write_file_atomic(big / (p + "-images-idx3-ubyte"), images(data::kIdxImagesMagic, 1, 1, 1, "a"));
    write_file_atomic(big / (p + "-labels-idx1-ubyte"), labels(1, std::string("\x0a", 1)));
  }
  c.expect(raises<DataFormatError>([&] { data::load_mnist(big.path()); }), "MNIST label >= 10");

  c.expect(raises<DataFormatError>([&] { data::read_cifar10_batch(bad("short.bin", rec.substr(0, 3072))); }, "3073"),
           "CIFAR partial record");
  c.expect(raises<DataFormatError>([&] { data::read_cifar10_batch(bad("long.bin", rec + "x")); }), "CIFAR trailing bytes");
  c.expect(raises<DataFormatError>([&] { data::read_cifar10_batch(bad("empty.bin", "")); }), "CIFAR empty file");
  c.expect(raises<DataFormatError>([&] { data::read_cifar10_batch(bad("label.bin", "\x0a" + rec.substr(1))); }),
           "CIFAR label >= 10");
  c.expect(raises<DatasetMissingError>([&] { data::load_mnist(dir / "absent"); }), "missing MNIST directory");
  c.expect(raises<DatasetMissingError>([&] { data::load_cifar10(dir.path()); }), "missing CIFAR batch");
  c.expect(raises<DatasetMissingError>([&] { data::read_idx_labels(dir / "nope"); }), "missing IDX file");
  return c.outcome(std::to_string(c.count()) + " fixture and malformed-file checks");
}

}  // namespace

std::vector<Criterion> property_criteria() {
  return {
      {1, "quantizer correctness grid", quantizer_grid},
      {2, "straight-through estimator contract", ste_contract},
      {3, "autodiff gradient checks", gradient_checks},
      {10, "data loaders", data_loaders},
  };
}

}  // namespace qat::acceptance
