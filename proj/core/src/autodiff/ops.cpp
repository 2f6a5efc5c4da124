// SPDX-License-Identifier: Apache-2.0
#include "qat/autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "qat/error.hpp"

namespace qat::ad {

namespace {

template <class Real>
using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Real>
using MapMat = Eigen::Map<RowMat<Real>>;
template <class Real>
using CMapMat = Eigen::Map<const RowMat<Real>>;

[[noreturn]] void shape_fail(const std::string& op, const std::string& what) {
  throw ShapeError(op + ": " + what);
}

void require_rank(const std::string& op, const char* operand, const Shape& s, std::size_t rank) {
  if (s.size() != rank) {
    shape_fail(op, std::string(operand) + " must have rank " + std::to_string(rank) + ", got " +
                       to_string(s));
  }
}

struct ConvGeometry {
  std::size_t n, c, h, w, o, kh, kw, stride, pad, oh, ow;
  std::size_t patch() const { return c * kh * kw; }
  std::size_t pixels() const { return oh * ow; }
};

template <class Real>
void im2col(const Real* x, const ConvGeometry& g, Real* cols) {
  const std::size_t cols_w = g.n * g.pixels();
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        Real* row = cols + ((c * g.kh + ki) * g.kw + kj) * cols_w;
        for (std::size_t n = 0; n < g.n; ++n) {
          const Real* plane = x + (n * g.c + c) * g.h * g.w;
          Real* dst = row + n * g.pixels();
          for (std::size_t oy = 0; oy < g.oh; ++oy) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) -
                            static_cast<std::ptrdiff_t>(g.pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
              std::fill(dst + oy * g.ow, dst + (oy + 1) * g.ow, Real(0));
              continue;
            }
            for (std::size_t ox = 0; ox < g.ow; ++ox) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kj) -
                              static_cast<std::ptrdiff_t>(g.pad);
              dst[oy * g.ow + ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w))
                                        ? Real(0)
                                        : plane[iy * static_cast<std::ptrdiff_t>(g.w) + ix];
            }
          }
        }
      }
    }
  }
}

template <class Real>
void col2im_add(const Real* cols, const ConvGeometry& g, Real* dx) {
  const std::size_t cols_w = g.n * g.pixels();
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const Real* row = cols + ((c * g.kh + ki) * g.kw + kj) * cols_w;
        for (std::size_t n = 0; n < g.n; ++n) {
          Real* plane = dx + (n * g.c + c) * g.h * g.w;
          const Real* src = row + n * g.pixels();
          for (std::size_t oy = 0; oy < g.oh; ++oy) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) -
                            static_cast<std::ptrdiff_t>(g.pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
            for (std::size_t ox = 0; ox < g.ow; ++ox) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kj) -
                              static_cast<std::ptrdiff_t>(g.pad);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
              plane[iy * static_cast<std::ptrdiff_t>(g.w) + ix] += src[oy * g.ow + ox];
            }
          }
        }
      }
    }
  }
}

struct PoolGeometry {
  std::size_t n, c, h, w, kh, kw, stride, oh, ow;
};

PoolGeometry pool_geometry(const std::string& op, const Shape& s, PoolAttrs a) {
  require_rank(op, "input", s, 4);
  PoolGeometry g{s[0], s[1], s[2], s[3], a.kernel, a.kernel, a.stride, 0, 0};
  if (a.kernel == 0) {
    g.kh = s[2];
    g.kw = s[3];
    g.stride = 1;
  }
  if (g.stride == 0) shape_fail(op, "stride must be positive");
  if (g.kh > g.h || g.kw > g.w) {
    shape_fail(op, "kernel " + std::to_string(g.kh) + "x" + std::to_string(g.kw) +
                       " exceeds input " + to_string(s));
  }
  g.oh = (g.h - g.kh) / g.stride + 1;
  g.ow = (g.w - g.kw) / g.stride + 1;
  return g;
}

// Channel view of an (N,C,...) tensor: index = (n * C + c) * inner + i.
struct ChannelView {
  std::size_t n, c, inner;
};

ChannelView channel_view(const std::string& op, const Shape& s) {
  if (s.size() != 2 && s.size() != 4) {
    shape_fail(op, "input must be (N,C) or (N,C,H,W), got " + to_string(s));
  }
  return {s[0], s[1], s.size() == 4 ? s[2] * s[3] : 1};
}

}  // namespace

template <class Real>
Var<Real> matmul(Var<Real> a, Var<Real> b, bool transpose_b) {
  const std::string op = "matmul";
  const auto& as = a.shape();
  const auto& bs = b.shape();
  require_rank(op, "lhs", as, 2);
  require_rank(op, "rhs", bs, 2);
  const std::size_t m = as[0], k = as[1];
  const std::size_t bk = transpose_b ? bs[1] : bs[0];
  const std::size_t n = transpose_b ? bs[0] : bs[1];
  if (k != bk) {
    shape_fail(op, "inner dimensions differ: lhs " + to_string(as) + " vs rhs " + to_string(bs) +
                       (transpose_b ? " (rhs transposed)" : ""));
  }
  Tensor<Real> out(Shape{m, n});
  CMapMat<Real> A(a.value().data().data(), m, k);
  CMapMat<Real> B(b.value().data().data(), bs[0], bs[1]);
  MapMat<Real> C(out.data().data(), m, n);
  if (transpose_b) {
    C.noalias() = A * B.transpose();
  } else {
    C.noalias() = A * B;
  }
  return a.graph().record(op, {a, b}, std::move(out),
                          [m, k, n, transpose_b, bs](const BackwardArgs<Real>& args) {
                            CMapMat<Real> G(args.grad_out.data().data(), m, n);
                            CMapMat<Real> A(args.in[0]->data().data(), m, k);
                            CMapMat<Real> B(args.in[1]->data().data(), bs[0], bs[1]);
                            if (args.grad_in[0]) {
                              MapMat<Real> dA(args.grad_in[0]->data().data(), m, k);
                              if (transpose_b) {
                                dA.noalias() += G * B;
                              } else {
                                dA.noalias() += G * B.transpose();
                              }
                            }
                            if (args.grad_in[1]) {
                              MapMat<Real> dB(args.grad_in[1]->data().data(), bs[0], bs[1]);
                              if (transpose_b) {
                                dB.noalias() += G.transpose() * A;
                              } else {
                                dB.noalias() += A.transpose() * G;
                              }
                            }
                          });
}

template <class Real>
Var<Real> conv2d(Var<Real> x, Var<Real> weight, Conv2dAttrs attrs) {
  const std::string op = "conv2d";
  const auto& xs = x.shape();
  const auto& ws = weight.shape();
  require_rank(op, "input", xs, 4);
  require_rank(op, "weight", ws, 4);
  if (xs[1] != ws[1]) {
    shape_fail(op, "input channels " + std::to_string(xs[1]) + " != weight in-channels " +
                       std::to_string(ws[1]) + " (input " + to_string(xs) + ", weight " +
                       to_string(ws) + ")");
  }
  if (attrs.stride == 0) shape_fail(op, "stride must be positive");
  if (xs[2] + 2 * attrs.pad < ws[2] || xs[3] + 2 * attrs.pad < ws[3]) {
    shape_fail(op, "kernel " + to_string(ws) + " larger than padded input " + to_string(xs));
  }
  ConvGeometry g{xs[0], xs[1], xs[2], xs[3], ws[0], ws[2], ws[3], attrs.stride, attrs.pad, 0, 0};
  g.oh = (g.h + 2 * g.pad - g.kh) / g.stride + 1;
  g.ow = (g.w + 2 * g.pad - g.kw) / g.stride + 1;

  const std::size_t cols_w = g.n * g.pixels();
  std::vector<Real> cols(g.patch() * cols_w);
  im2col(x.value().data().data(), g, cols.data());
  RowMat<Real> out_mat(g.o, cols_w);
  CMapMat<Real> W(weight.value().data().data(), g.o, g.patch());
  out_mat.noalias() = W * CMapMat<Real>(cols.data(), g.patch(), cols_w);

  Tensor<Real> out(Shape{g.n, g.o, g.oh, g.ow});
  Real* y = out.data().data();
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t o = 0; o < g.o; ++o) {
      std::copy_n(out_mat.data() + o * cols_w + n * g.pixels(), g.pixels(),
                  y + (n * g.o + o) * g.pixels());
    }
  }
  return x.graph().record(op, {x, weight}, std::move(out), [g](const BackwardArgs<Real>& args) {
    const std::size_t cols_w = g.n * g.pixels();
    RowMat<Real> dout(g.o, cols_w);
    const Real* gy = args.grad_out.data().data();
    for (std::size_t n = 0; n < g.n; ++n) {
      for (std::size_t o = 0; o < g.o; ++o) {
        std::copy_n(gy + (n * g.o + o) * g.pixels(), g.pixels(),
                    dout.data() + o * cols_w + n * g.pixels());
      }
    }
    if (args.grad_in[1]) {
      std::vector<Real> cols(g.patch() * cols_w);
      im2col(args.in[0]->data().data(), g, cols.data());
      MapMat<Real> dW(args.grad_in[1]->data().data(), g.o, g.patch());
      dW.noalias() += dout * CMapMat<Real>(cols.data(), g.patch(), cols_w).transpose();
    }
    if (args.grad_in[0]) {
      CMapMat<Real> W(args.in[1]->data().data(), g.o, g.patch());
      RowMat<Real> dcols(g.patch(), cols_w);
      dcols.noalias() = W.transpose() * dout;
      col2im_add(dcols.data(), g, args.grad_in[0]->data().data());
    }
  });
}

template <class Real>
Var<Real> add(Var<Real> a, Var<Real> b) {
  const std::string op = "add";
  const auto& as = a.shape();
  const auto& bs = b.shape();
  const bool same = as == bs;
  const bool bias = !same && bs.size() < as.size() &&
                    std::equal(bs.begin(), bs.end(), as.end() - static_cast<std::ptrdiff_t>(bs.size()));
  if (!same && !bias) {
    shape_fail(op, "cannot add " + to_string(as) + " and " + to_string(bs));
  }
  Tensor<Real> out = a.value();
  const std::size_t period = b.value().size();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i % period];
  return a.graph().record(op, {a, b}, std::move(out), [period](const BackwardArgs<Real>& args) {
    auto g = args.grad_out.data();
    if (args.grad_in[0]) {
      auto d = args.grad_in[0]->data();
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    }
    if (args.grad_in[1]) {
      auto d = args.grad_in[1]->data();
      for (std::size_t i = 0; i < g.size(); ++i) d[i % period] += g[i];
    }
  });
}

template <class Real>
Var<Real> mul_scalar(Var<Real> x, Real c) {
  Tensor<Real> out = x.value();
  for (auto& v : out.data()) v *= c;
  return x.graph().record("mul_scalar", {x}, std::move(out), [c](const BackwardArgs<Real>& args) {
    auto g = args.grad_out.data();
    auto d = args.grad_in[0]->data();
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += c * g[i];
  });
}

template <class Real>
Var<Real> relu(Var<Real> x) {
  Tensor<Real> out = x.value();
  for (auto& v : out.data()) v = v > Real(0) ? v : Real(0);
  return x.graph().record("relu", {x}, std::move(out), [](const BackwardArgs<Real>& args) {
    auto g = args.grad_out.data();
    auto in = args.in[0]->data();
    auto d = args.grad_in[0]->data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (in[i] > Real(0)) d[i] += g[i];
    }
  });
}

template <class Real>
Var<Real> clip01(Var<Real> x) {
  Tensor<Real> out = x.value();
  for (auto& v : out.data()) v = std::clamp(v, Real(0), Real(1));
  return x.graph().record("clip01", {x}, std::move(out), [](const BackwardArgs<Real>& args) {
    auto g = args.grad_out.data();
    auto in = args.in[0]->data();
    auto d = args.grad_in[0]->data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (in[i] >= Real(0) && in[i] <= Real(1)) d[i] += g[i];
    }
  });
}

template <class Real>
Var<Real> tanh(Var<Real> x) {
  Tensor<Real> out = x.value();
  for (auto& v : out.data()) v = std::tanh(v);
  return x.graph().record("tanh", {x}, std::move(out), [](const BackwardArgs<Real>& args) {
    auto g = args.grad_out.data();
    auto t = args.out.data();
    auto d = args.grad_in[0]->data();
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * (Real(1) - t[i] * t[i]);
  });
}

template <class Real>
Var<Real> batchnorm2d(Var<Real> x, Var<Real> gamma, Var<Real> beta, BatchNormBuffers<Real>& buffers,
                      BnMode mode, bool update_running) {
  const std::string op = "batchnorm2d";
  const auto v = channel_view(op, x.shape());
  const Shape cshape{v.c};
  if (gamma.shape() != cshape || beta.shape() != cshape) {
    shape_fail(op, "affine parameters must be " + to_string(cshape) + ", got gamma " +
                       to_string(gamma.shape()) + " beta " + to_string(beta.shape()));
  }
  if (buffers.running_mean.shape() != cshape || buffers.running_var.shape() != cshape) {
    shape_fail(op, "running statistics must be " + to_string(cshape));
  }
  const std::size_t m = v.n * v.inner;

  auto xs = x.value().data();
  auto gs = gamma.value().data();
  auto bs = beta.value().data();
  auto xhat = std::make_shared<std::vector<Real>>(xs.size());
  auto invstd = std::make_shared<std::vector<Real>>(v.c);
  Tensor<Real> out(x.shape());
  auto ys = out.data();

  for (std::size_t c = 0; c < v.c; ++c) {
    Real mean;
    Real var;
    if (mode == BnMode::train) {
      double sum = 0.0;
      for (std::size_t n = 0; n < v.n; ++n) {
        const Real* p = xs.data() + (n * v.c + c) * v.inner;
        for (std::size_t i = 0; i < v.inner; ++i) sum += p[i];
      }
      const double mu = sum / static_cast<double>(m);
      double sq = 0.0;
      for (std::size_t n = 0; n < v.n; ++n) {
        const Real* p = xs.data() + (n * v.c + c) * v.inner;
        for (std::size_t i = 0; i < v.inner; ++i) {
          const double d = p[i] - mu;
          sq += d * d;
        }
      }
      const double biased = sq / static_cast<double>(m);
      mean = static_cast<Real>(mu);
      var = static_cast<Real>(biased);
      if (update_running) {
        const Real mom = buffers.momentum;
        const Real unbiased = static_cast<Real>(m > 1 ? sq / static_cast<double>(m - 1) : biased);
        buffers.running_mean[c] = (Real(1) - mom) * buffers.running_mean[c] + mom * mean;
        buffers.running_var[c] = (Real(1) - mom) * buffers.running_var[c] + mom * unbiased;
      }
    } else {
      mean = buffers.running_mean[c];
      var = buffers.running_var[c];
    }
    const Real is = Real(1) / std::sqrt(var + buffers.eps);
    (*invstd)[c] = is;
    for (std::size_t n = 0; n < v.n; ++n) {
      const std::size_t base = (n * v.c + c) * v.inner;
      for (std::size_t i = 0; i < v.inner; ++i) {
        const Real h = (xs[base + i] - mean) * is;
        (*xhat)[base + i] = h;
        ys[base + i] = gs[c] * h + bs[c];
      }
    }
  }

  return x.graph().record(
      op, {x, gamma, beta}, std::move(out),
      [v, m, mode, xhat, invstd](const BackwardArgs<Real>& args) {
        auto g = args.grad_out.data();
        auto gam = args.in[1]->data();
        for (std::size_t c = 0; c < v.c; ++c) {
          double sum_g = 0.0;
          double sum_gh = 0.0;
          for (std::size_t n = 0; n < v.n; ++n) {
            const std::size_t base = (n * v.c + c) * v.inner;
            for (std::size_t i = 0; i < v.inner; ++i) {
              sum_g += g[base + i];
              sum_gh += static_cast<double>(g[base + i]) * (*xhat)[base + i];
            }
          }
          if (args.grad_in[1]) args.grad_in[1]->data()[c] += static_cast<Real>(sum_gh);
          if (args.grad_in[2]) args.grad_in[2]->data()[c] += static_cast<Real>(sum_g);
          if (!args.grad_in[0]) continue;
          auto dx = args.grad_in[0]->data();
          const Real scale = gam[c] * (*invstd)[c];
          if (mode == BnMode::eval) {
            for (std::size_t n = 0; n < v.n; ++n) {
              const std::size_t base = (n * v.c + c) * v.inner;
              for (std::size_t i = 0; i < v.inner; ++i) dx[base + i] += scale * g[base + i];
            }
            continue;
          }
          const Real mean_g = static_cast<Real>(sum_g / static_cast<double>(m));
          const Real mean_gh = static_cast<Real>(sum_gh / static_cast<double>(m));
          for (std::size_t n = 0; n < v.n; ++n) {
            const std::size_t base = (n * v.c + c) * v.inner;
            for (std::size_t i = 0; i < v.inner; ++i) {
              dx[base + i] += scale * (g[base + i] - mean_g - (*xhat)[base + i] * mean_gh);
            }
          }
        }
      });
}

template <class Real>
Var<Real> maxpool2d(Var<Real> x, PoolAttrs attrs) {
  const auto g = pool_geometry("maxpool2d", x.shape(), attrs);
  Tensor<Real> out(Shape{g.n, g.c, g.oh, g.ow});
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  auto xs = x.value().data();
  auto ys = out.data();
  for (std::size_t nc = 0; nc < g.n * g.c; ++nc) {
    const std::size_t in_base = nc * g.h * g.w;
    for (std::size_t oy = 0; oy < g.oh; ++oy) {
      for (std::size_t ox = 0; ox < g.ow; ++ox) {
        std::size_t best = in_base + oy * g.stride * g.w + ox * g.stride;
        for (std::size_t ki = 0; ki < g.kh; ++ki) {
          for (std::size_t kj = 0; kj < g.kw; ++kj) {
            const std::size_t idx = in_base + (oy * g.stride + ki) * g.w + ox * g.stride + kj;
            if (xs[idx] > xs[best]) best = idx;
          }
        }
        const std::size_t o = (nc * g.oh + oy) * g.ow + ox;
        ys[o] = xs[best];
        (*argmax)[o] = best;
      }
    }
  }
  return x.graph().record("maxpool2d", {x}, std::move(out), [argmax](const BackwardArgs<Real>& args) {
    auto gy = args.grad_out.data();
    auto dx = args.grad_in[0]->data();
    for (std::size_t o = 0; o < gy.size(); ++o) dx[(*argmax)[o]] += gy[o];
  });
}

template <class Real>
Var<Real> avgpool2d(Var<Real> x, PoolAttrs attrs) {
  const auto g = pool_geometry("avgpool2d", x.shape(), attrs);
  Tensor<Real> out(Shape{g.n, g.c, g.oh, g.ow});
  auto xs = x.value().data();
  auto ys = out.data();
  const Real inv = Real(1) / static_cast<Real>(g.kh * g.kw);
  for (std::size_t nc = 0; nc < g.n * g.c; ++nc) {
    const std::size_t in_base = nc * g.h * g.w;
    for (std::size_t oy = 0; oy < g.oh; ++oy) {
      for (std::size_t ox = 0; ox < g.ow; ++ox) {
        Real s = 0;
        for (std::size_t ki = 0; ki < g.kh; ++ki) {
          for (std::size_t kj = 0; kj < g.kw; ++kj) {
            s += xs[in_base + (oy * g.stride + ki) * g.w + ox * g.stride + kj];
          }
        }
        ys[(nc * g.oh + oy) * g.ow + ox] = s * inv;
      }
    }
  }
  return x.graph().record("avgpool2d", {x}, std::move(out), [g, inv](const BackwardArgs<Real>& args) {
    auto gy = args.grad_out.data();
    auto dx = args.grad_in[0]->data();
    for (std::size_t nc = 0; nc < g.n * g.c; ++nc) {
      const std::size_t in_base = nc * g.h * g.w;
      for (std::size_t oy = 0; oy < g.oh; ++oy) {
        for (std::size_t ox = 0; ox < g.ow; ++ox) {
          const Real v = gy[(nc * g.oh + oy) * g.ow + ox] * inv;
          for (std::size_t ki = 0; ki < g.kh; ++ki) {
            for (std::size_t kj = 0; kj < g.kw; ++kj) {
              dx[in_base + (oy * g.stride + ki) * g.w + ox * g.stride + kj] += v;
            }
          }
        }
      }
    }
  });
}

template <class Real>
Var<Real> flatten(Var<Real> x) {
  const auto& s = x.shape();
  if (s.empty()) shape_fail("flatten", "input must have a batch dimension");
  Tensor<Real> out = x.value().reshaped(Shape{s[0], x.value().size() / s[0]});
  return x.graph().record("flatten", {x}, std::move(out), [](const BackwardArgs<Real>& args) {
    auto g = args.grad_out.data();
    auto d = args.grad_in[0]->data();
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
  });
}

template <class Real>
Var<Real> scale_layer(Var<Real> x, Var<Real> alpha) {
  if (alpha.value().size() != 1) {
    shape_fail("scale_layer", "alpha must hold one element, got " + to_string(alpha.shape()));
  }
  const Real a = alpha.value()[0];
  Tensor<Real> out = x.value();
  for (auto& v : out.data()) v *= a;
  return x.graph().record("scale_layer", {x, alpha}, std::move(out), [](const BackwardArgs<Real>& args) {
    auto g = args.grad_out.data();
    auto xs = args.in[0]->data();
    const Real a = (*args.in[1])[0];
    if (args.grad_in[0]) {
      auto d = args.grad_in[0]->data();
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += a * g[i];
    }
    if (args.grad_in[1]) {
      double s = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) s += static_cast<double>(g[i]) * xs[i];
      (*args.grad_in[1])[0] += static_cast<Real>(s);
    }
  });
}

template <class Real>
Tensor<Real> softmax(const Tensor<Real>& logits) {
  if (logits.rank() != 2) throw ShapeError("softmax: logits must be (N,K), got " + to_string(logits.shape()));
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  Tensor<Real> out(logits.shape());
  for (std::size_t r = 0; r < n; ++r) {
    const Real* z = logits.data().data() + r * k;
    Real* p = out.data().data() + r * k;
    const Real mx = *std::max_element(z, z + k);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(static_cast<double>(z[j] - mx));
    for (std::size_t j = 0; j < k; ++j) {
      p[j] = static_cast<Real>(std::exp(static_cast<double>(z[j] - mx)) / s);
    }
  }
  return out;
}

template <class Real>
Var<Real> softmax_cross_entropy(Var<Real> logits, std::span<const int> labels) {
  const std::string op = "softmax_cross_entropy";
  require_rank(op, "logits", logits.shape(), 2);
  const std::size_t n = logits.shape()[0], k = logits.shape()[1];
  if (labels.size() != n) {
    shape_fail(op, "batch of " + std::to_string(n) + " logits rows but " +
                       std::to_string(labels.size()) + " labels");
  }
  std::vector<int> lab(labels.begin(), labels.end());
  for (int l : lab) {
    if (l < 0 || static_cast<std::size_t>(l) >= k) {
      shape_fail(op, "label " + std::to_string(l) + " outside [0," + std::to_string(k) + ")");
    }
  }
  auto probs = std::make_shared<Tensor<Real>>(softmax(logits.value()));
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const Real* z = logits.value().data().data() + r * k;
    const double mx = *std::max_element(z, z + k);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(z[j] - mx);
    loss += mx + std::log(s) - z[lab[r]];
  }
  Tensor<Real> out = Tensor<Real>::scalar(static_cast<Real>(loss / static_cast<double>(n)));
  return logits.graph().record(op, {logits}, std::move(out),
                               [probs, lab = std::move(lab), n, k](const BackwardArgs<Real>& args) {
                                 const Real g = args.grad_out[0] / static_cast<Real>(n);
                                 auto d = args.grad_in[0]->data();
                                 auto p = probs->data();
                                 for (std::size_t r = 0; r < n; ++r) {
                                   for (std::size_t j = 0; j < k; ++j) {
                                     const Real t = static_cast<std::size_t>(lab[r]) == j ? Real(1) : Real(0);
                                     d[r * k + j] += g * (p[r * k + j] - t);
                                   }
                                 }
                               });
}

template <class Real>
Var<Real> mse_half(Var<Real> a, Var<Real> b) {
  if (a.shape() != b.shape()) {
    shape_fail("mse_half", "operands differ: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  auto as = a.value().data();
  auto bs = b.value().data();
  double s = 0.0;
  for (std::size_t i = 0; i < as.size(); ++i) {
    const double d = static_cast<double>(as[i]) - bs[i];
    s += 0.5 * d * d;
  }
  const double count = static_cast<double>(as.size());
  Tensor<Real> out = Tensor<Real>::scalar(static_cast<Real>(s / count));
  return a.graph().record("mse_half", {a, b}, std::move(out), [count](const BackwardArgs<Real>& args) {
    const Real g = static_cast<Real>(args.grad_out[0] / count);
    auto as = args.in[0]->data();
    auto bs = args.in[1]->data();
    for (std::size_t i = 0; i < as.size(); ++i) {
      const Real d = g * (as[i] - bs[i]);
      if (args.grad_in[0]) (*args.grad_in[0])[i] += d;
      if (args.grad_in[1]) (*args.grad_in[1])[i] -= d;
    }
  });
}

#define QAT_INSTANTIATE_OPS(R)                                                              \
  template Var<R> matmul(Var<R>, Var<R>, bool);                                             \
  template Var<R> conv2d(Var<R>, Var<R>, Conv2dAttrs);                                      \
  template Var<R> add(Var<R>, Var<R>);                                                      \
  template Var<R> mul_scalar(Var<R>, R);                                                    \
  template Var<R> relu(Var<R>);                                                             \
  template Var<R> clip01(Var<R>);                                                           \
  template Var<R> tanh(Var<R>);                                                             \
  template Var<R> batchnorm2d(Var<R>, Var<R>, Var<R>, BatchNormBuffers<R>&, BnMode, bool);  \
  template Var<R> maxpool2d(Var<R>, PoolAttrs);                                             \
  template Var<R> avgpool2d(Var<R>, PoolAttrs);                                             \
  template Var<R> flatten(Var<R>);                                                          \
  template Var<R> scale_layer(Var<R>, Var<R>);                                              \
  template Var<R> softmax_cross_entropy(Var<R>, std::span<const int>);                      \
  template Var<R> mse_half(Var<R>, Var<R>);                                                 \
  template Tensor<R> softmax(const Tensor<R>&);

QAT_INSTANTIATE_OPS(float)
QAT_INSTANTIATE_OPS(double)

#undef QAT_INSTANTIATE_OPS

}  // namespace qat::ad
