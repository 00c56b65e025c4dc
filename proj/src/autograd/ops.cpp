#include "patchsel/autograd/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <memory>
#include <string>

#include "patchsel/error.hpp"

namespace patchsel::ag {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

void require_rank4(const Tensor& x, const char* op) {
  if (x.rank() != 4) {
    throw ShapeError(std::string(op) + ": expected NCHW input, got " + shape_str(x.shape()));
  }
}

bool wants_grad(const std::shared_ptr<TensorImpl>& t) { return t->requires_grad; }

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] + db[i];
  return make_result(
      a.shape(), std::move(out), {a, b},
      [a = a.impl_ptr(), b = b.impl_ptr()](const TensorImpl& o) {
        for (auto* in : {a.get(), b.get()}) {
          if (!in->requires_grad) continue;
          auto& g = in->grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
        }
      },
      "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] - db[i];
  return make_result(
      a.shape(), std::move(out), {a, b},
      [a = a.impl_ptr(), b = b.impl_ptr()](const TensorImpl& o) {
        if (wants_grad(a)) {
          auto& g = a->grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
        }
        if (wants_grad(b)) {
          auto& g = b->grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] -= o.grad[i];
        }
      },
      "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] * db[i];
  return make_result(
      a.shape(), std::move(out), {a, b},
      [a = a.impl_ptr(), b = b.impl_ptr()](const TensorImpl& o) {
        if (wants_grad(a)) {
          auto& g = a->grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * b->data[i];
        }
        if (wants_grad(b)) {
          auto& g = b->grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * a->data[i];
        }
      },
      "mul");
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  auto da = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] * factor;
  return make_result(
      a.shape(), std::move(out), {a},
      [a = a.impl_ptr(), factor](const TensorImpl& o) {
        auto& g = a->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * factor;
      },
      "scale");
}

Tensor square(const Tensor& a) {
  std::vector<double> out(a.numel());
  auto da = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] * da[i];
  return make_result(
      a.shape(), std::move(out), {a},
      [a = a.impl_ptr()](const TensorImpl& o) {
        auto& g = a->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * a->data[i] * o.grad[i];
      },
      "square");
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return make_result(
      {1}, {s}, {a},
      [a = a.impl_ptr()](const TensorImpl& o) {
        auto& g = a->grad_buffer();
        for (auto& v : g) v += o.grad[0];
      },
      "sum");
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor leaky_relu(const Tensor& x, double alpha) {
  std::vector<double> out(x.numel());
  auto dx = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = dx[i] > 0.0 ? dx[i] : alpha * dx[i];
  return make_result(
      x.shape(), std::move(out), {x},
      [x = x.impl_ptr(), alpha](const TensorImpl& o) {
        auto& g = x->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
          g[i] += x->data[i] > 0.0 ? o.grad[i] : alpha * o.grad[i];
        }
      },
      "leaky_relu");
}

Tensor tempered_sigmoid(const Tensor& x, double temperature) {
  if (!(temperature > 0.0)) {
    throw ConfigError("tempered_sigmoid: temperature must be positive, got " +
                      std::to_string(temperature));
  }
  std::vector<double> out(x.numel());
  auto dx = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 1.0 / (1.0 + std::exp(-(temperature * dx[i])));
  }
  return make_result(
      x.shape(), std::move(out), {x},
      [x = x.impl_ptr(), temperature](const TensorImpl& o) {
        auto& g = x->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double s = o.data[i];
          g[i] += o.grad[i] * temperature * s * (1.0 - s);
        }
      },
      "tempered_sigmoid");
}

// ---------------------------------------------------------------------------
// conv2d

namespace {

struct ConvGeom {
  std::size_t n, cin, h, w, cout, kh, kw, ho, wo;
  int stride, pad;
  std::size_t k_rows() const { return cin * kh * kw; }
  std::size_t pixels() const { return ho * wo; }
  bool is_pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

// Output columns [lo, hi) whose input column ox*stride - pad + kx is in range.
std::pair<std::size_t, std::size_t> valid_cols(const ConvGeom& g, std::size_t kx) {
  const long off = static_cast<long>(kx) - g.pad;
  const long s = g.stride;
  long lo = off >= 0 ? 0 : (-off + s - 1) / s;
  long hi = (static_cast<long>(g.w) - 1 - off) / s + 1;
  if (static_cast<long>(g.w) - 1 - off < 0) hi = 0;
  lo = std::min<long>(lo, static_cast<long>(g.wo));
  hi = std::clamp<long>(hi, lo, static_cast<long>(g.wo));
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

void im2col(const double* img, const ConvGeom& g, double* col) {
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        double* row = col + ((c * g.kh + ky) * g.kw + kx) * g.pixels();
        const auto [lo, hi] = valid_cols(g, kx);
        const long off = static_cast<long>(kx) - g.pad;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = static_cast<long>(oy) * g.stride - g.pad + static_cast<long>(ky);
          double* dst = row + oy * g.wo;
          if (iy < 0 || iy >= static_cast<long>(g.h)) {
            std::fill(dst, dst + g.wo, 0.0);
            continue;
          }
          const double* src = img + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          std::fill(dst, dst + lo, 0.0);
          if (g.stride == 1) {
            std::copy(src + static_cast<long>(lo) + off, src + static_cast<long>(hi) + off, dst + lo);
          } else {
            for (std::size_t ox = lo; ox < hi; ++ox) dst[ox] = src[static_cast<long>(ox) * g.stride + off];
          }
          std::fill(dst + hi, dst + g.wo, 0.0);
        }
      }
    }
  }
}

void col2im_add(const double* col, const ConvGeom& g, double* img) {
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        const double* row = col + ((c * g.kh + ky) * g.kw + kx) * g.pixels();
        const auto [lo, hi] = valid_cols(g, kx);
        const long off = static_cast<long>(kx) - g.pad;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = static_cast<long>(oy) * g.stride - g.pad + static_cast<long>(ky);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          const double* src = row + oy * g.wo;
          double* dst = img + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          if (g.stride == 1) {
            double* d = dst + off;
            for (std::size_t ox = lo; ox < hi; ++ox) d[ox] += src[ox];
          } else {
            for (std::size_t ox = lo; ox < hi; ++ox) dst[static_cast<long>(ox) * g.stride + off] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride, int pad) {
  require_rank4(x, "conv2d");
  if (weight.rank() != 4) throw ShapeError("conv2d: weight must be (Cout,Cin,kh,kw)");
  if (stride < 1 || pad < 0) throw ShapeError("conv2d: stride must be >= 1 and pad >= 0");
  ConvGeom g{};
  g.n = x.dim(0);
  g.cin = x.dim(1);
  g.h = x.dim(2);
  g.w = x.dim(3);
  g.cout = weight.dim(0);
  g.kh = weight.dim(2);
  g.kw = weight.dim(3);
  g.stride = stride;
  g.pad = pad;
  if (weight.dim(1) != g.cin) {
    throw ShapeError("conv2d: input has " + std::to_string(g.cin) + " channels, weight expects " +
                     std::to_string(weight.dim(1)));
  }
  const long span_h = static_cast<long>(g.h) + 2L * pad - static_cast<long>(g.kh);
  const long span_w = static_cast<long>(g.w) + 2L * pad - static_cast<long>(g.kw);
  if (span_h < 0 || span_w < 0) throw ShapeError("conv2d: kernel larger than padded input");
  g.ho = static_cast<std::size_t>(span_h / stride + 1);
  g.wo = static_cast<std::size_t>(span_w / stride + 1);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g.cout)) {
    throw ShapeError("conv2d: bias must have Cout entries");
  }

  const std::size_t in_plane = g.cin * g.h * g.w;
  const std::size_t out_plane = g.cout * g.pixels();
  std::vector<double> out(g.n * out_plane);
  // Scratch is fully overwritten before use; skip the zero fill.
  std::unique_ptr<double[]> col(g.is_pointwise() ? nullptr : new double[g.k_rows() * g.pixels()]);
  ConstMapMat wmat(weight.data().data(), static_cast<long>(g.cout), static_cast<long>(g.k_rows()));
  for (std::size_t b = 0; b < g.n; ++b) {
    const double* src = x.data().data() + b * in_plane;
    if (!g.is_pointwise()) im2col(src, g, col.get());
    const double* cptr = g.is_pointwise() ? src : col.get();
    ConstMapMat cmat(cptr, static_cast<long>(g.k_rows()), static_cast<long>(g.pixels()));
    MapMat omat(out.data() + b * out_plane, static_cast<long>(g.cout), static_cast<long>(g.pixels()));
    omat.noalias() = wmat * cmat;
    if (bias.defined()) {
      for (std::size_t c = 0; c < g.cout; ++c) omat.row(static_cast<long>(c)).array() += bias.at(c);
    }
  }

  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result(
      {g.n, g.cout, g.ho, g.wo}, std::move(out), std::move(inputs),
      [x = x.impl_ptr(), w = weight.impl_ptr(),
       bsp = bias.defined() ? bias.impl_ptr() : std::shared_ptr<TensorImpl>(), g](const TensorImpl& o) {
        const std::size_t in_plane = g.cin * g.h * g.w;
        const std::size_t out_plane = g.cout * g.pixels();
        const long rows = static_cast<long>(g.k_rows());
        const long pix = static_cast<long>(g.pixels());
        ConstMapMat wmat(w->data.data(), static_cast<long>(g.cout), rows);
        const std::size_t scratch = g.is_pointwise() ? 0 : g.k_rows() * g.pixels();
        std::unique_ptr<double[]> col(scratch ? new double[scratch] : nullptr);
        std::unique_ptr<double[]> dcol(scratch ? new double[scratch] : nullptr);
        for (std::size_t b = 0; b < g.n; ++b) {
          ConstMapMat dy(o.grad.data() + b * out_plane, static_cast<long>(g.cout), pix);
          if (w->requires_grad) {
            const double* src = x->data.data() + b * in_plane;
            if (!g.is_pointwise()) im2col(src, g, col.get());
            ConstMapMat cmat(g.is_pointwise() ? src : col.get(), rows, pix);
            MapMat dw(w->grad_buffer().data(), static_cast<long>(g.cout), rows);
            dw.noalias() += dy * cmat.transpose();
          }
          if (bsp && bsp->requires_grad) {
            auto& gb = bsp->grad_buffer();
            // plain loop: Eigen's vectorised sum peels by address, so the rounding moved between runs
            for (std::size_t c = 0; c < g.cout; ++c) {
              const double* row = o.grad.data() + b * out_plane + c * g.pixels();
              double s = 0.0;
              for (std::size_t i = 0; i < g.pixels(); ++i) s += row[i];
              gb[c] += s;
            }
          }
          if (x->requires_grad) {
            double* dx = x->grad_buffer().data() + b * in_plane;
            if (g.is_pointwise()) {
              MapMat dxm(dx, rows, pix);
              dxm.noalias() += wmat.transpose() * dy;
            } else {
              MapMat dc(dcol.get(), rows, pix);
              dc.noalias() = wmat.transpose() * dy;
              col2im_add(dcol.get(), g, dx);
            }
          }
        }
      },
      "conv2d");
}

// ---------------------------------------------------------------------------

Tensor avg_pool2(const Tensor& x) {
  require_rank4(x, "avg_pool2");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("avg_pool2: spatial dims must be even, got " + shape_str(x.shape()));
  }
  const std::size_t ho = h / 2, wo = w / 2;
  std::vector<double> out(n * c * ho * wo);
  auto src = x.data();
  for (std::size_t p = 0; p < n * c; ++p) {
    const double* s = src.data() + p * h * w;
    double* d = out.data() + p * ho * wo;
    for (std::size_t y = 0; y < ho; ++y) {
      for (std::size_t xx = 0; xx < wo; ++xx) {
        const double* q = s + 2 * y * w + 2 * xx;
        d[y * wo + xx] = 0.25 * (q[0] + q[1] + q[w] + q[w + 1]);
      }
    }
  }
  return make_result(
      {n, c, ho, wo}, std::move(out), {x},
      [x = x.impl_ptr(), n, c, h, w, ho, wo](const TensorImpl& o) {
        auto& g = x->grad_buffer();
        for (std::size_t p = 0; p < n * c; ++p) {
          double* gd = g.data() + p * h * w;
          const double* go = o.grad.data() + p * ho * wo;
          for (std::size_t y = 0; y < ho; ++y) {
            for (std::size_t xx = 0; xx < wo; ++xx) {
              const double v = 0.25 * go[y * wo + xx];
              double* q = gd + 2 * y * w + 2 * xx;
              q[0] += v;
              q[1] += v;
              q[w] += v;
              q[w + 1] += v;
            }
          }
        }
      },
      "avg_pool2");
}

// ---------------------------------------------------------------------------

BatchNormState BatchNormState::make(std::size_t channels) {
  BatchNormState s;
  s.running_mean = Tensor::zeros({channels});
  s.running_var = Tensor::full({channels}, 1.0);
  return s;
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state,
                  bool training) {
  require_rank4(x, "batch_norm");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (gamma.numel() != c || beta.numel() != c) {
    throw ShapeError("batch_norm: gamma/beta must have one entry per channel");
  }
  const std::size_t m = n * hw;
  if (m == 0) throw ShapeError("batch_norm: empty batch");

  std::vector<double> mean(c), inv_std(c);
  auto src = x.data();
  if (training) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const double* p = src.data() + (b * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) s += p[i];
      }
      const double mu = s / static_cast<double>(m);
      double v = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const double* p = src.data() + (b * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) v += (p[i] - mu) * (p[i] - mu);
      }
      const double var = v / static_cast<double>(m);
      mean[ch] = mu;
      inv_std[ch] = 1.0 / std::sqrt(var + state.eps);
      const double unbiased = m > 1 ? v / static_cast<double>(m - 1) : var;
      auto rm = state.running_mean.data();
      auto rv = state.running_var.data();
      rm[ch] = (1.0 - state.momentum) * rm[ch] + state.momentum * mu;
      rv[ch] = (1.0 - state.momentum) * rv[ch] + state.momentum * unbiased;
    }
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      mean[ch] = state.running_mean.at(ch);
      inv_std[ch] = 1.0 / std::sqrt(state.running_var.at(ch) + state.eps);
    }
  }

  std::vector<double> xhat(x.numel());
  std::vector<double> out(x.numel());
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t off = (b * c + ch) * hw;
      const double gm = gamma.at(ch), bt = beta.at(ch);
      for (std::size_t i = 0; i < hw; ++i) {
        const double xh = (src[off + i] - mean[ch]) * inv_std[ch];
        xhat[off + i] = xh;
        out[off + i] = gm * xh + bt;
      }
    }
  }

  return make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [x = x.impl_ptr(), gamma = gamma.impl_ptr(), beta = beta.impl_ptr(), xhat = std::move(xhat),
       inv_std = std::move(inv_std), n, c, hw, m, training](const TensorImpl& o) {
        std::vector<double> sum_dy(c, 0.0), sum_dy_xhat(c, 0.0);
        for (std::size_t b = 0; b < n; ++b) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t off = (b * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) {
              sum_dy[ch] += o.grad[off + i];
              sum_dy_xhat[ch] += o.grad[off + i] * xhat[off + i];
            }
          }
        }
        if (gamma->requires_grad) {
          auto& g = gamma->grad_buffer();
          for (std::size_t ch = 0; ch < c; ++ch) g[ch] += sum_dy_xhat[ch];
        }
        if (beta->requires_grad) {
          auto& g = beta->grad_buffer();
          for (std::size_t ch = 0; ch < c; ++ch) g[ch] += sum_dy[ch];
        }
        if (!x->requires_grad) return;
        auto& gx = x->grad_buffer();
        const double inv_m = 1.0 / static_cast<double>(m);
        for (std::size_t b = 0; b < n; ++b) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t off = (b * c + ch) * hw;
            const double k = gamma->data[ch] * inv_std[ch];
            for (std::size_t i = 0; i < hw; ++i) {
              if (training) {
                gx[off + i] += k * (o.grad[off + i] - inv_m * sum_dy[ch] -
                                    xhat[off + i] * inv_m * sum_dy_xhat[ch]);
              } else {
                gx[off + i] += k * o.grad[off + i];
              }
            }
          }
        }
      },
      "batch_norm");
}

// ---------------------------------------------------------------------------

Tensor pixel_shuffle(const Tensor& x, int factor) {
  require_rank4(x, "pixel_shuffle");
  const std::size_t r = static_cast<std::size_t>(factor);
  const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (factor < 1 || cin % (r * r) != 0) {
    throw ShapeError("pixel_shuffle: channels not divisible by factor^2");
  }
  const std::size_t c = cin / (r * r), ho = h * r, wo = w * r;
  // index map from output flat position to input flat position
  std::vector<std::size_t> src_index(n * c * ho * wo);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < ho; ++y)
        for (std::size_t xx = 0; xx < wo; ++xx) {
          const std::size_t ic = ch * r * r + (y % r) * r + (xx % r);
          src_index[((b * c + ch) * ho + y) * wo + xx] = ((b * cin + ic) * h + y / r) * w + xx / r;
        }
  std::vector<double> out(src_index.size());
  auto src = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = src[src_index[i]];
  return make_result(
      {n, c, ho, wo}, std::move(out), {x},
      [x = x.impl_ptr(), idx = std::move(src_index)](const TensorImpl& o) {
        auto& g = x->grad_buffer();
        for (std::size_t i = 0; i < idx.size(); ++i) g[idx[i]] += o.grad[i];
      },
      "pixel_shuffle");
}

Tensor pad2d(const Tensor& x, const std::vector<Pad4>& pads) {
  require_rank4(x, "pad2d");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (pads.size() != n) throw ShapeError("pad2d: need one padding entry per batch item");
  for (const auto& p : pads) {
    if (p.top < 0 || p.bottom < 0 || p.left < 0 || p.right < 0) {
      throw ShapeError("pad2d: negative padding");
    }
  }
  const std::size_t ho = h + static_cast<std::size_t>(pads[0].top + pads[0].bottom);
  const std::size_t wo = w + static_cast<std::size_t>(pads[0].left + pads[0].right);
  for (const auto& p : pads) {
    if (h + static_cast<std::size_t>(p.top + p.bottom) != ho ||
        w + static_cast<std::size_t>(p.left + p.right) != wo) {
      throw ShapeError("pad2d: padded sizes differ across the batch");
    }
  }
  std::vector<double> out(n * c * ho * wo, 0.0);
  auto src = x.data();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < h; ++y) {
        const double* s = src.data() + ((b * c + ch) * h + y) * w;
        double* d = out.data() + ((b * c + ch) * ho + y + static_cast<std::size_t>(pads[b].top)) * wo +
                    static_cast<std::size_t>(pads[b].left);
        std::copy(s, s + w, d);
      }
  return make_result(
      {n, c, ho, wo}, std::move(out), {x},
      [x = x.impl_ptr(), pads, n, c, h, w, ho, wo](const TensorImpl& o) {
        auto& g = x->grad_buffer();
        for (std::size_t b = 0; b < n; ++b)
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t y = 0; y < h; ++y) {
              double* d = g.data() + ((b * c + ch) * h + y) * w;
              const double* s = o.grad.data() +
                                ((b * c + ch) * ho + y + static_cast<std::size_t>(pads[b].top)) * wo +
                                static_cast<std::size_t>(pads[b].left);
              for (std::size_t i = 0; i < w; ++i) d[i] += s[i];
            }
      },
      "pad2d");
}

Tensor gather(const Tensor& x, const std::vector<std::size_t>& indices) {
  std::vector<double> out(indices.size());
  auto src = x.data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= src.size()) throw ShapeError("gather: index out of range");
    out[i] = src[indices[i]];
  }
  return make_result(
      {indices.size()}, std::move(out), {x},
      [x = x.impl_ptr(), indices](const TensorImpl& o) {
        auto& g = x->grad_buffer();
        for (std::size_t i = 0; i < indices.size(); ++i) g[indices[i]] += o.grad[i];
      },
      "gather");
}

Tensor concat_batch(const std::vector<Tensor>& items) {
  if (items.empty()) throw ShapeError("concat_batch: no inputs");
  Shape item_shape = items.front().shape();
  if (item_shape.empty()) throw ShapeError("concat_batch: rank-0 input");
  std::size_t total = 0;
  for (const auto& t : items) {
    Shape s = t.shape();
    if (s.size() != item_shape.size() ||
        !std::equal(s.begin() + 1, s.end(), item_shape.begin() + 1)) {
      throw ShapeError("concat_batch: inconsistent item shapes");
    }
    total += s[0];
  }
  Shape out_shape = item_shape;
  out_shape[0] = total;
  std::vector<double> out;
  out.reserve(numel_of(out_shape));
  std::vector<std::shared_ptr<TensorImpl>> impls;
  for (const auto& t : items) {
    out.insert(out.end(), t.data().begin(), t.data().end());
    impls.push_back(t.impl_ptr());
  }
  return make_result(
      std::move(out_shape), std::move(out), items,
      [impls](const TensorImpl& o) {
        std::size_t off = 0;
        for (const auto& in : impls) {
          const std::size_t len = in->data.size();
          if (in->requires_grad) {
            auto& g = in->grad_buffer();
            for (std::size_t i = 0; i < len; ++i) g[i] += o.grad[off + i];
          }
          off += len;
        }
      },
      "concat_batch");
}

}  // namespace patchsel::ag
