#include "spadnn/ops.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "spadnn/errors.hpp"

namespace spadnn {
namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank)
    throw DimensionError(std::string(what) + " must have rank " +
                         std::to_string(rank) + ", got shape " +
                         shape_str(t.shape()));
}

// out[rows,cols] (+)= a[rows,inner] * b[inner,cols] with optional transposes
// expressed through the stored layouts.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, const double* a, const double* b, double beta,
          double* c) {
  const auto lda = static_cast<int>(trans_a ? m : k);
  const auto ldb = static_cast<int>(trans_b ? k : n);
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m),
              static_cast<int>(n), static_cast<int>(k), 1.0, a, lda, b, ldb,
              beta, c, static_cast<int>(n));
}

struct ConvGeometry {
  std::size_t batch, in_ch, in_h, in_w;
  std::size_t out_ch, k_h, k_w;
  std::size_t out_h, out_w;
  std::size_t stride, pad;

  std::size_t patch() const { return in_ch * k_h * k_w; }
  std::size_t out_plane() const { return out_h * out_w; }
};

// cols[(c*kh + ky)*kw + kx, oy*out_w + ox] = padded input sample.
void im2col(const ConvGeometry& g, const double* in, double* cols) {
  const std::size_t plane = g.out_plane();
  for (std::size_t c = 0; c < g.in_ch; ++c) {
    const double* src = in + c * g.in_h * g.in_w;
    for (std::size_t ky = 0; ky < g.k_h; ++ky) {
      for (std::size_t kx = 0; kx < g.k_w; ++kx) {
        double* row = cols + ((c * g.k_h + ky) * g.k_w + kx) * plane;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                          static_cast<std::ptrdiff_t>(g.pad);
          double* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const double* src_row = src + static_cast<std::size_t>(iy) * g.in_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                            static_cast<std::ptrdiff_t>(g.pad);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w))
                          ? 0.0
                          : src_row[ix];
          }
        }
      }
    }
  }
}

// Inverse scatter of im2col: accumulates column gradients into the input.
void col2im_add(const ConvGeometry& g, const double* cols, double* in) {
  const std::size_t plane = g.out_plane();
  for (std::size_t c = 0; c < g.in_ch; ++c) {
    double* dst = in + c * g.in_h * g.in_w;
    for (std::size_t ky = 0; ky < g.k_h; ++ky) {
      for (std::size_t kx = 0; kx < g.k_w; ++kx) {
        const double* row = cols + ((c * g.k_h + ky) * g.k_w + kx) * plane;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                          static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
          double* dst_row = dst + static_cast<std::size_t>(iy) * g.in_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                            static_cast<std::ptrdiff_t>(g.pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.in_w))
              dst_row[ix] += row[oy * g.out_w + ox];
          }
        }
      }
    }
  }
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()) + " differ");
}

}  // namespace

Tensor affine(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank(input, 2, "affine input");
  require_rank(weight, 2, "affine weight");
  require_rank(bias, 1, "affine bias");
  const std::size_t batch = input.dim(0), in = input.dim(1);
  const std::size_t out = weight.dim(0);
  if (weight.dim(1) != in || bias.dim(0) != out)
    throw DimensionError("affine: input " + shape_str(input.shape()) +
                         " incompatible with weight " +
                         shape_str(weight.shape()) + " and bias " +
                         shape_str(bias.shape()));

  std::vector<double> y(batch * out);
  if (batch > 0 && in > 0)
    gemm(false, true, batch, out, in, input.data().data(),
         weight.data().data(), 0.0, y.data());
  const auto b = bias.data();
  for (std::size_t r = 0; r < batch; ++r)
    for (std::size_t o = 0; o < out; ++o) y[r * out + o] += b[o];

  return Tensor::make_result(
      {batch, out}, std::move(y), {input, weight, bias},
      [batch, in, out](detail::Node& self) {
        auto& x = *self.parents[0];
        auto& w = *self.parents[1];
        auto& bb = *self.parents[2];
        const double* g = self.grad.data();
        if (x.requires_grad)
          gemm(false, false, batch, in, out, g, w.value.data(), 1.0,
               x.ensure_grad().data());
        if (w.requires_grad)
          gemm(true, false, out, in, batch, g, x.value.data(), 1.0,
               w.ensure_grad().data());
        if (bb.requires_grad) {
          auto& gb = bb.ensure_grad();
          for (std::size_t r = 0; r < batch; ++r)
            for (std::size_t o = 0; o < out; ++o) gb[o] += g[r * out + o];
        }
      });
}

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              std::size_t stride, std::size_t padding) {
  require_rank(input, 4, "conv2d input");
  require_rank(kernels, 4, "conv2d kernels");
  require_rank(bias, 1, "conv2d bias");
  if (stride < 1) throw DimensionError("conv2d: stride must be >= 1");
  ConvGeometry g{};
  g.batch = input.dim(0);
  g.in_ch = input.dim(1);
  g.in_h = input.dim(2);
  g.in_w = input.dim(3);
  g.out_ch = kernels.dim(0);
  g.k_h = kernels.dim(2);
  g.k_w = kernels.dim(3);
  g.stride = stride;
  g.pad = padding;
  if (kernels.dim(1) != g.in_ch || bias.dim(0) != g.out_ch)
    throw DimensionError("conv2d: input " + shape_str(input.shape()) +
                         " incompatible with kernels " +
                         shape_str(kernels.shape()) + " and bias " +
                         shape_str(bias.shape()));
  if (g.k_h > g.in_h + 2 * padding || g.k_w > g.in_w + 2 * padding ||
      g.k_h == 0 || g.k_w == 0)
    throw DimensionError("conv2d: kernel " + shape_str(kernels.shape()) +
                         " larger than padded input " +
                         shape_str(input.shape()) + " (padding " +
                         std::to_string(padding) + ")");
  g.out_h = (g.in_h + 2 * padding - g.k_h) / stride + 1;
  g.out_w = (g.in_w + 2 * padding - g.k_w) / stride + 1;

  const std::size_t plane = g.out_plane();
  const std::size_t in_sample = g.in_ch * g.in_h * g.in_w;
  const std::size_t out_sample = g.out_ch * plane;
  std::vector<double> y(g.batch * out_sample);
  std::vector<double> cols(g.patch() * plane);
  const auto x = input.data();
  const auto w = kernels.data();
  const auto b = bias.data();
  for (std::size_t n = 0; n < g.batch; ++n) {
    im2col(g, x.data() + n * in_sample, cols.data());
    double* dst = y.data() + n * out_sample;
    for (std::size_t c = 0; c < g.out_ch; ++c)
      std::fill(dst + c * plane, dst + (c + 1) * plane, b[c]);
    gemm(false, false, g.out_ch, plane, g.patch(), w.data(), cols.data(), 1.0,
         dst);
  }

  return Tensor::make_result(
      {g.batch, g.out_ch, g.out_h, g.out_w}, std::move(y),
      {input, kernels, bias}, [g](detail::Node& self) {
        auto& xn = *self.parents[0];
        auto& wn = *self.parents[1];
        auto& bn = *self.parents[2];
        const std::size_t plane = g.out_plane();
        const std::size_t in_sample = g.in_ch * g.in_h * g.in_w;
        const std::size_t out_sample = g.out_ch * plane;
        std::vector<double> cols(g.patch() * plane);
        for (std::size_t n = 0; n < g.batch; ++n) {
          const double* gout = self.grad.data() + n * out_sample;
          if (wn.requires_grad) {
            im2col(g, xn.value.data() + n * in_sample, cols.data());
            gemm(false, true, g.out_ch, g.patch(), plane, gout, cols.data(),
                 1.0, wn.ensure_grad().data());
          }
          if (xn.requires_grad) {
            gemm(true, false, g.patch(), plane, g.out_ch, wn.value.data(), gout,
                 0.0, cols.data());
            col2im_add(g, cols.data(), xn.ensure_grad().data() + n * in_sample);
          }
          if (bn.requires_grad) {
            auto& gb = bn.ensure_grad();
            for (std::size_t c = 0; c < g.out_ch; ++c) {
              double acc = 0.0;
              for (std::size_t i = 0; i < plane; ++i) acc += gout[c * plane + i];
              gb[c] += acc;
            }
          }
        }
      });
}

Tensor batchnorm2d(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                   BatchNormState& state, Mode mode) {
  require_rank(input, 4, "batchnorm2d input");
  const std::size_t batch = input.dim(0), ch = input.dim(1);
  const std::size_t plane = input.dim(2) * input.dim(3);
  if (batch == 0) throw DimensionError("batchnorm2d: empty batch");
  if (gamma.numel() != ch || beta.numel() != ch ||
      state.running_mean.size() != ch || state.running_var.size() != ch)
    throw DimensionError("batchnorm2d: " + std::to_string(ch) +
                         " channels but gamma " + shape_str(gamma.shape()) +
                         ", beta " + shape_str(beta.shape()));
  const std::size_t count = batch * plane;
  if (mode == Mode::kTrain && count < 2)
    throw ContractError(
        "batchnorm2d: train mode needs at least 2 values per channel");

  const auto x = input.data();
  const auto gm = gamma.data();
  const auto bt = beta.data();
  std::vector<double> mean(ch), inv_std(ch);
  if (mode == Mode::kTrain) {
    for (std::size_t c = 0; c < ch; ++c) {
      double s = 0.0;
      for (std::size_t n = 0; n < batch; ++n) {
        const double* p = x.data() + (n * ch + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
      }
      const double mu = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::size_t n = 0; n < batch; ++n) {
        const double* p = x.data() + (n * ch + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) ss += (p[i] - mu) * (p[i] - mu);
      }
      const double var = ss / static_cast<double>(count);
      mean[c] = mu;
      inv_std[c] = 1.0 / std::sqrt(var + state.eps);
      const double unbiased = ss / static_cast<double>(count - 1);
      state.running_mean[c] =
          (1.0 - state.momentum) * state.running_mean[c] + state.momentum * mu;
      state.running_var[c] = (1.0 - state.momentum) * state.running_var[c] +
                             state.momentum * unbiased;
    }
  } else {
    for (std::size_t c = 0; c < ch; ++c) {
      mean[c] = state.running_mean[c];
      inv_std[c] = 1.0 / std::sqrt(state.running_var[c] + state.eps);
    }
  }

  std::vector<double> xhat(x.size()), y(x.size());
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t c = 0; c < ch; ++c) {
      const std::size_t off = (n * ch + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        xhat[off + i] = (x[off + i] - mean[c]) * inv_std[c];
        y[off + i] = xhat[off + i] * gm[c] + bt[c];
      }
    }

  const bool batch_stats = mode == Mode::kTrain;
  return Tensor::make_result(
      input.shape(), std::move(y), {input, gamma, beta},
      [batch, ch, plane, count, batch_stats, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](detail::Node& self) {
        auto& xn = *self.parents[0];
        auto& gn = *self.parents[1];
        auto& bn = *self.parents[2];
        const double* g = self.grad.data();
        for (std::size_t c = 0; c < ch; ++c) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::size_t n = 0; n < batch; ++n) {
            const std::size_t off = (n * ch + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              sum_g += g[off + i];
              sum_gx += g[off + i] * xhat[off + i];
            }
          }
          if (gn.requires_grad) gn.ensure_grad()[c] += sum_gx;
          if (bn.requires_grad) bn.ensure_grad()[c] += sum_g;
          if (!xn.requires_grad) continue;
          auto& gx = xn.ensure_grad();
          const double k = gn.value[c] * inv_std[c];
          const double mean_g = sum_g / static_cast<double>(count);
          const double mean_gx = sum_gx / static_cast<double>(count);
          for (std::size_t n = 0; n < batch; ++n) {
            const std::size_t off = (n * ch + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              gx[off + i] += batch_stats ? k * (g[off + i] - mean_g -
                                                xhat[off + i] * mean_gx)
                                         : k * g[off + i];
            }
          }
        }
      });
}

Tensor maxpool2d(const Tensor& input, std::size_t window, PoolTail tail) {
  require_rank(input, 4, "maxpool2d input");
  if (window == 0) throw DimensionError("maxpool2d: window must be >= 1");
  const std::size_t batch = input.dim(0), ch = input.dim(1);
  const std::size_t h = input.dim(2), w = input.dim(3);
  if (tail == PoolTail::kReject && (h % window != 0 || w % window != 0))
    throw DimensionError("maxpool2d: extents of " + shape_str(input.shape()) +
                         " not divisible by window " + std::to_string(window));
  const std::size_t oh = h / window, ow = w / window;
  if (oh == 0 || ow == 0)
    throw DimensionError("maxpool2d: window " + std::to_string(window) +
                         " exceeds input " + shape_str(input.shape()));

  const auto x = input.data();
  std::vector<double> y(batch * ch * oh * ow);
  std::vector<std::size_t> argmax(y.size());
  for (std::size_t p = 0; p < batch * ch; ++p) {
    const double* src = x.data() + p * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = (oy * window) * w + ox * window;
        for (std::size_t dy = 0; dy < window; ++dy)
          for (std::size_t dx = 0; dx < window; ++dx) {
            const std::size_t idx = (oy * window + dy) * w + ox * window + dx;
            if (src[idx] > src[best]) best = idx;
          }
        const std::size_t o = (p * oh + oy) * ow + ox;
        y[o] = src[best];
        argmax[o] = p * h * w + best;
      }
  }
  return Tensor::make_result({batch, ch, oh, ow}, std::move(y), {input},
                             [argmax = std::move(argmax)](detail::Node& self) {
                               auto& gx = self.parents[0]->ensure_grad();
                               for (std::size_t o = 0; o < argmax.size(); ++o)
                                 gx[argmax[o]] += self.grad[o];
                             });
}

Tensor softmax_cross_entropy(const Tensor& logits,
                             std::span<const int> labels) {
  require_rank(logits, 2, "softmax_cross_entropy logits");
  const std::size_t batch = logits.dim(0), k = logits.dim(1);
  if (labels.size() != batch)
    throw DimensionError("softmax_cross_entropy: " +
                         std::to_string(labels.size()) + " labels for logits " +
                         shape_str(logits.shape()));
  if (batch == 0) throw DimensionError("softmax_cross_entropy: empty batch");
  for (std::size_t r = 0; r < batch; ++r)
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= k)
      throw IndexError("softmax_cross_entropy: label " +
                       std::to_string(labels[r]) + " outside [0," +
                       std::to_string(k) + ")");

  const auto z = logits.data();
  std::vector<double> prob(z.size());
  double loss = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    const double* row = z.data() + r * k;
    const double mx = *std::max_element(row, row + k);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(row[j] - mx);
    const double lse = mx + std::log(s);
    loss += lse - row[labels[r]];
    for (std::size_t j = 0; j < k; ++j)
      prob[r * k + j] = std::exp(row[j] - lse);
  }
  loss /= static_cast<double>(batch);

  std::vector<int> lab(labels.begin(), labels.end());
  return Tensor::make_result(
      {}, {loss}, {logits},
      [batch, k, prob = std::move(prob), lab = std::move(lab)](
          detail::Node& self) {
        auto& gz = self.parents[0]->ensure_grad();
        const double g = self.grad[0] / static_cast<double>(batch);
        for (std::size_t r = 0; r < batch; ++r)
          for (std::size_t j = 0; j < k; ++j) {
            const double target =
                static_cast<std::size_t>(lab[r]) == j ? 1.0 : 0.0;
            gz[r * k + j] += g * (prob[r * k + j] - target);
          }
      });
}

Tensor relu(const Tensor& x) {
  const auto v = x.data();
  std::vector<double> y(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) y[i] = v[i] > 0.0 ? v[i] : 0.0;
  return Tensor::make_result(x.shape(), std::move(y), {x},
                             [](detail::Node& self) {
                               auto& p = *self.parents[0];
                               auto& gx = p.ensure_grad();
                               for (std::size_t i = 0; i < gx.size(); ++i)
                                 if (p.value[i] > 0.0) gx[i] += self.grad[i];
                             });
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  const auto av = a.data(), bv = b.data();
  std::vector<double> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i];
  return Tensor::make_result(a.shape(), std::move(y), {a, b},
                             [](detail::Node& self) {
                               for (auto& p : self.parents) {
                                 if (!p->requires_grad) continue;
                                 auto& g = p->ensure_grad();
                                 for (std::size_t i = 0; i < g.size(); ++i)
                                   g[i] += self.grad[i];
                               }
                             });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  const auto av = a.data(), bv = b.data();
  std::vector<double> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
  return Tensor::make_result(
      a.shape(), std::move(y), {a, b}, [](detail::Node& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
          auto& g = pa.ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += self.grad[i] * pb.value[i];
        }
        if (pb.requires_grad) {
          auto& g = pb.ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += self.grad[i] * pa.value[i];
        }
      });
}

Tensor scale(const Tensor& x, double factor) {
  const auto v = x.data();
  std::vector<double> y(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) y[i] = v[i] * factor;
  return Tensor::make_result(x.shape(), std::move(y), {x},
                             [factor](detail::Node& self) {
                               auto& g = self.parents[0]->ensure_grad();
                               for (std::size_t i = 0; i < g.size(); ++i)
                                 g[i] += self.grad[i] * factor;
                             });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return Tensor::make_result({}, {s}, {x}, [](detail::Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (auto& gi : g) gi += self.grad[0];
  });
}

Tensor average(std::span<const Tensor> xs) {
  if (xs.empty()) throw ContractError("average of zero tensors");
  for (const auto& x : xs) check_same_shape(xs.front(), x, "average");
  const double inv = 1.0 / static_cast<double>(xs.size());
  std::vector<double> y(xs.front().numel(), 0.0);
  for (const auto& x : xs) {
    const auto v = x.data();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += v[i];
  }
  for (auto& v : y) v *= inv;
  return Tensor::make_result(
      xs.front().shape(), std::move(y), std::vector<Tensor>(xs.begin(), xs.end()),
      [inv](detail::Node& self) {
        for (auto& p : self.parents) {
          if (!p->requires_grad) continue;
          auto& g = p->ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * inv;
        }
      });
}

Tensor flatten(const Tensor& x) {
  if (x.rank() < 1) throw DimensionError("flatten of a scalar");
  const std::size_t batch = x.dim(0);
  const std::size_t rest = batch == 0 ? 0 : x.numel() / batch;
  return x.reshape({batch, rest});
}

}  // namespace spadnn
