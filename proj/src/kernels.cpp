#include "sprout/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "gemm.hpp"
#include "sprout/parallel.hpp"

namespace sprout {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::relu: return "relu";
    case Activation::relu6: return "relu6";
    case Activation::softmax: return "softmax";
  }
  return "?";
}

std::size_t conv_out_extent(std::size_t in, std::size_t pad_total, std::size_t kernel,
                            std::size_t stride) {
  if (stride == 0) throw ValueError("stride must be >= 1");
  if (in + pad_total < kernel) {
    throw DimensionError("window of " + std::to_string(kernel) + " does not fit extent " +
                         std::to_string(in) + " with padding " + std::to_string(pad_total));
  }
  return (in + pad_total - kernel) / stride + 1;
}

namespace {

struct Geometry {
  std::size_t n, h, w, c;
  std::size_t kh, kw;
  std::size_t oh, ow;
  std::size_t stride;
  Padding pad;
};

void require_rank(const Shape& s, std::size_t rank, const char* what) {
  if (s.size() != rank) {
    throw DimensionError(std::string(what) + " expects rank " + std::to_string(rank) + ", got " +
                         shape_str(s));
  }
}

template <typename T>
Geometry conv_geometry(const Tensor<T>& x, std::size_t kh, std::size_t kw, std::size_t stride,
                       const Padding& pad) {
  require_rank(x.shape(), 4, "convolution input");
  Geometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), kh, kw, 0, 0, stride, pad};
  g.oh = conv_out_extent(g.h, pad.top + pad.bottom, kh, stride);
  g.ow = conv_out_extent(g.w, pad.left + pad.right, kw, stride);
  return g;
}

// Source row/col for output position o and kernel tap t; negative or past the
// edge means the tap lands in zero padding.
inline long src_coord(std::size_t o, std::size_t t, std::size_t stride, std::size_t pad_before) {
  return static_cast<long>(o * stride + t) - static_cast<long>(pad_before);
}

template <typename T>
std::vector<T> im2col(const Tensor<T>& x, const Geometry& g) {
  const std::size_t k = g.kh * g.kw * g.c;
  std::vector<T> cols(g.n * g.oh * g.ow * k, T(0));
  const T* src = x.raw();
  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t oy = 0; oy < g.oh; ++oy)
      for (std::size_t ox = 0; ox < g.ow; ++ox) {
        T* row = cols.data() + ((n * g.oh + oy) * g.ow + ox) * k;
        for (std::size_t i = 0; i < g.kh; ++i) {
          const long iy = src_coord(oy, i, g.stride, g.pad.top);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          for (std::size_t j = 0; j < g.kw; ++j) {
            const long ix = src_coord(ox, j, g.stride, g.pad.left);
            if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
            const T* px = src + ((n * g.h + iy) * g.w + ix) * g.c;
            std::copy(px, px + g.c, row + (i * g.kw + j) * g.c);
          }
        }
      }
  return cols;
}

template <typename T>
void col2im_add(const std::vector<T>& cols, const Geometry& g, T* dx) {
  const std::size_t k = g.kh * g.kw * g.c;
  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t oy = 0; oy < g.oh; ++oy)
      for (std::size_t ox = 0; ox < g.ow; ++ox) {
        const T* row = cols.data() + ((n * g.oh + oy) * g.ow + ox) * k;
        for (std::size_t i = 0; i < g.kh; ++i) {
          const long iy = src_coord(oy, i, g.stride, g.pad.top);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          for (std::size_t j = 0; j < g.kw; ++j) {
            const long ix = src_coord(ox, j, g.stride, g.pad.left);
            if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
            T* px = dx + ((n * g.h + iy) * g.w + ix) * g.c;
            const T* r = row + (i * g.kw + j) * g.c;
            for (std::size_t c = 0; c < g.c; ++c) px[c] += r[c];
          }
        }
      }
}

bool is_pointwise(const Geometry& g) {
  return g.kh == 1 && g.kw == 1 && g.stride == 1 && g.pad.is_zero();
}

}  // namespace

template <typename T>
Tensor<T> zero_pad_forward(const Tensor<T>& x, const Padding& pad) {
  require_rank(x.shape(), 4, "zero padding input");
  const std::size_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const std::size_t oh = h + pad.top + pad.bottom, ow = w + pad.left + pad.right;
  Tensor<T> y({n, oh, ow, c});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t i = 0; i < h; ++i) {
      const T* src = x.raw() + (b * h + i) * w * c;
      T* dst = y.raw() + ((b * oh + i + pad.top) * ow + pad.left) * c;
      std::copy(src, src + w * c, dst);
    }
  return y;
}

template <typename T>
Tensor<T> zero_pad_backward(const Tensor<T>& dy, const Padding& pad) {
  require_rank(dy.shape(), 4, "zero padding gradient");
  const std::size_t n = dy.dim(0), oh = dy.dim(1), ow = dy.dim(2), c = dy.dim(3);
  if (oh <= pad.top + pad.bottom || ow <= pad.left + pad.right) {
    throw DimensionError("padding gradient " + shape_str(dy.shape()) + " smaller than padding");
  }
  const std::size_t h = oh - pad.top - pad.bottom, w = ow - pad.left - pad.right;
  Tensor<T> dx({n, h, w, c});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t i = 0; i < h; ++i) {
      const T* src = dy.raw() + ((b * oh + i + pad.top) * ow + pad.left) * c;
      std::copy(src, src + w * c, dx.raw() + (b * h + i) * w * c);
    }
  return dx;
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& kernel, std::size_t stride,
                         const Padding& pad) {
  require_rank(kernel.shape(), 4, "conv2d kernel");
  if (x.rank() == 4 && kernel.dim(2) != x.dim(3)) {
    throw DimensionError("conv2d channel mismatch: input " + shape_str(x.shape()) + " vs kernel " +
                         shape_str(kernel.shape()));
  }
  const Geometry g = conv_geometry(x, kernel.dim(0), kernel.dim(1), stride, pad);
  const std::size_t f = kernel.dim(3);
  const std::size_t m = g.n * g.oh * g.ow;
  const std::size_t k = g.kh * g.kw * g.c;
  Tensor<T> y({g.n, g.oh, g.ow, f});
  if (is_pointwise(g)) {
    detail::gemm(m, k, f, x.raw(), kernel.raw(), y.raw(), false);
  } else {
    const std::vector<T> cols = im2col(x, g);
    detail::gemm(m, k, f, cols.data(), kernel.raw(), y.raw(), false);
  }
  return y;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& dy,
                             std::size_t stride, const Padding& pad, bool need_input_grad,
                             bool need_kernel_grad) {
  const Geometry g = conv_geometry(x, kernel.dim(0), kernel.dim(1), stride, pad);
  const std::size_t f = kernel.dim(3);
  const std::size_t m = g.n * g.oh * g.ow;
  const std::size_t k = g.kh * g.kw * g.c;
  if (dy.shape() != Shape{g.n, g.oh, g.ow, f}) {
    throw DimensionError("conv2d gradient shape " + shape_str(dy.shape()) + " does not match " +
                         shape_str({g.n, g.oh, g.ow, f}));
  }
  ConvGrads<T> out;
  const bool pointwise = is_pointwise(g);
  if (need_kernel_grad) {
    out.kernel = Tensor<T>(kernel.shape());
    if (pointwise) {
      detail::gemm_tn(m, k, f, x.raw(), dy.raw(), out.kernel.raw(), false);
    } else {
      const std::vector<T> cols = im2col(x, g);
      detail::gemm_tn(m, k, f, cols.data(), dy.raw(), out.kernel.raw(), false);
    }
  }
  if (need_input_grad) {
    std::vector<T> kt(k * f);
    detail::transpose(k, f, kernel.raw(), kt.data());
    out.input = Tensor<T>(x.shape());
    if (pointwise) {
      detail::gemm(m, f, k, dy.raw(), kt.data(), out.input.raw(), false);
    } else {
      std::vector<T> dcols(m * k);
      detail::gemm(m, f, k, dy.raw(), kt.data(), dcols.data(), false);
      col2im_add(dcols, g, out.input.raw());
    }
  }
  return out;
}

template <typename T>
Tensor<T> depthwise_conv2d_forward(const Tensor<T>& x, const Tensor<T>& kernel,
                                   std::size_t stride, const Padding& pad) {
  require_rank(kernel.shape(), 3, "depthwise kernel");
  if (x.rank() == 4 && kernel.dim(2) != x.dim(3)) {
    throw DimensionError("depthwise channel mismatch: input " + shape_str(x.shape()) +
                         " vs kernel " + shape_str(kernel.shape()));
  }
  const Geometry g = conv_geometry(x, kernel.dim(0), kernel.dim(1), stride, pad);
  Tensor<T> y({g.n, g.oh, g.ow, g.c});
  const T* src = x.raw();
  const T* kr = kernel.raw();
  T* dst = y.raw();
  parallel_for(g.n, [&](std::size_t b0, std::size_t b1) {
    for (std::size_t n = b0; n < b1; ++n)
      for (std::size_t oy = 0; oy < g.oh; ++oy)
        for (std::size_t ox = 0; ox < g.ow; ++ox) {
          T* out = dst + ((n * g.oh + oy) * g.ow + ox) * g.c;
          for (std::size_t i = 0; i < g.kh; ++i) {
            const long iy = src_coord(oy, i, g.stride, g.pad.top);
            if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
            for (std::size_t j = 0; j < g.kw; ++j) {
              const long ix = src_coord(ox, j, g.stride, g.pad.left);
              if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
              const T* px = src + ((n * g.h + iy) * g.w + ix) * g.c;
              const T* kv = kr + (i * g.kw + j) * g.c;
              for (std::size_t c = 0; c < g.c; ++c) out[c] += px[c] * kv[c];
            }
          }
        }
  });
  return y;
}

template <typename T>
ConvGrads<T> depthwise_conv2d_backward(const Tensor<T>& x, const Tensor<T>& kernel,
                                       const Tensor<T>& dy, std::size_t stride,
                                       const Padding& pad, bool need_input_grad,
                                       bool need_kernel_grad) {
  const Geometry g = conv_geometry(x, kernel.dim(0), kernel.dim(1), stride, pad);
  if (dy.shape() != Shape{g.n, g.oh, g.ow, g.c}) {
    throw DimensionError("depthwise gradient shape " + shape_str(dy.shape()) +
                         " does not match " + shape_str({g.n, g.oh, g.ow, g.c}));
  }
  ConvGrads<T> out;
  if (need_kernel_grad) out.kernel = Tensor<T>(kernel.shape());
  if (need_input_grad) out.input = Tensor<T>(x.shape());
  const T* src = x.raw();
  const T* kr = kernel.raw();
  const T* gy = dy.raw();
  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t oy = 0; oy < g.oh; ++oy)
      for (std::size_t ox = 0; ox < g.ow; ++ox) {
        const T* d = gy + ((n * g.oh + oy) * g.ow + ox) * g.c;
        for (std::size_t i = 0; i < g.kh; ++i) {
          const long iy = src_coord(oy, i, g.stride, g.pad.top);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          for (std::size_t j = 0; j < g.kw; ++j) {
            const long ix = src_coord(ox, j, g.stride, g.pad.left);
            if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
            const std::size_t off = ((n * g.h + iy) * g.w + ix) * g.c;
            const std::size_t koff = (i * g.kw + j) * g.c;
            if (need_kernel_grad) {
              T* dk = out.kernel.raw() + koff;
              const T* px = src + off;
              for (std::size_t c = 0; c < g.c; ++c) dk[c] += px[c] * d[c];
            }
            if (need_input_grad) {
              T* dx = out.input.raw() + off;
              const T* kv = kr + koff;
              for (std::size_t c = 0; c < g.c; ++c) dx[c] += d[c] * kv[c];
            }
          }
        }
      }
  return out;
}

template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                            Tensor<T>& moving_mean, Tensor<T>& moving_var, Mode mode,
                            double momentum, double epsilon, BatchNormCache<T>* cache) {
  if (x.empty()) throw ValueError("batch normalization of an empty batch");
  const std::size_t c = x.shape().back();
  for (const Tensor<T>* p : std::initializer_list<const Tensor<T>*>{&gamma, &beta, &moving_mean, &moving_var}) {
    if (p->size() != c) {
      throw DimensionError("batchnorm parameter " + shape_str(p->shape()) + " does not match " +
                           std::to_string(c) + " channels of " + shape_str(x.shape()));
    }
  }
  const std::size_t m = x.size() / c;
  std::vector<T> mean(c), inv_std(c);
  if (mode == Mode::train) {
    std::vector<double> sum(c, 0.0), sq(c, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
      const T* row = x.raw() + r * c;
      for (std::size_t ch = 0; ch < c; ++ch) sum[ch] += row[ch];
    }
    for (std::size_t ch = 0; ch < c; ++ch) sum[ch] /= static_cast<double>(m);
    for (std::size_t r = 0; r < m; ++r) {
      const T* row = x.raw() + r * c;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double d = row[ch] - sum[ch];
        sq[ch] += d * d;
      }
    }
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double var = sq[ch] / static_cast<double>(m);
      mean[ch] = static_cast<T>(sum[ch]);
      inv_std[ch] = static_cast<T>(1.0 / std::sqrt(var + epsilon));
      moving_mean[ch] = static_cast<T>(momentum * moving_mean[ch] + (1.0 - momentum) * sum[ch]);
      moving_var[ch] = static_cast<T>(momentum * moving_var[ch] + (1.0 - momentum) * var);
    }
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      mean[ch] = moving_mean[ch];
      inv_std[ch] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(moving_var[ch]) + epsilon));
    }
  }
  Tensor<T> y(x.shape());
  Tensor<T> normalized;
  if (cache) normalized = Tensor<T>(x.shape());
  for (std::size_t r = 0; r < m; ++r) {
    const T* row = x.raw() + r * c;
    T* out = y.raw() + r * c;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T xhat = (row[ch] - mean[ch]) * inv_std[ch];
      out[ch] = gamma[ch] * xhat + beta[ch];
      if (cache) normalized[r * c + ch] = xhat;
    }
  }
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
    cache->mode = mode;
  }
  return y;
}

template <typename T>
BatchNormGrads<T> batchnorm_backward(const Tensor<T>& dy, const Tensor<T>& gamma,
                                     const BatchNormCache<T>& cache) {
  const Tensor<T>& xhat = cache.normalized;
  if (dy.shape() != xhat.shape()) {
    throw DimensionError("batchnorm gradient " + shape_str(dy.shape()) + " does not match " +
                         shape_str(xhat.shape()));
  }
  const std::size_t c = gamma.size();
  const std::size_t m = dy.size() / c;
  BatchNormGrads<T> g{Tensor<T>(dy.shape()), Tensor<T>(gamma.shape()), Tensor<T>(gamma.shape())};
  std::vector<double> dgamma(c, 0.0), dbeta(c, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    const T* d = dy.raw() + r * c;
    const T* xh = xhat.raw() + r * c;
    for (std::size_t ch = 0; ch < c; ++ch) {
      dgamma[ch] += static_cast<double>(d[ch]) * xh[ch];
      dbeta[ch] += d[ch];
    }
  }
  for (std::size_t ch = 0; ch < c; ++ch) {
    g.gamma[ch] = static_cast<T>(dgamma[ch]);
    g.beta[ch] = static_cast<T>(dbeta[ch]);
  }
  if (cache.mode == Mode::train) {
    // dx = inv_std / M * (M*dxhat - sum(dxhat) - xhat * sum(dxhat * xhat)),
    // with dxhat = gamma * dy the sums reduce to gamma * dbeta and gamma * dgamma.
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t r = 0; r < m; ++r) {
      const T* d = dy.raw() + r * c;
      const T* xh = xhat.raw() + r * c;
      T* dx = g.input.raw() + r * c;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double v = static_cast<double>(gamma[ch]) * cache.inv_std[ch] *
                         (d[ch] - inv_m * dbeta[ch] - inv_m * xh[ch] * dgamma[ch]);
        dx[ch] = static_cast<T>(v);
      }
    }
  } else {
    for (std::size_t r = 0; r < m; ++r) {
      const T* d = dy.raw() + r * c;
      T* dx = g.input.raw() + r * c;
      for (std::size_t ch = 0; ch < c; ++ch) dx[ch] = d[ch] * gamma[ch] * cache.inv_std[ch];
    }
  }
  return g;
}

template <typename T>
Tensor<T> activation_forward(const Tensor<T>& x, Activation kind) {
  Tensor<T> y(x.shape());
  const std::size_t n = x.size();
  switch (kind) {
    case Activation::linear:
      return x;
    case Activation::relu:
      for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
      return y;
    case Activation::relu6:
      for (std::size_t i = 0; i < n; ++i) y[i] = std::min(std::max(x[i], T(0)), T(6));
      return y;
    case Activation::softmax: {
      const std::size_t k = x.shape().back();
      for (std::size_t r = 0; r < n / k; ++r) {
        const T* in = x.raw() + r * k;
        T* out = y.raw() + r * k;
        const T mx = *std::max_element(in, in + k);
        double total = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
          out[j] = static_cast<T>(std::exp(static_cast<double>(in[j] - mx)));
          total += out[j];
        }
        for (std::size_t j = 0; j < k; ++j) out[j] = static_cast<T>(out[j] / total);
      }
      return y;
    }
  }
  return y;
}

template <typename T>
Tensor<T> activation_backward(const Tensor<T>& y, const Tensor<T>& dy, Activation kind) {
  if (y.shape() != dy.shape()) {
    throw DimensionError("activation gradient " + shape_str(dy.shape()) + " does not match " +
                         shape_str(y.shape()));
  }
  Tensor<T> dx(y.shape());
  const std::size_t n = y.size();
  switch (kind) {
    case Activation::linear:
      return dy;
    case Activation::relu:
      for (std::size_t i = 0; i < n; ++i) dx[i] = y[i] > T(0) ? dy[i] : T(0);
      return dx;
    case Activation::relu6:
      for (std::size_t i = 0; i < n; ++i) dx[i] = (y[i] > T(0) && y[i] < T(6)) ? dy[i] : T(0);
      return dx;
    case Activation::softmax: {
      const std::size_t k = y.shape().back();
      for (std::size_t r = 0; r < n / k; ++r) {
        const T* p = y.raw() + r * k;
        const T* d = dy.raw() + r * k;
        double dot = 0.0;
        for (std::size_t j = 0; j < k; ++j) dot += static_cast<double>(p[j]) * d[j];
        for (std::size_t j = 0; j < k; ++j) dx[r * k + j] = static_cast<T>(p[j] * (d[j] - dot));
      }
      return dx;
    }
  }
  return dx;
}

template <typename T>
Tensor<T> global_avg_pool_forward(const Tensor<T>& x) {
  require_rank(x.shape(), 4, "global average pooling input");
  const std::size_t n = x.dim(0), hw = x.dim(1) * x.dim(2), c = x.dim(3);
  Tensor<T> y({n, c});
  std::vector<double> acc(c);
  for (std::size_t b = 0; b < n; ++b) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t p = 0; p < hw; ++p) {
      const T* row = x.raw() + (b * hw + p) * c;
      for (std::size_t ch = 0; ch < c; ++ch) acc[ch] += row[ch];
    }
    for (std::size_t ch = 0; ch < c; ++ch) y[b * c + ch] = static_cast<T>(acc[ch] / hw);
  }
  return y;
}

template <typename T>
Tensor<T> global_avg_pool_backward(const Tensor<T>& dy, const Shape& input_shape) {
  require_rank(input_shape, 4, "global average pooling input");
  const std::size_t n = input_shape[0], hw = input_shape[1] * input_shape[2], c = input_shape[3];
  if (dy.shape() != Shape{n, c}) {
    throw DimensionError("pooling gradient " + shape_str(dy.shape()) + " does not match " +
                         shape_str({n, c}));
  }
  Tensor<T> dx(input_shape);
  const T scale = T(1) / static_cast<T>(hw);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t p = 0; p < hw; ++p) {
      T* row = dx.raw() + (b * hw + p) * c;
      for (std::size_t ch = 0; ch < c; ++ch) row[ch] = dy[b * c + ch] * scale;
    }
  return dx;
}

template <typename T>
Tensor<T> dropout_forward(const Tensor<T>& x, double rate, Mode mode, Rng& rng,
                          std::vector<T>* mask) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ValueError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (mode == Mode::inference || rate == 0.0) {
    if (mask) mask->assign(x.size(), T(1));
    return x;
  }
  std::vector<T> local;
  std::vector<T>& m = mask ? *mask : local;
  m.resize(x.size());
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  for (std::size_t i = 0; i < x.size(); ++i) m[i] = rng.uniform() < rate ? T(0) : keep_scale;
  return dropout_apply_mask(x, m);
}

template <typename T>
Tensor<T> dropout_apply_mask(const Tensor<T>& x, const std::vector<T>& mask) {
  if (mask.size() != x.size()) {
    throw DimensionError("dropout mask of " + std::to_string(mask.size()) +
                         " elements for tensor " + shape_str(x.shape()));
  }
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * mask[i];
  return y;
}

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  if (x.rank() != 2 || weight.rank() != 2 || x.dim(1) != weight.dim(0) ||
      bias.size() != weight.dim(1)) {
    throw DimensionError("dense shape mismatch: input " + shape_str(x.shape()) + ", weight " +
                         shape_str(weight.shape()) + ", bias " + shape_str(bias.shape()));
  }
  const std::size_t n = x.dim(0), d = x.dim(1), u = weight.dim(1);
  Tensor<T> y({n, u});
  for (std::size_t r = 0; r < n; ++r) std::copy(bias.raw(), bias.raw() + u, y.raw() + r * u);
  detail::gemm(n, d, u, x.raw(), weight.raw(), y.raw(), true);
  return y;
}

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& dy,
                             bool need_input_grad, bool need_param_grads) {
  const std::size_t n = x.dim(0), d = x.dim(1), u = weight.dim(1);
  if (dy.shape() != Shape{n, u}) {
    throw DimensionError("dense gradient " + shape_str(dy.shape()) + " does not match " +
                         shape_str({n, u}));
  }
  DenseGrads<T> g;
  if (need_param_grads) {
    g.weight = Tensor<T>(weight.shape());
    detail::gemm_tn(n, d, u, x.raw(), dy.raw(), g.weight.raw(), false);
    g.bias = Tensor<T>({u});
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < u; ++j) g.bias[j] += dy[r * u + j];
  }
  if (need_input_grad) {
    std::vector<T> wt(d * u);
    detail::transpose(d, u, weight.raw(), wt.data());
    g.input = Tensor<T>(x.shape());
    detail::gemm(n, u, d, dy.raw(), wt.data(), g.input.raw(), false);
  }
  return g;
}

#define SPROUT_INSTANTIATE_KERNELS(T)                                                          \
  template Tensor<T> zero_pad_forward(const Tensor<T>&, const Padding&);                       \
  template Tensor<T> zero_pad_backward(const Tensor<T>&, const Padding&);                      \
  template Tensor<T> conv2d_forward(const Tensor<T>&, const Tensor<T>&, std::size_t,           \
                                    const Padding&);                                           \
  template ConvGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,  \
                                        std::size_t, const Padding&, bool, bool);              \
  template Tensor<T> depthwise_conv2d_forward(const Tensor<T>&, const Tensor<T>&, std::size_t, \
                                              const Padding&);                                 \
  template ConvGrads<T> depthwise_conv2d_backward(const Tensor<T>&, const Tensor<T>&,          \
                                                  const Tensor<T>&, std::size_t,               \
                                                  const Padding&, bool, bool);                 \
  template Tensor<T> batchnorm_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,   \
                                       Tensor<T>&, Tensor<T>&, Mode, double, double,           \
                                       BatchNormCache<T>*);                                    \
  template BatchNormGrads<T> batchnorm_backward(const Tensor<T>&, const Tensor<T>&,            \
                                                const BatchNormCache<T>&);                     \
  template Tensor<T> activation_forward(const Tensor<T>&, Activation);                         \
  template Tensor<T> activation_backward(const Tensor<T>&, const Tensor<T>&, Activation);      \
  template Tensor<T> global_avg_pool_forward(const Tensor<T>&);                                \
  template Tensor<T> global_avg_pool_backward(const Tensor<T>&, const Shape&);                 \
  template Tensor<T> dropout_forward(const Tensor<T>&, double, Mode, Rng&, std::vector<T>*);   \
  template Tensor<T> dropout_apply_mask(const Tensor<T>&, const std::vector<T>&);              \
  template Tensor<T> dense_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);      \
  template DenseGrads<T> dense_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,  \
                                        bool, bool);

SPROUT_INSTANTIATE_KERNELS(float)
SPROUT_INSTANTIATE_KERNELS(double)

#undef SPROUT_INSTANTIATE_KERNELS

}  // namespace sprout
