#include "stroke/net/layers.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>

extern "C" void openblas_set_num_threads(int);

namespace stroke::net {

void set_blas_threads(int threads) { openblas_set_num_threads(threads); }

namespace {

template <typename T>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, T alpha, const T* a, int lda,
          const T* b, int ldb, T beta, T* c, int ldc);

template <>
void gemm<float>(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a,
                 int lda, const float* b, int ldb, float beta, float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

template <>
void gemm<double>(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a,
                  int lda, const double* b, int ldb, double beta, double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

int conv_out_extent(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

// Column tile budget, in elements (~32 MB of float).
constexpr std::size_t kColBudget = 8u << 20;

// Gathers input windows into col (K x tile_n) for output pixels
// [pix0, pix0 + tile_n).
template <typename T>
void im2col_tile(const T* x, int ci, int h, int w, int kh, int kw, int stride, int pad, int ow,
                 std::size_t pix0, std::size_t tile_n, T* col) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int jc = 0; jc < ci; ++jc) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        T* row = col + ((static_cast<std::size_t>(jc) * kh + ky) * kw + kx) * tile_n;
        for (std::size_t t = 0; t < tile_n; ++t) {
          const std::size_t pix = pix0 + t;
          const int oy = static_cast<int>(pix / ow);
          const int ox = static_cast<int>(pix % ow);
          const int iy = oy * stride + ky - pad;
          const int ix = ox * stride + kx - pad;
          row[t] = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                       ? x[static_cast<std::size_t>(jc) * plane + static_cast<std::size_t>(iy) * w + ix]
                       : T(0);
        }
      }
    }
  }
}

// Scatter-add of a column tile back onto the input gradient.
template <typename T>
void col2im_tile(const T* col, int ci, int h, int w, int kh, int kw, int stride, int pad, int ow,
                 std::size_t pix0, std::size_t tile_n, T* dx) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int jc = 0; jc < ci; ++jc) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const T* row = col + ((static_cast<std::size_t>(jc) * kh + ky) * kw + kx) * tile_n;
        for (std::size_t t = 0; t < tile_n; ++t) {
          const std::size_t pix = pix0 + t;
          const int oy = static_cast<int>(pix / ow);
          const int ox = static_cast<int>(pix % ow);
          const int iy = oy * stride + ky - pad;
          const int ix = ox * stride + kx - pad;
          if (iy >= 0 && iy < h && ix >= 0 && ix < w)
            dx[static_cast<std::size_t>(jc) * plane + static_cast<std::size_t>(iy) * w + ix] += row[t];
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, const Array<T>& weight, const Array<T>& bias,
                          int stride, int pad) {
  if (weight.shape.size() != 4)
    fail(ErrorKind::Shape, "conv weight must be 4-D (out, in, kh, kw)");
  const int co = weight.shape[0], ci = weight.shape[1], kh = weight.shape[2], kw = weight.shape[3];
  if (x.c != ci)
    fail(ErrorKind::Shape, "conv input has " + std::to_string(x.c) + " channels, expected " +
                               std::to_string(ci));
  const int oh = conv_out_extent(x.h, kh, stride, pad);
  const int ow = conv_out_extent(x.w, kw, stride, pad);
  if (oh < 1 || ow < 1) fail(ErrorKind::Shape, "conv output extent collapsed to zero");

  Tensor4<T> y(x.n, co, oh, ow);
  const int k_dim = ci * kh * kw;
  const std::size_t out_pixels = static_cast<std::size_t>(oh) * ow;
  const std::size_t tile =
      std::max<std::size_t>(1, std::min(out_pixels, kColBudget / static_cast<std::size_t>(k_dim)));
  std::vector<T> col(static_cast<std::size_t>(k_dim) * tile);

  for (int i = 0; i < x.n; ++i) {
    for (std::size_t pix0 = 0; pix0 < out_pixels; pix0 += tile) {
      const std::size_t tn = std::min(tile, out_pixels - pix0);
      im2col_tile(x.sample(i), ci, x.h, x.w, kh, kw, stride, pad, ow, pix0, tn, col.data());
      // y_tile (co x tn) = W (co x k) * col (k x tn)
      std::vector<T> ytile(static_cast<std::size_t>(co) * tn);
      gemm<T>(false, false, co, static_cast<int>(tn), k_dim, T(1), weight.v.data(), k_dim,
              col.data(), static_cast<int>(tn), T(0), ytile.data(), static_cast<int>(tn));
      T* ys = y.sample(i);
      for (int jo = 0; jo < co; ++jo) {
        const T b = bias.v.empty() ? T(0) : bias.v[jo];
        const T* src = ytile.data() + static_cast<std::size_t>(jo) * tn;
        T* dst = ys + static_cast<std::size_t>(jo) * out_pixels + pix0;
        for (std::size_t t = 0; t < tn; ++t) dst[t] = src[t] + b;
      }
    }
  }
  return y;
}

template <typename T>
Tensor4<T> conv2d_backward(const Tensor4<T>& x, const Array<T>& weight, const Tensor4<T>& dy,
                           int stride, int pad, Array<T>& dweight, Array<T>& dbias) {
  const int co = weight.shape[0], ci = weight.shape[1], kh = weight.shape[2], kw = weight.shape[3];
  const int k_dim = ci * kh * kw;
  const std::size_t out_pixels = static_cast<std::size_t>(dy.h) * dy.w;
  if (dweight.v.size() != weight.v.size()) dweight = Array<T>::make(weight.shape);
  if (dbias.v.size() != static_cast<std::size_t>(co)) dbias = Array<T>::make({co});

  Tensor4<T> dx(x.n, x.c, x.h, x.w, T(0));
  const std::size_t tile =
      std::max<std::size_t>(1, std::min(out_pixels, kColBudget / static_cast<std::size_t>(k_dim)));
  std::vector<T> col(static_cast<std::size_t>(k_dim) * tile);
  std::vector<T> dcol(static_cast<std::size_t>(k_dim) * tile);
  std::vector<T> dytile(static_cast<std::size_t>(co) * tile);

  for (int i = 0; i < x.n; ++i) {
    const T* dys = dy.sample(i);
    for (std::size_t pix0 = 0; pix0 < out_pixels; pix0 += tile) {
      const std::size_t tn = std::min(tile, out_pixels - pix0);
      for (int jo = 0; jo < co; ++jo) {
        const T* src = dys + static_cast<std::size_t>(jo) * out_pixels + pix0;
        std::copy(src, src + tn, dytile.data() + static_cast<std::size_t>(jo) * tn);
      }
      // Bias gradient.
      for (int jo = 0; jo < co; ++jo) {
        T acc = T(0);
        const T* src = dytile.data() + static_cast<std::size_t>(jo) * tn;
        for (std::size_t t = 0; t < tn; ++t) acc += src[t];
        dbias.v[jo] += acc;
      }
      // Weight gradient: dW (co x k) += dy_tile (co x tn) * col^T (tn x k).
      im2col_tile(x.sample(i), ci, x.h, x.w, kh, kw, stride, pad, dy.w, pix0, tn, col.data());
      gemm<T>(false, true, co, k_dim, static_cast<int>(tn), T(1), dytile.data(),
              static_cast<int>(tn), col.data(), static_cast<int>(tn), T(1), dweight.v.data(),
              k_dim);
      // Input gradient: dcol (k x tn) = W^T (k x co) * dy_tile (co x tn).
      gemm<T>(true, false, k_dim, static_cast<int>(tn), co, T(1), weight.v.data(), k_dim,
              dytile.data(), static_cast<int>(tn), T(0), dcol.data(), static_cast<int>(tn));
      col2im_tile(dcol.data(), ci, x.h, x.w, kh, kw, stride, pad, dy.w, pix0, tn, dx.sample(i));
    }
  }
  return dx;
}

template <typename T>
Tensor4<T> instance_norm_forward(const Tensor4<T>& x, const Array<T>& gamma, const Array<T>& beta,
                                 double epsilon, InstanceNormCache<T>* cache) {
  if (static_cast<int>(gamma.v.size()) != x.c || static_cast<int>(beta.v.size()) != x.c)
    fail(ErrorKind::Shape, "instance norm affine params do not match channel count");
  Tensor4<T> y(x.n, x.c, x.h, x.w);
  if (cache) {
    cache->xhat = Tensor4<T>(x.n, x.c, x.h, x.w);
    cache->inv_std.assign(static_cast<std::size_t>(x.n) * x.c, T(0));
  }
  const std::size_t plane = x.plane();
  for (int i = 0; i < x.n; ++i) {
    for (int j = 0; j < x.c; ++j) {
      const T* src = x.v.data() + (static_cast<std::size_t>(i) * x.c + j) * plane;
      T* dst = y.v.data() + (static_cast<std::size_t>(i) * x.c + j) * plane;
      double mean = 0;
      for (std::size_t t = 0; t < plane; ++t) mean += static_cast<double>(src[t]);
      mean /= static_cast<double>(plane);
      double var = 0;
      for (std::size_t t = 0; t < plane; ++t) {
        const double d = static_cast<double>(src[t]) - mean;
        var += d * d;
      }
      var /= static_cast<double>(plane);
      const T inv_std = static_cast<T>(1.0 / std::sqrt(var + epsilon));
      const T mu = static_cast<T>(mean);
      const T g = gamma.v[j], b = beta.v[j];
      T* xh = cache ? cache->xhat.v.data() + (static_cast<std::size_t>(i) * x.c + j) * plane
                    : nullptr;
      for (std::size_t t = 0; t < plane; ++t) {
        const T xhat = (src[t] - mu) * inv_std;
        if (xh) xh[t] = xhat;
        dst[t] = g * xhat + b;
      }
      if (cache) cache->inv_std[static_cast<std::size_t>(i) * x.c + j] = inv_std;
    }
  }
  return y;
}

template <typename T>
Tensor4<T> instance_norm_backward(const InstanceNormCache<T>& cache, const Array<T>& gamma,
                                  const Tensor4<T>& dy, Array<T>& dgamma, Array<T>& dbeta) {
  const Tensor4<T>& xhat = cache.xhat;
  if (dgamma.v.size() != gamma.v.size()) dgamma = Array<T>::make({static_cast<int>(gamma.v.size())});
  if (dbeta.v.size() != gamma.v.size()) dbeta = Array<T>::make({static_cast<int>(gamma.v.size())});
  Tensor4<T> dx(dy.n, dy.c, dy.h, dy.w);
  const std::size_t plane = dy.plane();
  for (int i = 0; i < dy.n; ++i) {
    for (int j = 0; j < dy.c; ++j) {
      const std::size_t off = (static_cast<std::size_t>(i) * dy.c + j) * plane;
      const T* dyp = dy.v.data() + off;
      const T* xh = xhat.v.data() + off;
      T* dxp = dx.v.data() + off;
      double sum_dy = 0, sum_dy_xhat = 0;
      for (std::size_t t = 0; t < plane; ++t) {
        sum_dy += static_cast<double>(dyp[t]);
        sum_dy_xhat += static_cast<double>(dyp[t]) * static_cast<double>(xh[t]);
      }
      dgamma.v[j] += static_cast<T>(sum_dy_xhat);
      dbeta.v[j] += static_cast<T>(sum_dy);
      const double inv_n = 1.0 / static_cast<double>(plane);
      const double g = static_cast<double>(gamma.v[j]);
      const double istd = static_cast<double>(cache.inv_std[static_cast<std::size_t>(i) * dy.c + j]);
      const double mean_dy = sum_dy * inv_n;
      const double mean_dy_xhat = sum_dy_xhat * inv_n;
      for (std::size_t t = 0; t < plane; ++t) {
        const double centered = static_cast<double>(dyp[t]) - mean_dy -
                                static_cast<double>(xh[t]) * mean_dy_xhat;
        dxp[t] = static_cast<T>(g * istd * centered);
      }
    }
  }
  return dx;
}

template <typename T>
Tensor4<T> leaky_relu_forward(const Tensor4<T>& x, double negative_slope) {
  Tensor4<T> y(x.n, x.c, x.h, x.w);
  const T a = static_cast<T>(negative_slope);
  for (std::size_t t = 0; t < x.v.size(); ++t) y.v[t] = x.v[t] >= T(0) ? x.v[t] : a * x.v[t];
  return y;
}

template <typename T>
Tensor4<T> leaky_relu_backward(const Tensor4<T>& x, const Tensor4<T>& dy, double negative_slope) {
  Tensor4<T> dx(dy.n, dy.c, dy.h, dy.w);
  const T a = static_cast<T>(negative_slope);
  for (std::size_t t = 0; t < dy.v.size(); ++t)
    dx.v[t] = x.v[t] >= T(0) ? dy.v[t] : a * dy.v[t];
  return dx;
}

template <typename T>
Tensor4<T> upconv2x_forward(const Tensor4<T>& x, const Array<T>& weight, const Array<T>& bias) {
  const int ci = weight.shape[0], co = weight.shape[1];
  if (x.c != ci) fail(ErrorKind::Shape, "upconv input channel mismatch");
  Tensor4<T> y(x.n, co, x.h * 2, x.w * 2);
  const std::size_t in_plane = x.plane();
  const int co4 = co * 4;
  std::vector<T> g(static_cast<std::size_t>(co4) * in_plane);
  for (int i = 0; i < x.n; ++i) {
    // g (co*4 x hw) = W^T (co*4 x ci) * x (ci x hw)
    gemm<T>(true, false, co4, static_cast<int>(in_plane), ci, T(1), weight.v.data(), co4,
            x.sample(i), static_cast<int>(in_plane), T(0), g.data(), static_cast<int>(in_plane));
    T* ys = y.sample(i);
    const std::size_t out_plane = y.plane();
    for (int jo = 0; jo < co; ++jo) {
      const T b = bias.v.empty() ? T(0) : bias.v[jo];
      for (int ky = 0; ky < 2; ++ky)
        for (int kx = 0; kx < 2; ++kx) {
          const T* src = g.data() + ((static_cast<std::size_t>(jo) * 2 + ky) * 2 + kx) * in_plane;
          for (int yy = 0; yy < x.h; ++yy) {
            T* dst = ys + static_cast<std::size_t>(jo) * out_plane +
                     (static_cast<std::size_t>(yy) * 2 + ky) * y.w + kx;
            const T* s = src + static_cast<std::size_t>(yy) * x.w;
            for (int xx = 0; xx < x.w; ++xx) dst[2 * xx] = s[xx] + b;
          }
        }
    }
  }
  return y;
}

template <typename T>
Tensor4<T> upconv2x_backward(const Tensor4<T>& x, const Array<T>& weight, const Tensor4<T>& dy,
                             Array<T>& dweight, Array<T>& dbias) {
  const int ci = weight.shape[0], co = weight.shape[1];
  const int co4 = co * 4;
  if (dweight.v.size() != weight.v.size()) dweight = Array<T>::make(weight.shape);
  if (dbias.v.size() != static_cast<std::size_t>(co)) dbias = Array<T>::make({co});

  Tensor4<T> dx(x.n, ci, x.h, x.w);
  const std::size_t in_plane = x.plane();
  const std::size_t out_plane = dy.plane();
  std::vector<T> dg(static_cast<std::size_t>(co4) * in_plane);
  for (int i = 0; i < x.n; ++i) {
    const T* dys = dy.sample(i);
    for (int jo = 0; jo < co; ++jo) {
      T bacc = T(0);
      for (std::size_t t = 0; t < out_plane; ++t)
        bacc += dys[static_cast<std::size_t>(jo) * out_plane + t];
      dbias.v[jo] += bacc;
      for (int ky = 0; ky < 2; ++ky)
        for (int kx = 0; kx < 2; ++kx) {
          T* dst = dg.data() + ((static_cast<std::size_t>(jo) * 2 + ky) * 2 + kx) * in_plane;
          for (int yy = 0; yy < x.h; ++yy) {
            const T* s = dys + static_cast<std::size_t>(jo) * out_plane +
                         (static_cast<std::size_t>(yy) * 2 + ky) * dy.w + kx;
            T* d = dst + static_cast<std::size_t>(yy) * x.w;
            for (int xx = 0; xx < x.w; ++xx) d[xx] = s[2 * xx];
          }
        }
    }
    // dW (ci x co*4) += x (ci x hw) * dg^T (hw x co*4)
    gemm<T>(false, true, ci, co4, static_cast<int>(in_plane), T(1), x.sample(i),
            static_cast<int>(in_plane), dg.data(), static_cast<int>(in_plane), T(1),
            dweight.v.data(), co4);
    // dx (ci x hw) = W (ci x co*4) * dg (co*4 x hw)
    gemm<T>(false, false, ci, static_cast<int>(in_plane), co4, T(1), weight.v.data(), co4,
            dg.data(), static_cast<int>(in_plane), T(0), dx.sample(i),
            static_cast<int>(in_plane));
  }
  return dx;
}

template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b) {
  if (a.n != b.n || a.h != b.h || a.w != b.w)
    fail(ErrorKind::Shape, "concat operands must agree on batch and spatial extents");
  Tensor4<T> y(a.n, a.c + b.c, a.h, a.w);
  const std::size_t plane = a.plane();
  for (int i = 0; i < a.n; ++i) {
    std::copy(a.sample(i), a.sample(i) + static_cast<std::size_t>(a.c) * plane,
              y.sample(i));
    std::copy(b.sample(i), b.sample(i) + static_cast<std::size_t>(b.c) * plane,
              y.sample(i) + static_cast<std::size_t>(a.c) * plane);
  }
  return y;
}

template <typename T>
void split_channels(const Tensor4<T>& dy, int c_first, Tensor4<T>& da, Tensor4<T>& db) {
  da = Tensor4<T>(dy.n, c_first, dy.h, dy.w);
  db = Tensor4<T>(dy.n, dy.c - c_first, dy.h, dy.w);
  const std::size_t plane = dy.plane();
  for (int i = 0; i < dy.n; ++i) {
    std::copy(dy.sample(i), dy.sample(i) + static_cast<std::size_t>(c_first) * plane,
              da.sample(i));
    std::copy(dy.sample(i) + static_cast<std::size_t>(c_first) * plane,
              dy.sample(i) + static_cast<std::size_t>(dy.c) * plane, db.sample(i));
  }
}

template <typename T>
Tensor4<T> softmax_channel(const Tensor4<T>& logits) {
  Tensor4<T> p(logits.n, logits.c, logits.h, logits.w);
  const std::size_t plane = logits.plane();
  for (int i = 0; i < logits.n; ++i) {
    const T* src = logits.sample(i);
    T* dst = p.sample(i);
    for (std::size_t t = 0; t < plane; ++t) {
      T m = src[t];
      for (int j = 1; j < logits.c; ++j) m = std::max(m, src[static_cast<std::size_t>(j) * plane + t]);
      T denom = T(0);
      for (int j = 0; j < logits.c; ++j) {
        const T e = std::exp(src[static_cast<std::size_t>(j) * plane + t] - m);
        dst[static_cast<std::size_t>(j) * plane + t] = e;
        denom += e;
      }
      for (int j = 0; j < logits.c; ++j) dst[static_cast<std::size_t>(j) * plane + t] /= denom;
    }
  }
  return p;
}

template <typename T>
Tensor4<std::uint8_t> argmax_channel(const Tensor4<T>& scores) {
  Tensor4<std::uint8_t> out(scores.n, 1, scores.h, scores.w);
  const std::size_t plane = scores.plane();
  for (int i = 0; i < scores.n; ++i) {
    const T* src = scores.sample(i);
    std::uint8_t* dst = out.sample(i);
    for (std::size_t t = 0; t < plane; ++t) {
      int best = 0;
      T best_v = src[t];
      for (int j = 1; j < scores.c; ++j) {
        const T v = src[static_cast<std::size_t>(j) * plane + t];
        if (v > best_v) {
          best_v = v;
          best = j;
        }
      }
      dst[t] = static_cast<std::uint8_t>(best);
    }
  }
  return out;
}

#define STROKE_INSTANTIATE_LAYERS(T)                                                              \
  template Tensor4<T> conv2d_forward<T>(const Tensor4<T>&, const Array<T>&, const Array<T>&,      \
                                        int, int);                                               \
  template Tensor4<T> conv2d_backward<T>(const Tensor4<T>&, const Array<T>&, const Tensor4<T>&,  \
                                         int, int, Array<T>&, Array<T>&);                        \
  template Tensor4<T> instance_norm_forward<T>(const Tensor4<T>&, const Array<T>&,               \
                                               const Array<T>&, double, InstanceNormCache<T>*);  \
  template Tensor4<T> instance_norm_backward<T>(const InstanceNormCache<T>&, const Array<T>&,    \
                                                const Tensor4<T>&, Array<T>&, Array<T>&);        \
  template Tensor4<T> leaky_relu_forward<T>(const Tensor4<T>&, double);                          \
  template Tensor4<T> leaky_relu_backward<T>(const Tensor4<T>&, const Tensor4<T>&, double);      \
  template Tensor4<T> upconv2x_forward<T>(const Tensor4<T>&, const Array<T>&, const Array<T>&);  \
  template Tensor4<T> upconv2x_backward<T>(const Tensor4<T>&, const Array<T>&,                   \
                                           const Tensor4<T>&, Array<T>&, Array<T>&);             \
  template Tensor4<T> concat_channels<T>(const Tensor4<T>&, const Tensor4<T>&);                  \
  template void split_channels<T>(const Tensor4<T>&, int, Tensor4<T>&, Tensor4<T>&);             \
  template Tensor4<T> softmax_channel<T>(const Tensor4<T>&);                                     \
  template Tensor4<std::uint8_t> argmax_channel<T>(const Tensor4<T>&);

STROKE_INSTANTIATE_LAYERS(float)
STROKE_INSTANTIATE_LAYERS(double)

}  // namespace stroke::net
