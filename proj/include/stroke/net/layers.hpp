#pragma once

#include <optional>

#include "stroke/net/tensor.hpp"

namespace stroke::net {

// Caps BLAS threading; forward results are bit-identical across runs for a
// fixed thread count.
void set_blas_threads(int threads);

// -- 2-D convolution (zero padding), im2col + GEMM, spatially tiled ---------

template <typename T>
struct ConvSpec {
  int stride = 1;
  int pad = 0;
};

template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, const Array<T>& weight, const Array<T>& bias,
                          int stride, int pad);

// dW/db are accumulated into grads; returns dX.
template <typename T>
Tensor4<T> conv2d_backward(const Tensor4<T>& x, const Array<T>& weight, const Tensor4<T>& dy,
                           int stride, int pad, Array<T>& dweight, Array<T>& dbias);

// -- Instance normalization (per sample, per channel over the plane) --------

template <typename T>
struct InstanceNormCache {
  Tensor4<T> xhat;            // normalized pre-affine activations
  std::vector<T> inv_std;     // one per (sample, channel)
};

template <typename T>
Tensor4<T> instance_norm_forward(const Tensor4<T>& x, const Array<T>& gamma, const Array<T>& beta,
                                 double epsilon, InstanceNormCache<T>* cache);

template <typename T>
Tensor4<T> instance_norm_backward(const InstanceNormCache<T>& cache, const Array<T>& gamma,
                                  const Tensor4<T>& dy, Array<T>& dgamma, Array<T>& dbeta);

// -- Leaky rectifier ---------------------------------------------------------

template <typename T>
Tensor4<T> leaky_relu_forward(const Tensor4<T>& x, double negative_slope);

// `x` is the pre-activation input.
template <typename T>
Tensor4<T> leaky_relu_backward(const Tensor4<T>& x, const Tensor4<T>& dy, double negative_slope);

// -- Transposed convolution, kernel 2 stride 2 (decoder upsampling) ---------

// weight shape: (in_channels, out_channels, 2, 2)
template <typename T>
Tensor4<T> upconv2x_forward(const Tensor4<T>& x, const Array<T>& weight, const Array<T>& bias);

template <typename T>
Tensor4<T> upconv2x_backward(const Tensor4<T>& x, const Array<T>& weight, const Tensor4<T>& dy,
                             Array<T>& dweight, Array<T>& dbias);

// -- Channel concatenation ---------------------------------------------------

template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b);

template <typename T>
void split_channels(const Tensor4<T>& dy, int c_first, Tensor4<T>& da, Tensor4<T>& db);

// -- Softmax over the channel axis -------------------------------------------

// Max-subtracted for stability; per-pixel class sums are 1 within 1e-6.
template <typename T>
Tensor4<T> softmax_channel(const Tensor4<T>& logits);

// Per-pixel argmax over channels as a (n,1,h,w) tensor of class indices.
template <typename T>
Tensor4<std::uint8_t> argmax_channel(const Tensor4<T>& scores);

}  // namespace stroke::net
