#pragma once

#include <string>
#include <vector>

#include "stroke/net/config.hpp"
#include "stroke/net/layers.hpp"
#include "stroke/net/tensor.hpp"

namespace stroke::net {

struct ShapeTraceEntry {
  std::string path;
  int channels = 0;
  int h = 0;
  int w = 0;
};
using ShapeTrace = std::vector<ShapeTraceEntry>;

// Activations a residual block's backward pass needs.
template <typename T>
struct BlockCache {
  Tensor4<T> x;          // block input
  InstanceNormCache<T> n1;
  Tensor4<T> pre_act1;   // first norm output (input to the inner rectifier)
  Tensor4<T> act1;       // input to conv2
  InstanceNormCache<T> n2;
  Tensor4<T> pre_out;    // main + skip (input to the post-add rectifier)
  bool has_projection = false;
  int stride = 1;
};

template <typename T>
struct DecoderCache {
  Tensor4<T> up_in;  // upconv input
  BlockCache<T> block;
};

template <typename T>
struct ForwardTrace {
  std::vector<std::vector<BlockCache<T>>> encoder;  // [stage][block]
  std::vector<DecoderCache<T>> decoder;             // indexed by target stage
  Tensor4<T> head_in;
};

// One residual unit: conv(3x3, stride) -> instance norm -> leaky rectifier
// -> conv(3x3) -> instance norm, plus an identity or strided 1x1 projection
// skip, and a leaky rectifier after the sum. The projection is used exactly
// when "<prefix>.skip.weight" exists in the store.
template <typename T>
Tensor4<T> residual_block_forward(const Tensor4<T>& x, const ParamStore<T>& params,
                                  const std::string& prefix, int stride, double negative_slope,
                                  double norm_epsilon, BlockCache<T>* cache = nullptr);

template <typename T>
Tensor4<T> residual_block_backward(const ParamStore<T>& params, const std::string& prefix,
                                   const BlockCache<T>& cache, const Tensor4<T>& dy,
                                   double negative_slope, ParamStore<T>& grads);

// Whole-network forward: per-class score maps (logits) at input resolution.
// H and W must be divisible by config.spatial_divisor().
template <typename T>
Tensor4<T> forward(const NetworkConfig& config, const ParamStore<T>& params, const Tensor4<T>& x,
                   ForwardTrace<T>* trace = nullptr, ShapeTrace* shapes = nullptr);

// Parameter gradients for the forward pass recorded in `trace`.
template <typename T>
ParamStore<T> backward(const NetworkConfig& config, const ParamStore<T>& params,
                       const ForwardTrace<T>& trace, const Tensor4<T>& dlogits);

// Kaiming fan-in init for convolutions, (1, 0) for norm affine params,
// zero biases; draws from a SplitMix64 stream seeded by config.init_seed in
// fixed construction order.
template <typename T>
ParamStore<T> init_params_t(const NetworkConfig& config);
ParamStore<float> init_params(const NetworkConfig& config);

// Closed-form total over the layers implied by the config; equals the
// allocated size of any store produced by init_params.
std::int64_t parameter_count(const NetworkConfig& config);

// Weights-plus-bias count of one convolution.
std::int64_t conv_parameter_count(int in_channels, int out_channels, int kh, int kw);

template <typename T>
ParamStore<T> zero_like(const ParamStore<T>& params);

}  // namespace stroke::net
