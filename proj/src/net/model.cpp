#include "stroke/net/model.hpp"

#include <cmath>

#include "stroke/core/rng.hpp"

namespace stroke::net {

void NetworkConfig::validate() const {
  if (features.empty() || features.size() != blocks.size())
    fail(ErrorKind::Config, "feature and block schedules must be non-empty and equally long");
  if (features.size() < 2) fail(ErrorKind::Config, "the network needs at least 2 stages");
  for (int f : features)
    if (f < 1) fail(ErrorKind::Config, "feature widths must be >= 1");
  for (int b : blocks)
    if (b < 1) fail(ErrorKind::Config, "block counts must be >= 1");
  if (decoder_blocks != 1) fail(ErrorKind::Config, "decoder uses exactly 1 block per stage");
  if (input_channels < 1) fail(ErrorKind::Config, "input_channels must be >= 1");
  if (num_classes < 2) fail(ErrorKind::Config, "num_classes must be >= 2");
  if (kernel != 3) fail(ErrorKind::Config, "only 3x3 convolution kernels are supported");
  if (!(negative_slope >= 0)) fail(ErrorKind::Config, "negative_slope must be >= 0");
  if (!(norm_epsilon > 0)) fail(ErrorKind::Config, "norm_epsilon must be > 0");
}

nlohmann::json NetworkConfig::to_json() const {
  return {{"features", features},
          {"blocks", blocks},
          {"decoder_blocks", decoder_blocks},
          {"input_channels", input_channels},
          {"num_classes", num_classes},
          {"negative_slope", negative_slope},
          {"kernel", kernel},
          {"norm_epsilon", norm_epsilon},
          {"init_seed", init_seed}};
}

NetworkConfig NetworkConfig::from_json(const nlohmann::json& j) {
  NetworkConfig cfg;
  if (j.contains("features")) cfg.features = j.at("features").get<std::vector<int>>();
  if (j.contains("blocks")) cfg.blocks = j.at("blocks").get<std::vector<int>>();
  cfg.decoder_blocks = j.value("decoder_blocks", cfg.decoder_blocks);
  cfg.input_channels = j.value("input_channels", cfg.input_channels);
  cfg.num_classes = j.value("num_classes", cfg.num_classes);
  cfg.negative_slope = j.value("negative_slope", cfg.negative_slope);
  cfg.kernel = j.value("kernel", cfg.kernel);
  cfg.norm_epsilon = j.value("norm_epsilon", cfg.norm_epsilon);
  cfg.init_seed = j.value("init_seed", cfg.init_seed);
  cfg.validate();
  return cfg;
}

namespace {

std::string stage_prefix(const char* part, int stage) {
  return std::string(part) + ".stage" + std::to_string(stage);
}
std::string block_prefix(const std::string& stage, int block) {
  return stage + ".block" + std::to_string(block);
}

}  // namespace

template <typename T>
Tensor4<T> residual_block_forward(const Tensor4<T>& x, const ParamStore<T>& params,
                                  const std::string& prefix, int stride, double negative_slope,
                                  double norm_epsilon, BlockCache<T>* cache) {
  const bool has_proj = params.count(prefix + ".skip.weight") > 0;

  Tensor4<T> a = conv2d_forward(x, param(params, prefix + ".conv1.weight"),
                                param(params, prefix + ".conv1.bias"), stride, 1);
  InstanceNormCache<T> n1;
  Tensor4<T> pre1 = instance_norm_forward(a, param(params, prefix + ".norm1.gamma"),
                                          param(params, prefix + ".norm1.beta"), norm_epsilon,
                                          cache ? &n1 : nullptr);
  a = Tensor4<T>();
  Tensor4<T> act1 = leaky_relu_forward(pre1, negative_slope);
  Tensor4<T> a2 = conv2d_forward(act1, param(params, prefix + ".conv2.weight"),
                                 param(params, prefix + ".conv2.bias"), 1, 1);
  InstanceNormCache<T> n2;
  Tensor4<T> main = instance_norm_forward(a2, param(params, prefix + ".norm2.gamma"),
                                          param(params, prefix + ".norm2.beta"), norm_epsilon,
                                          cache ? &n2 : nullptr);
  a2 = Tensor4<T>();

  Tensor4<T> skip;
  if (has_proj) {
    skip = conv2d_forward(x, param(params, prefix + ".skip.weight"),
                          param(params, prefix + ".skip.bias"), stride, 0);
  } else {
    if (x.c != main.c || x.h != main.h || x.w != main.w)
      fail(ErrorKind::Shape, "residual block '" + prefix +
                                 "' needs a projection: input and main path shapes differ");
    skip = x;
  }

  Tensor4<T> sum = std::move(main);
  for (std::size_t t = 0; t < sum.v.size(); ++t) sum.v[t] += skip.v[t];
  Tensor4<T> y = leaky_relu_forward(sum, negative_slope);

  if (cache) {
    cache->x = x;
    cache->n1 = std::move(n1);
    cache->pre_act1 = std::move(pre1);
    cache->act1 = std::move(act1);
    cache->n2 = std::move(n2);
    cache->pre_out = std::move(sum);
    cache->has_projection = has_proj;
    cache->stride = stride;
  }
  return y;
}

template <typename T>
Tensor4<T> residual_block_backward(const ParamStore<T>& params, const std::string& prefix,
                                   const BlockCache<T>& cache, const Tensor4<T>& dy,
                                   double negative_slope, ParamStore<T>& grads) {
  // Post-add rectifier.
  Tensor4<T> dsum = leaky_relu_backward(cache.pre_out, dy, negative_slope);

  // Skip path.
  Tensor4<T> dx_skip;
  if (cache.has_projection) {
    dx_skip = conv2d_backward(cache.x, param(params, prefix + ".skip.weight"), dsum, cache.stride,
                              0, param(grads, prefix + ".skip.weight"),
                              param(grads, prefix + ".skip.bias"));
  } else {
    dx_skip = dsum;
  }

  // Main path, reversed.
  Tensor4<T> da2 = instance_norm_backward(cache.n2, param(params, prefix + ".norm2.gamma"), dsum,
                                          param(grads, prefix + ".norm2.gamma"),
                                          param(grads, prefix + ".norm2.beta"));
  Tensor4<T> dact1 = conv2d_backward(cache.act1, param(params, prefix + ".conv2.weight"), da2, 1,
                                     1, param(grads, prefix + ".conv2.weight"),
                                     param(grads, prefix + ".conv2.bias"));
  da2 = Tensor4<T>();
  Tensor4<T> dpre1 = leaky_relu_backward(cache.pre_act1, dact1, negative_slope);
  dact1 = Tensor4<T>();
  Tensor4<T> da = instance_norm_backward(cache.n1, param(params, prefix + ".norm1.gamma"), dpre1,
                                         param(grads, prefix + ".norm1.gamma"),
                                         param(grads, prefix + ".norm1.beta"));
  dpre1 = Tensor4<T>();
  Tensor4<T> dx = conv2d_backward(cache.x, param(params, prefix + ".conv1.weight"), da,
                                  cache.stride, 1, param(grads, prefix + ".conv1.weight"),
                                  param(grads, prefix + ".conv1.bias"));

  for (std::size_t t = 0; t < dx.v.size(); ++t) dx.v[t] += dx_skip.v[t];
  return dx;
}

template <typename T>
Tensor4<T> forward(const NetworkConfig& config, const ParamStore<T>& params, const Tensor4<T>& x,
                   ForwardTrace<T>* trace, ShapeTrace* shapes) {
  config.validate();
  if (x.c != config.input_channels)
    fail(ErrorKind::Shape, "input has " + std::to_string(x.c) + " channels, expected " +
                               std::to_string(config.input_channels));
  const int divisor = config.spatial_divisor();
  if (x.h % divisor != 0 || x.w % divisor != 0)
    fail(ErrorKind::Shape, "input extents " + std::to_string(x.h) + "x" + std::to_string(x.w) +
                               " must be divisible by " + std::to_string(divisor));

  const int stages = config.stages();
  if (trace) {
    trace->encoder.assign(stages, {});
    trace->decoder.resize(stages - 1);
  }

  // Encoder; stage outputs feed both the next stage and the decoder skips.
  std::vector<Tensor4<T>> skips(stages);
  Tensor4<T> cur = x;
  for (int s = 0; s < stages; ++s) {
    const std::string sp = stage_prefix("encoder", s);
    for (int b = 0; b < config.blocks[s]; ++b) {
      const int stride = (b == 0 && s > 0) ? 2 : 1;
      BlockCache<T>* bc = nullptr;
      if (trace) {
        trace->encoder[s].emplace_back();
        bc = &trace->encoder[s].back();
      }
      cur = residual_block_forward(cur, params, block_prefix(sp, b), stride,
                                   config.negative_slope, config.norm_epsilon, bc);
    }
    if (shapes) shapes->push_back({sp, cur.c, cur.h, cur.w});
    skips[s] = cur;
  }

  // Decoder: upsample, concatenate the matching encoder output, one block.
  for (int d = stages - 2; d >= 0; --d) {
    const std::string dp = stage_prefix("decoder", d);
    Tensor4<T> up_in = std::move(cur);
    Tensor4<T> up = upconv2x_forward(up_in, param(params, dp + ".upconv.weight"),
                                     param(params, dp + ".upconv.bias"));
    Tensor4<T> cat = concat_channels(up, skips[d]);
    up = Tensor4<T>();
    if (!trace) skips[d] = Tensor4<T>();
    BlockCache<T>* bc = nullptr;
    if (trace) {
      trace->decoder[d].up_in = up_in;
      bc = &trace->decoder[d].block;
    }
    cur = residual_block_forward(cat, params, dp + ".block0", 1, config.negative_slope,
                                 config.norm_epsilon, bc);
    if (shapes) shapes->push_back({dp, cur.c, cur.h, cur.w});
  }

  if (trace) trace->head_in = cur;
  Tensor4<T> logits = conv2d_forward(cur, param(params, "head.weight"), param(params, "head.bias"),
                                     1, 0);
  if (shapes) shapes->push_back({"head", logits.c, logits.h, logits.w});
  return logits;
}

template <typename T>
ParamStore<T> backward(const NetworkConfig& config, const ParamStore<T>& params,
                       const ForwardTrace<T>& trace, const Tensor4<T>& dlogits) {
  ParamStore<T> grads = zero_like(params);
  const int stages = config.stages();

  Tensor4<T> cur = conv2d_backward(trace.head_in, param(params, "head.weight"), dlogits, 1, 0,
                                   param(grads, "head.weight"), param(grads, "head.bias"));

  // Decoder, shallow to deep; collect gradients flowing into encoder skips.
  std::vector<Tensor4<T>> dskip(stages);
  for (int d = 0; d <= stages - 2; ++d) {
    const std::string dp = stage_prefix("decoder", d);
    Tensor4<T> dcat = residual_block_backward(params, dp + ".block0", trace.decoder[d].block, cur,
                                              config.negative_slope, grads);
    cur = Tensor4<T>();
    Tensor4<T> dup;
    split_channels(dcat, config.features[d], dup, dskip[d]);
    dcat = Tensor4<T>();
    cur = upconv2x_backward(trace.decoder[d].up_in, param(params, dp + ".upconv.weight"), dup,
                            param(grads, dp + ".upconv.weight"), param(grads, dp + ".upconv.bias"));
  }

  // Encoder, deep to shallow. `cur` is the bottleneck gradient here.
  for (int s = stages - 1; s >= 0; --s) {
    if (s < stages - 1) {
      for (std::size_t t = 0; t < cur.v.size(); ++t) cur.v[t] += dskip[s].v[t];
    }
    const std::string sp = stage_prefix("encoder", s);
    for (int b = config.blocks[s] - 1; b >= 0; --b) {
      cur = residual_block_backward(params, block_prefix(sp, b), trace.encoder[s][b], cur,
                                    config.negative_slope, grads);
    }
  }
  return grads;
}

namespace {

struct LayerVisitor {
  // weight shape + fan_in for init; norm entries flagged.
  virtual void conv(const std::string& path, int out_ch, int in_ch, int kh, int kw) = 0;
  virtual void upconv(const std::string& path, int in_ch, int out_ch) = 0;
  virtual void norm(const std::string& path, int channels) = 0;
  virtual ~LayerVisitor() = default;
};

// Single definition of the architecture's layer walk, shared by init and
// the closed-form parameter count.
void walk_layers(const NetworkConfig& config, LayerVisitor& v) {
  const int stages = config.stages();
  const int k = config.kernel;
  for (int s = 0; s < stages; ++s) {
    const int out_ch = config.features[s];
    for (int b = 0; b < config.blocks[s]; ++b) {
      const int in_ch = (b == 0) ? (s == 0 ? config.input_channels : config.features[s - 1])
                                 : out_ch;
      const int stride = (b == 0 && s > 0) ? 2 : 1;
      const std::string bp = block_prefix(stage_prefix("encoder", s), b);
      v.conv(bp + ".conv1", out_ch, in_ch, k, k);
      v.norm(bp + ".norm1", out_ch);
      v.conv(bp + ".conv2", out_ch, out_ch, k, k);
      v.norm(bp + ".norm2", out_ch);
      if (in_ch != out_ch || stride != 1) v.conv(bp + ".skip", out_ch, in_ch, 1, 1);
    }
  }
  for (int d = stages - 2; d >= 0; --d) {
    const std::string dp = stage_prefix("decoder", d);
    v.upconv(dp + ".upconv", config.features[d + 1], config.features[d]);
    const int in_ch = 2 * config.features[d];
    const int out_ch = config.features[d];
    const std::string bp = dp + ".block0";
    v.conv(bp + ".conv1", out_ch, in_ch, k, k);
    v.norm(bp + ".norm1", out_ch);
    v.conv(bp + ".conv2", out_ch, out_ch, k, k);
    v.norm(bp + ".norm2", out_ch);
    v.conv(bp + ".skip", out_ch, in_ch, 1, 1);  // channels always differ
  }
  v.conv("head", config.num_classes, config.features[0], 1, 1);
}

template <typename T>
struct InitVisitor : LayerVisitor {
  ParamStore<T>* store;
  SplitMix64* rng;
  double negative_slope;

  void fill_kaiming(Array<T>& w, int fan_in) {
    const double gain = std::sqrt(2.0 / (1.0 + negative_slope * negative_slope));
    const double stddev = gain / std::sqrt(static_cast<double>(fan_in));
    for (auto& x : w.v) x = static_cast<T>(stddev * rng->next_gaussian());
  }
  void conv(const std::string& path, int out_ch, int in_ch, int kh, int kw) override {
    Array<T> w = Array<T>::make({out_ch, in_ch, kh, kw});
    fill_kaiming(w, in_ch * kh * kw);
    (*store)[path + ".weight"] = std::move(w);
    (*store)[path + ".bias"] = Array<T>::make({out_ch});
  }
  void upconv(const std::string& path, int in_ch, int out_ch) override {
    Array<T> w = Array<T>::make({in_ch, out_ch, 2, 2});
    fill_kaiming(w, in_ch * 4);
    (*store)[path + ".weight"] = std::move(w);
    (*store)[path + ".bias"] = Array<T>::make({out_ch});
  }
  void norm(const std::string& path, int channels) override {
    (*store)[path + ".gamma"] = Array<T>::make({channels}, T(1));
    (*store)[path + ".beta"] = Array<T>::make({channels});
  }
};

struct CountVisitor : LayerVisitor {
  std::int64_t total = 0;
  void conv(const std::string&, int out_ch, int in_ch, int kh, int kw) override {
    total += conv_parameter_count(in_ch, out_ch, kh, kw);
  }
  void upconv(const std::string&, int in_ch, int out_ch) override {
    total += static_cast<std::int64_t>(in_ch) * out_ch * 4 + out_ch;
  }
  void norm(const std::string&, int channels) override { total += 2 * channels; }
};

}  // namespace

template <typename T>
ParamStore<T> init_params_t(const NetworkConfig& config) {
  config.validate();
  ParamStore<T> store;
  SplitMix64 rng(config.init_seed);
  InitVisitor<T> v;
  v.store = &store;
  v.rng = &rng;
  v.negative_slope = config.negative_slope;
  walk_layers(config, v);
  return store;
}

ParamStore<float> init_params(const NetworkConfig& config) {
  return init_params_t<float>(config);
}

std::int64_t parameter_count(const NetworkConfig& config) {
  config.validate();
  CountVisitor v;
  walk_layers(config, v);
  return v.total;
}

std::int64_t conv_parameter_count(int in_channels, int out_channels, int kh, int kw) {
  return static_cast<std::int64_t>(out_channels) * in_channels * kh * kw + out_channels;
}

template <typename T>
ParamStore<T> zero_like(const ParamStore<T>& params) {
  ParamStore<T> out;
  for (const auto& [name, a] : params) out[name] = Array<T>::make(a.shape);
  return out;
}

#define STROKE_INSTANTIATE_MODEL(T)                                                             \
  template Tensor4<T> residual_block_forward<T>(const Tensor4<T>&, const ParamStore<T>&,        \
                                                const std::string&, int, double, double,        \
                                                BlockCache<T>*);                                \
  template Tensor4<T> residual_block_backward<T>(const ParamStore<T>&, const std::string&,      \
                                                 const BlockCache<T>&, const Tensor4<T>&,       \
                                                 double, ParamStore<T>&);                       \
  template Tensor4<T> forward<T>(const NetworkConfig&, const ParamStore<T>&, const Tensor4<T>&, \
                                 ForwardTrace<T>*, ShapeTrace*);                                \
  template ParamStore<T> backward<T>(const NetworkConfig&, const ParamStore<T>&,                \
                                     const ForwardTrace<T>&, const Tensor4<T>&);                \
  template ParamStore<T> init_params_t<T>(const NetworkConfig&);                                \
  template ParamStore<T> zero_like<T>(const ParamStore<T>&);

STROKE_INSTANTIATE_MODEL(float)
STROKE_INSTANTIATE_MODEL(double)

}  // namespace stroke::net
