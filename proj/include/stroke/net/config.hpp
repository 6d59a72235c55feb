#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

namespace stroke::net {

// Residual encoder U-Net schedule. The defaults are the full-scale
// configuration; tests use smaller feature/block lists through the same
// code path.
struct NetworkConfig {
  std::vector<int> features{32, 64, 128, 256, 512, 512, 512, 512};
  std::vector<int> blocks{1, 3, 4, 6, 6, 6, 6, 6};
  int decoder_blocks = 1;
  int input_channels = 1;
  int num_classes = 2;
  double negative_slope = 0.01;  // leaky rectifier
  int kernel = 3;
  double norm_epsilon = 1e-5;
  std::uint64_t init_seed = 1;

  int stages() const { return static_cast<int>(features.size()); }
  // Encoder stages 2..S downsample by 2, so inputs must divide by this.
  int spatial_divisor() const { return 1 << (stages() - 1); }

  void validate() const;

  nlohmann::json to_json() const;
  static NetworkConfig from_json(const nlohmann::json& j);

  static NetworkConfig toy() {
    NetworkConfig cfg;
    cfg.features = {8, 16, 32};
    cfg.blocks = {1, 1, 1};
    return cfg;
  }
};

}  // namespace stroke::net
