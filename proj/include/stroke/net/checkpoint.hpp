#pragma once

#include <filesystem>

#include <json.hpp>

#include "stroke/net/config.hpp"
#include "stroke/net/tensor.hpp"

namespace stroke::net {

// Self-describing checkpoint container (see README for the byte layout):
// magic, a JSON header naming every tensor by layer path with shape/dtype/
// offset, then raw little-endian float32 data. `extra` carries arbitrary
// run metadata (e.g. the training configuration).
struct Checkpoint {
  NetworkConfig config;
  ParamStore<float> params;
  std::uint64_t seed = 0;
  nlohmann::json extra;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace stroke::net
