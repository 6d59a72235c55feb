#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stroke/core/error.hpp"

namespace stroke::net {

// Dense (batch, channel, height, width) tensor, width fastest.
template <typename T>
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> v;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_, T fill = T{})
      : n(n_), c(c_), h(h_), w(w_),
        v(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {
    if (n_ < 1 || c_ < 1 || h_ < 1 || w_ < 1)
      fail(ErrorKind::Shape, "tensor extents must be >= 1");
  }

  std::size_t plane() const noexcept { return static_cast<std::size_t>(h) * w; }
  std::size_t numel() const noexcept { return v.size(); }

  T& at(int i, int j, int y, int x) noexcept {
    return v[((static_cast<std::size_t>(i) * c + j) * h + y) * w + x];
  }
  const T& at(int i, int j, int y, int x) const noexcept {
    return v[((static_cast<std::size_t>(i) * c + j) * h + y) * w + x];
  }

  T* sample(int i) noexcept { return v.data() + static_cast<std::size_t>(i) * c * plane(); }
  const T* sample(int i) const noexcept {
    return v.data() + static_cast<std::size_t>(i) * c * plane();
  }

  bool same_shape(const Tensor4& o) const noexcept {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
};

// Named parameter array (conv weights, biases, norm affine params).
template <typename T>
struct Array {
  std::vector<int> shape;
  std::vector<T> v;

  static Array make(std::vector<int> shape_, T fill = T{}) {
    Array a;
    a.shape = std::move(shape_);
    std::size_t n = 1;
    for (int d : a.shape) n *= static_cast<std::size_t>(d);
    a.v.assign(n, fill);
    return a;
  }
  std::size_t numel() const noexcept { return v.size(); }
};

// Parameters (or their gradients) keyed by a stable layer path string such
// as "encoder.stage0.block0.conv1.weight".
template <typename T>
using ParamStore = std::map<std::string, Array<T>>;

template <typename T>
const Array<T>& param(const ParamStore<T>& store, const std::string& path) {
  auto it = store.find(path);
  if (it == store.end()) fail(ErrorKind::Contract, "missing parameter '" + path + "'");
  return it->second;
}

template <typename T>
Array<T>& param(ParamStore<T>& store, const std::string& path) {
  auto it = store.find(path);
  if (it == store.end()) fail(ErrorKind::Contract, "missing parameter '" + path + "'");
  return it->second;
}

template <typename T>
std::int64_t store_numel(const ParamStore<T>& store) {
  std::int64_t n = 0;
  for (const auto& [name, a] : store) n += static_cast<std::int64_t>(a.numel());
  return n;
}

}  // namespace stroke::net
