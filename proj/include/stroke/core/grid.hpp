#pragma once

#include <cstdint>
#include <vector>

#include "stroke/core/error.hpp"

namespace stroke {

// Dense 3-D grid indexed (slice, row, col), col fastest.
template <typename T>
class Grid3 {
 public:
  Grid3() = default;
  Grid3(int slices, int rows, int cols, T fill = T{})
      : ns_(slices), nr_(rows), nc_(cols),
        v_(static_cast<std::size_t>(slices) * rows * cols, fill) {
    if (slices < 1 || rows < 1 || cols < 1)
      fail(ErrorKind::Shape, "grid extents must all be >= 1");
  }

  int slices() const noexcept { return ns_; }
  int rows() const noexcept { return nr_; }
  int cols() const noexcept { return nc_; }
  std::size_t size() const noexcept { return v_.size(); }

  T& operator()(int s, int r, int c) noexcept {
    return v_[(static_cast<std::size_t>(s) * nr_ + r) * nc_ + c];
  }
  const T& operator()(int s, int r, int c) const noexcept {
    return v_[(static_cast<std::size_t>(s) * nr_ + r) * nc_ + c];
  }

  T* data() noexcept { return v_.data(); }
  const T* data() const noexcept { return v_.data(); }
  std::vector<T>& raw() noexcept { return v_; }
  const std::vector<T>& raw() const noexcept { return v_; }

  template <typename U>
  bool same_extents(const Grid3<U>& other) const noexcept {
    return ns_ == other.slices() && nr_ == other.rows() && nc_ == other.cols();
  }

  bool operator==(const Grid3& other) const = default;

 private:
  int ns_ = 0, nr_ = 0, nc_ = 0;
  std::vector<T> v_;
};

// Dense 2-D image indexed (row, col), col fastest.
template <typename T>
class Image2 {
 public:
  Image2() = default;
  Image2(int rows, int cols, T fill = T{})
      : nr_(rows), nc_(cols), v_(static_cast<std::size_t>(rows) * cols, fill) {
    if (rows < 1 || cols < 1)
      fail(ErrorKind::Shape, "image extents must be >= 1");
  }

  int rows() const noexcept { return nr_; }
  int cols() const noexcept { return nc_; }
  std::size_t size() const noexcept { return v_.size(); }

  T& operator()(int r, int c) noexcept {
    return v_[static_cast<std::size_t>(r) * nc_ + c];
  }
  const T& operator()(int r, int c) const noexcept {
    return v_[static_cast<std::size_t>(r) * nc_ + c];
  }

  T* data() noexcept { return v_.data(); }
  const T* data() const noexcept { return v_.data(); }

  bool same_extents(const Image2& other) const noexcept {
    return nr_ == other.nr_ && nc_ == other.nc_;
  }

  bool operator==(const Image2& other) const = default;

 private:
  int nr_ = 0, nc_ = 0;
  std::vector<T> v_;
};

using VoxelGrid = Grid3<float>;
using LabelGrid = Grid3<std::uint8_t>;

}  // namespace stroke
