#pragma once

#include <cstdint>
#include <utility>

#include "stroke/core/types.hpp"

namespace stroke::io {

// Axis-aligned ellipsoid in physical millimeters; axes ordered (z, x, y) to
// match the (slice, row, col) grid axes.
struct Ellipsoid {
  double cz = 0, cx = 0, cy = 0;
  double az = 1, ax = 1, ay = 1;

  bool contains(double z, double x, double y) const {
    const double u = (z - cz) / az, v = (x - cx) / ax, w = (y - cy) / ay;
    return u * u + v * v + w * w <= 1.0;
  }
};

// Synthetic head: a bright brain ellipsoid on a uniform background with one
// hypodense lesion ellipsoid inside it, plus optional Gaussian noise.
struct PhantomSpec {
  int slices = 8, rows = 64, cols = 64;
  Spacing spacing{5.0, 1.0, 1.0};
  Ellipsoid brain;
  Ellipsoid lesion;
  double lesion_offset_hu = -10.0;  // added to brain HU inside the lesion
  double background_hu = 0.0;
  double brain_hu = 35.0;
  double noise_std = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Deterministic given the spec (including its seed). The mask labels lesion
// voxels 1 on the analytic ellipsoid membership test.
std::pair<Volume, LabelMask> generate_phantom(const PhantomSpec& spec);

// Voxel-center physical coordinate along one axis.
inline double voxel_center(int index, double pitch) { return (index + 0.5) * pitch; }

}  // namespace stroke::io
