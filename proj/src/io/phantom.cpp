#include "stroke/io/phantom.hpp"

#include <cmath>

#include "stroke/core/error.hpp"
#include "stroke/core/rng.hpp"

namespace stroke::io {

void PhantomSpec::validate() const {
  spacing.validate();
  if (slices < 1 || rows < 1 || cols < 1) fail(ErrorKind::Spec, "phantom extents must be >= 1");
  if (noise_std < 0) fail(ErrorKind::Spec, "noise std must be >= 0");
  for (double a : {brain.az, brain.ax, brain.ay})
    if (!(a > 0)) fail(ErrorKind::Spec, "brain ellipsoid semi-axes must be strictly positive");
  for (double a : {lesion.az, lesion.ax, lesion.ay})
    if (!(a > 0)) fail(ErrorKind::Spec, "lesion ellipsoid semi-axes must be strictly positive");

  // Sufficient containment bound: the farthest lesion point along each axis
  // must still satisfy the brain ellipsoid inequality.
  const double tz = (std::abs(lesion.cz - brain.cz) + lesion.az) / brain.az;
  const double tx = (std::abs(lesion.cx - brain.cx) + lesion.ax) / brain.ax;
  const double ty = (std::abs(lesion.cy - brain.cy) + lesion.ay) / brain.ay;
  if (tz * tz + tx * tx + ty * ty > 1.0)
    fail(ErrorKind::Spec, "lesion ellipsoid is not contained in the brain ellipsoid");
}

std::pair<Volume, LabelMask> generate_phantom(const PhantomSpec& spec) {
  spec.validate();

  Volume vol;
  vol.spacing = spec.spacing;
  vol.data = VoxelGrid(spec.slices, spec.rows, spec.cols);

  LabelMask mask;
  mask.schema = LabelSchema::binary("acute_infarct");
  mask.data = LabelGrid(spec.slices, spec.rows, spec.cols);

  SplitMix64 rng(spec.seed);
  for (int s = 0; s < spec.slices; ++s) {
    const double z = voxel_center(s, spec.spacing.dz);
    for (int r = 0; r < spec.rows; ++r) {
      const double x = voxel_center(r, spec.spacing.dx);
      for (int c = 0; c < spec.cols; ++c) {
        const double y = voxel_center(c, spec.spacing.dy);
        double hu = spec.background_hu;
        if (spec.brain.contains(z, x, y)) {
          hu = spec.brain_hu;
          if (spec.lesion.contains(z, x, y)) {
            hu += spec.lesion_offset_hu;
            mask.data(s, r, c) = 1;
          }
        }
        if (spec.noise_std > 0) hu += spec.noise_std * rng.next_gaussian();
        vol.data(s, r, c) = static_cast<float>(hu);
      }
    }
  }
  return {std::move(vol), std::move(mask)};
}

}  // namespace stroke::io
