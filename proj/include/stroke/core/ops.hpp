#pragma once

#include <cstdint>
#include <map>

#include "stroke/core/types.hpp"

namespace stroke {

// A 2-D plane extracted from a volume, with its in-plane pitch attached.
struct SliceImage {
  Image2<float> pixels;
  double dx = 1.0;
  double dy = 1.0;
};

// Applies `remap` voxelwise; ids without an entry pass through unchanged.
// Every source id must exist in the mask's schema. The output schema holds
// the resulting target ids: an id keeps its name when it already existed,
// otherwise it inherits the name of its lowest source id.
LabelMask remap_labels(const LabelMask& mask, const std::map<int, int>& remap);

// Exact number of voxels equal to `label`, which must be in the schema.
std::uint64_t foreground_voxel_count(const LabelMask& mask, int label);

// Plane at `slice_index`, values bit-identical to the volume.
SliceImage slice_extract(const Volume& volume, int slice_index);

// Mask counterpart of slice_extract, used by the 2-D training path.
Image2<std::uint8_t> mask_slice_extract(const LabelMask& mask, int slice_index);

}  // namespace stroke
