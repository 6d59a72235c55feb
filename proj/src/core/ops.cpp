#include "stroke/core/ops.hpp"

#include <algorithm>
#include <set>

#include "stroke/core/error.hpp"

namespace stroke {

LabelMask remap_labels(const LabelMask& mask, const std::map<int, int>& remap) {
  for (const auto& [src, dst] : remap) {
    if (!mask.schema.has(src))
      fail(ErrorKind::Schema, "remap source id " + std::to_string(src) + " is not in the mask schema");
    if (dst < 0)
      fail(ErrorKind::Schema, "remap target id " + std::to_string(dst) + " is negative");
  }

  // Dense lookup over the source id range.
  std::vector<int> lut(mask.schema.max_id() + 1);
  for (std::size_t i = 0; i < lut.size(); ++i) lut[i] = static_cast<int>(i);
  for (const auto& [src, dst] : remap) lut[src] = dst;

  LabelMask out;
  out.data = mask.data;
  for (auto& v : out.data.raw()) v = static_cast<std::uint8_t>(lut[v]);

  // Output schema covers exactly the reachable target ids.
  std::set<int> targets;
  for (const auto& e : mask.schema.labels) targets.insert(lut[e.id]);
  targets.insert(0);
  for (int t : targets) {
    std::string name;
    if (const std::string* existing = mask.schema.name_of(t)) {
      name = *existing;
    } else {
      for (const auto& e : mask.schema.labels) {
        if (lut[e.id] == t) {
          name = e.name;
          break;
        }
      }
    }
    out.schema.labels.push_back({t, name});
  }
  return out;
}

std::uint64_t foreground_voxel_count(const LabelMask& mask, int label) {
  if (!mask.schema.has(label))
    fail(ErrorKind::Schema, "label " + std::to_string(label) + " is not in the mask schema");
  std::uint64_t n = 0;
  for (std::uint8_t v : mask.data.raw())
    if (v == label) ++n;
  return n;
}

SliceImage slice_extract(const Volume& volume, int slice_index) {
  if (slice_index < 0 || slice_index >= volume.slices())
    fail(ErrorKind::Bounds, "slice index " + std::to_string(slice_index) + " out of range [0, " +
                                std::to_string(volume.slices()) + ")");
  SliceImage out;
  out.pixels = Image2<float>(volume.rows(), volume.cols());
  for (int r = 0; r < volume.rows(); ++r)
    for (int c = 0; c < volume.cols(); ++c) out.pixels(r, c) = volume.data(slice_index, r, c);
  out.dx = volume.spacing.dx;
  out.dy = volume.spacing.dy;
  return out;
}

Image2<std::uint8_t> mask_slice_extract(const LabelMask& mask, int slice_index) {
  if (slice_index < 0 || slice_index >= mask.slices())
    fail(ErrorKind::Bounds, "slice index " + std::to_string(slice_index) + " out of range [0, " +
                                std::to_string(mask.slices()) + ")");
  Image2<std::uint8_t> out(mask.rows(), mask.cols());
  for (int r = 0; r < mask.rows(); ++r)
    for (int c = 0; c < mask.cols(); ++c) out(r, c) = mask.data(slice_index, r, c);
  return out;
}

}  // namespace stroke
