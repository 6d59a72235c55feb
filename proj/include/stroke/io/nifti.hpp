#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "stroke/core/types.hpp"

namespace stroke::io {

// Orientation/provenance header fields carried through verbatim. They are
// never interpreted; derived files written by the pipeline copy them from
// their source so external viewers keep whatever frame the data came in.
struct NiftiMeta {
  short qform_code = 0;
  short sform_code = 0;
  float quatern_b = 0, quatern_c = 0, quatern_d = 0;
  float qoffset_x = 0, qoffset_y = 0, qoffset_z = 0;
  std::array<float, 4> srow_x{0, 0, 0, 0};
  std::array<float, 4> srow_y{0, 0, 0, 0};
  std::array<float, 4> srow_z{0, 0, 0, 0};
  std::string descrip;
};

struct VolumeFile {
  Volume volume;
  NiftiMeta meta;
};

struct MaskFile {
  LabelMask mask;
  NiftiMeta meta;
};

// Single-file NIfTI-1 ("n+1"), plain or gzip-compressed, little-endian.
// Axis convention (see README): dim[1]=slices, dim[2]=rows, dim[3]=cols and
// pixdim[1]=dz, pixdim[2]=dx, pixdim[3]=dy. Accepted on-disk datatypes are
// uint8 / int16 / int32 / float32; scl_slope / scl_inter are applied on read.
VolumeFile read_volume_file(const std::filesystem::path& path, const std::string& case_id = "");
Volume read_volume(const std::filesystem::path& path, const std::string& case_id = "");

// Writes float32 voxels. Compressed iff the path ends in ".gz". The write is
// atomic (temp file + rename).
void write_volume(const Volume& volume, const std::filesystem::path& path,
                  const NiftiMeta* meta = nullptr);

// Masks are stored as uint8 with no intensity scaling and round-trip
// bit-exactly. Voxel values are checked against `schema` on read. The mask
// grid carries no spacing of its own; pass the paired volume's.
MaskFile read_mask_file(const std::filesystem::path& path, const LabelSchema& schema);
LabelMask read_mask(const std::filesystem::path& path, const LabelSchema& schema);
void write_mask(const LabelMask& mask, const std::filesystem::path& path,
                const Spacing& spacing = {1.0, 1.0, 1.0}, const NiftiMeta* meta = nullptr);

// Spacing of a file's grid without loading voxel data.
Spacing read_spacing(const std::filesystem::path& path);

}  // namespace stroke::io
