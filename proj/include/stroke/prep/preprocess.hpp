#pragma once

#include <cstdint>
#include <optional>

#include "stroke/core/types.hpp"
#include "stroke/prep/fingerprint.hpp"

namespace stroke::prep {

struct PreprocessConfig {
  double target_dx = 1.0;  // isotropic in-plane target pitch (mm)
  double target_dy = 1.0;
  int patch_rows = 512;
  int patch_cols = 512;
  double epsilon = 1e-8;          // guards the z-score denominator
  int image_interp_order = 3;     // cubic for images
  int mask_interp_order = 1;      // linear for masks
  double mask_threshold = 0.5;    // re-binarization after mask interpolation

  void validate() const;
};

// out = (clip(in, p_low, p_high) - mean) / (std + epsilon), elementwise.
// Monotone non-decreasing in the input; extents and spacing unchanged.
Volume ct_normalize(const Volume& volume, const DatasetFingerprint& fp,
                    const PreprocessConfig& cfg);

// The value padding regions take after normalization (the normalized p_low,
// i.e. the population minimum).
float normalized_pad_value(const DatasetFingerprint& fp, const PreprocessConfig& cfg);

// In-plane resampling of one slice. Output extents are
// round(extent * source / target) per axis; order 0/1/3 supported (order 3 is
// a Catmull-Rom cubic interpolating spline). Out-of-range coordinates are
// edge-replicated. Identical spacings short-circuit to a bit-identical copy.
Image2<float> resample_image_slice(const Image2<float>& image, double src_dx, double src_dy,
                                   double tgt_dx, double tgt_dy, int order = 3);

// Binary-mask variant: interpolates the {0,1} field, then re-binarizes at
// `threshold`. Non-binary input is a contract error.
Image2<std::uint8_t> resample_mask_slice(const Image2<std::uint8_t>& mask, double src_dx,
                                         double src_dy, double tgt_dx, double tgt_dy,
                                         int order = 1, double threshold = 0.5);

// Multi-label variant: each label is resampled one-hot and the argmax wins.
Image2<std::uint8_t> resample_label_slice(const Image2<std::uint8_t>& mask,
                                          const LabelSchema& schema, double src_dx, double src_dy,
                                          double tgt_dx, double tgt_dy, int order = 1);

// Invertible record of the center crop/pad applied by shape_to_patch.
// orig[orig_row0 + i][orig_col0 + j] <-> patch[patch_row0 + i][patch_col0 + j]
// over the copied span.
struct CropPadRecord {
  int orig_rows = 0, orig_cols = 0;
  int patch_rows = 0, patch_cols = 0;
  int orig_row0 = 0, orig_col0 = 0;    // top-left of the copied span in the original
  int patch_row0 = 0, patch_col0 = 0;  // top-left of the copied span in the patch
  int span_rows = 0, span_cols = 0;

  bool is_identity() const {
    return orig_rows == patch_rows && orig_cols == patch_cols;
  }
};

CropPadRecord make_crop_pad_record(int orig_rows, int orig_cols, int patch_rows, int patch_cols);

// Center-pad with `pad_value` when smaller than the patch, center-crop when
// larger.
template <typename T>
Image2<T> shape_to_patch(const Image2<T>& image, const CropPadRecord& rec, T pad_value);

// Maps a patch-frame image back onto the original extents; regions that were
// cropped away receive `fill_value`.
template <typename T>
Image2<T> invert_patch(const Image2<T>& patched, const CropPadRecord& rec, T fill_value);

}  // namespace stroke::prep
