#include "stroke/prep/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "stroke/core/error.hpp"

namespace stroke::prep {

void PreprocessConfig::validate() const {
  if (!(target_dx > 0) || !(target_dy > 0))
    fail(ErrorKind::Config, "target spacing must be strictly positive");
  if (patch_rows < 1 || patch_cols < 1) fail(ErrorKind::Config, "patch extents must be >= 1");
  if (!(epsilon > 0)) fail(ErrorKind::Config, "epsilon must be > 0");
  for (int o : {image_interp_order, mask_interp_order})
    if (o != 0 && o != 1 && o != 3)
      fail(ErrorKind::Config, "interpolation order must be one of {0, 1, 3}");
}

Volume ct_normalize(const Volume& volume, const DatasetFingerprint& fp,
                    const PreprocessConfig& cfg) {
  fp.validate();
  cfg.validate();
  Volume out = volume;
  const float lo = static_cast<float>(fp.p_low);
  const float hi = static_cast<float>(fp.p_high);
  const float mean = static_cast<float>(fp.mean);
  const float inv = static_cast<float>(1.0 / (fp.stddev + cfg.epsilon));
  for (auto& v : out.data.raw()) v = (std::clamp(v, lo, hi) - mean) * inv;
  return out;
}

float normalized_pad_value(const DatasetFingerprint& fp, const PreprocessConfig& cfg) {
  return static_cast<float>((fp.p_low - fp.mean) / (fp.stddev + cfg.epsilon));
}

namespace {

int resampled_extent(int extent, double src, double tgt) {
  const int out = static_cast<int>(std::llround(extent * src / tgt));
  if (out < 1)
    fail(ErrorKind::Config, "target spacing collapses an axis of extent " +
                                std::to_string(extent) + " to zero");
  return out;
}

// Catmull-Rom weights for fractional offset t in [0,1): samples at
// positions -1, 0, 1, 2 relative to the base index.
inline void catmull_rom_weights(double t, double w[4]) {
  const double t2 = t * t, t3 = t2 * t;
  w[0] = 0.5 * (-t3 + 2 * t2 - t);
  w[1] = 0.5 * (3 * t3 - 5 * t2 + 2);
  w[2] = 0.5 * (-3 * t3 + 4 * t2 + t);
  w[3] = 0.5 * (t3 - t2);
}

// Separable 1-D resampling pass along the row axis of a row-major buffer
// seen as (n_lines, line_len); operates on doubles for accumulation.
void resample_lines(const std::vector<double>& src, int n_lines, int src_len,
                    std::vector<double>& dst, int dst_len, double scale, int order) {
  dst.assign(static_cast<std::size_t>(n_lines) * dst_len, 0.0);
  auto clampi = [&](int i) { return std::clamp(i, 0, src_len - 1); };
  for (int i = 0; i < dst_len; ++i) {
    const double x = (i + 0.5) * scale - 0.5;  // pixel-center alignment
    const double xc = std::clamp(x, 0.0, static_cast<double>(src_len - 1));
    if (order == 0) {
      const int j = clampi(static_cast<int>(std::llround(xc)));
      for (int l = 0; l < n_lines; ++l)
        dst[static_cast<std::size_t>(l) * dst_len + i] =
            src[static_cast<std::size_t>(l) * src_len + j];
    } else if (order == 1) {
      const int j0 = static_cast<int>(std::floor(xc));
      const int j1 = clampi(j0 + 1);
      const double t = xc - j0;
      for (int l = 0; l < n_lines; ++l) {
        const double* s = &src[static_cast<std::size_t>(l) * src_len];
        dst[static_cast<std::size_t>(l) * dst_len + i] = (1.0 - t) * s[j0] + t * s[j1];
      }
    } else {
      const int j0 = static_cast<int>(std::floor(xc));
      double w[4];
      catmull_rom_weights(xc - j0, w);
      const int js[4] = {clampi(j0 - 1), clampi(j0), clampi(j0 + 1), clampi(j0 + 2)};
      for (int l = 0; l < n_lines; ++l) {
        const double* s = &src[static_cast<std::size_t>(l) * src_len];
        dst[static_cast<std::size_t>(l) * dst_len + i] =
            w[0] * s[js[0]] + w[1] * s[js[1]] + w[2] * s[js[2]] + w[3] * s[js[3]];
      }
    }
  }
}

// Full 2-D separable resample on doubles: columns first, then rows.
std::vector<double> resample_field(const std::vector<double>& field, int rows, int cols,
                                   int out_rows, int out_cols, double row_scale,
                                   double col_scale, int order) {
  // Pass 1: along columns (each row is a line).
  std::vector<double> pass1;
  resample_lines(field, rows, cols, pass1, out_cols, col_scale, order);

  // Pass 2: along rows. Transpose, resample, transpose back.
  std::vector<double> t1(static_cast<std::size_t>(out_cols) * rows);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < out_cols; ++c)
      t1[static_cast<std::size_t>(c) * rows + r] = pass1[static_cast<std::size_t>(r) * out_cols + c];

  std::vector<double> pass2;
  resample_lines(t1, out_cols, rows, pass2, out_rows, row_scale, order);

  std::vector<double> out(static_cast<std::size_t>(out_rows) * out_cols);
  for (int c = 0; c < out_cols; ++c)
    for (int r = 0; r < out_rows; ++r)
      out[static_cast<std::size_t>(r) * out_cols + c] = pass2[static_cast<std::size_t>(c) * out_rows + r];
  return out;
}

}  // namespace

Image2<float> resample_image_slice(const Image2<float>& image, double src_dx, double src_dy,
                                   double tgt_dx, double tgt_dy, int order) {
  if (!(src_dx > 0 && src_dy > 0 && tgt_dx > 0 && tgt_dy > 0))
    fail(ErrorKind::Config, "spacings must be strictly positive");
  if (order != 0 && order != 1 && order != 3)
    fail(ErrorKind::Config, "interpolation order must be one of {0, 1, 3}");
  if (src_dx == tgt_dx && src_dy == tgt_dy) return image;  // identity short-circuit

  const int out_rows = resampled_extent(image.rows(), src_dx, tgt_dx);
  const int out_cols = resampled_extent(image.cols(), src_dy, tgt_dy);

  std::vector<double> field(image.size());
  for (std::size_t i = 0; i < field.size(); ++i) field[i] = image.data()[i];
  const std::vector<double> res =
      resample_field(field, image.rows(), image.cols(), out_rows, out_cols,
                     static_cast<double>(image.rows()) / out_rows,
                     static_cast<double>(image.cols()) / out_cols, order);

  Image2<float> out(out_rows, out_cols);
  for (std::size_t i = 0; i < res.size(); ++i) out.data()[i] = static_cast<float>(res[i]);
  return out;
}

Image2<std::uint8_t> resample_mask_slice(const Image2<std::uint8_t>& mask, double src_dx,
                                         double src_dy, double tgt_dx, double tgt_dy, int order,
                                         double threshold) {
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask.data()[i] > 1)
      fail(ErrorKind::Contract,
           "resample_mask_slice requires a binary mask; use resample_label_slice for multi-label");
  if (!(src_dx > 0 && src_dy > 0 && tgt_dx > 0 && tgt_dy > 0))
    fail(ErrorKind::Config, "spacings must be strictly positive");
  if (src_dx == tgt_dx && src_dy == tgt_dy) return mask;

  const int out_rows = resampled_extent(mask.rows(), src_dx, tgt_dx);
  const int out_cols = resampled_extent(mask.cols(), src_dy, tgt_dy);

  std::vector<double> field(mask.size());
  for (std::size_t i = 0; i < field.size(); ++i) field[i] = mask.data()[i];
  const std::vector<double> res =
      resample_field(field, mask.rows(), mask.cols(), out_rows, out_cols,
                     static_cast<double>(mask.rows()) / out_rows,
                     static_cast<double>(mask.cols()) / out_cols, order);

  Image2<std::uint8_t> out(out_rows, out_cols);
  for (std::size_t i = 0; i < res.size(); ++i) out.data()[i] = res[i] >= threshold ? 1 : 0;
  return out;
}

Image2<std::uint8_t> resample_label_slice(const Image2<std::uint8_t>& mask,
                                          const LabelSchema& schema, double src_dx, double src_dy,
                                          double tgt_dx, double tgt_dy, int order) {
  if (src_dx == tgt_dx && src_dy == tgt_dy) return mask;
  const int out_rows = resampled_extent(mask.rows(), src_dx, tgt_dx);
  const int out_cols = resampled_extent(mask.cols(), src_dy, tgt_dy);

  Image2<std::uint8_t> out(out_rows, out_cols);
  std::vector<double> best(static_cast<std::size_t>(out_rows) * out_cols, -1.0);
  std::vector<double> field(mask.size());
  for (const auto& entry : schema.labels) {
    for (std::size_t i = 0; i < mask.size(); ++i)
      field[i] = mask.data()[i] == entry.id ? 1.0 : 0.0;
    const std::vector<double> res =
        resample_field(field, mask.rows(), mask.cols(), out_rows, out_cols,
                       static_cast<double>(mask.rows()) / out_rows,
                       static_cast<double>(mask.cols()) / out_cols, order);
    for (std::size_t i = 0; i < res.size(); ++i) {
      if (res[i] > best[i]) {
        best[i] = res[i];
        out.data()[i] = static_cast<std::uint8_t>(entry.id);
      }
    }
  }
  return out;
}

CropPadRecord make_crop_pad_record(int orig_rows, int orig_cols, int patch_rows, int patch_cols) {
  if (orig_rows < 1 || orig_cols < 1 || patch_rows < 1 || patch_cols < 1)
    fail(ErrorKind::Contract, "extents must be >= 1");
  CropPadRecord rec;
  rec.orig_rows = orig_rows;
  rec.orig_cols = orig_cols;
  rec.patch_rows = patch_rows;
  rec.patch_cols = patch_cols;
  rec.span_rows = std::min(orig_rows, patch_rows);
  rec.span_cols = std::min(orig_cols, patch_cols);
  rec.orig_row0 = std::max(0, (orig_rows - patch_rows) / 2);
  rec.orig_col0 = std::max(0, (orig_cols - patch_cols) / 2);
  rec.patch_row0 = std::max(0, (patch_rows - orig_rows) / 2);
  rec.patch_col0 = std::max(0, (patch_cols - orig_cols) / 2);
  return rec;
}

template <typename T>
Image2<T> shape_to_patch(const Image2<T>& image, const CropPadRecord& rec, T pad_value) {
  if (image.rows() != rec.orig_rows || image.cols() != rec.orig_cols)
    fail(ErrorKind::Shape, "image extents do not match the crop/pad record");
  Image2<T> out(rec.patch_rows, rec.patch_cols, pad_value);
  for (int i = 0; i < rec.span_rows; ++i)
    for (int j = 0; j < rec.span_cols; ++j)
      out(rec.patch_row0 + i, rec.patch_col0 + j) = image(rec.orig_row0 + i, rec.orig_col0 + j);
  return out;
}

template <typename T>
Image2<T> invert_patch(const Image2<T>& patched, const CropPadRecord& rec, T fill_value) {
  if (patched.rows() != rec.patch_rows || patched.cols() != rec.patch_cols)
    fail(ErrorKind::Shape, "patch extents do not match the crop/pad record");
  Image2<T> out(rec.orig_rows, rec.orig_cols, fill_value);
  for (int i = 0; i < rec.span_rows; ++i)
    for (int j = 0; j < rec.span_cols; ++j)
      out(rec.orig_row0 + i, rec.orig_col0 + j) = patched(rec.patch_row0 + i, rec.patch_col0 + j);
  return out;
}

template Image2<float> shape_to_patch<float>(const Image2<float>&, const CropPadRecord&, float);
template Image2<std::uint8_t> shape_to_patch<std::uint8_t>(const Image2<std::uint8_t>&,
                                                           const CropPadRecord&, std::uint8_t);
template Image2<float> invert_patch<float>(const Image2<float>&, const CropPadRecord&, float);
template Image2<std::uint8_t> invert_patch<std::uint8_t>(const Image2<std::uint8_t>&,
                                                         const CropPadRecord&, std::uint8_t);

}  // namespace stroke::prep
