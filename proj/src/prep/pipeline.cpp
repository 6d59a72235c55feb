#include "stroke/prep/pipeline.hpp"

#include <json.hpp>

#include "stroke/core/error.hpp"
#include "stroke/core/ops.hpp"
#include "stroke/io/atomic_file.hpp"

namespace stroke::prep {

using nlohmann::json;

PreprocessedCase preprocess_case(const Volume& volume, const LabelMask* mask,
                                 const DatasetFingerprint& fp, const PreprocessConfig& cfg,
                                 const io::NiftiMeta* meta) {
  cfg.validate();
  if (mask && !mask->data.same_extents(volume.data))
    fail(ErrorKind::Shape, "case '" + volume.case_id + "': mask extents do not match the volume");

  const Volume normalized = ct_normalize(volume, fp, cfg);
  const float pad = normalized_pad_value(fp, cfg);

  PreprocessedCase out;
  out.original_spacing = volume.spacing;
  out.original_rows = volume.rows();
  out.original_cols = volume.cols();
  out.fingerprint = fp;
  if (meta) out.meta = *meta;

  // Resample the first slice to learn the resampled extents, then the record.
  const SliceImage probe = slice_extract(normalized, 0);
  const Image2<float> probe_res = resample_image_slice(
      probe.pixels, volume.spacing.dx, volume.spacing.dy, cfg.target_dx, cfg.target_dy,
      cfg.image_interp_order);
  out.record = make_crop_pad_record(probe_res.rows(), probe_res.cols(), cfg.patch_rows,
                                    cfg.patch_cols);

  out.image.case_id = volume.case_id;
  out.image.spacing = {volume.spacing.dz, cfg.target_dx, cfg.target_dy};
  out.image.data = VoxelGrid(volume.slices(), cfg.patch_rows, cfg.patch_cols);
  if (mask) {
    out.mask = LabelMask{LabelGrid(volume.slices(), cfg.patch_rows, cfg.patch_cols), mask->schema};
  }

  for (int s = 0; s < volume.slices(); ++s) {
    const SliceImage slice = slice_extract(normalized, s);
    const Image2<float> res = resample_image_slice(slice.pixels, volume.spacing.dx,
                                                   volume.spacing.dy, cfg.target_dx, cfg.target_dy,
                                                   cfg.image_interp_order);
    const Image2<float> shaped = shape_to_patch(res, out.record, pad);
    for (int r = 0; r < cfg.patch_rows; ++r)
      for (int c = 0; c < cfg.patch_cols; ++c) out.image.data(s, r, c) = shaped(r, c);

    if (mask) {
      const Image2<std::uint8_t> mslice = mask_slice_extract(*mask, s);
      Image2<std::uint8_t> mres;
      if (mask->schema.max_id() <= 1) {
        mres = resample_mask_slice(mslice, volume.spacing.dx, volume.spacing.dy, cfg.target_dx,
                                   cfg.target_dy, cfg.mask_interp_order, cfg.mask_threshold);
      } else {
        mres = resample_label_slice(mslice, mask->schema, volume.spacing.dx, volume.spacing.dy,
                                    cfg.target_dx, cfg.target_dy, cfg.mask_interp_order);
      }
      const Image2<std::uint8_t> mshaped = shape_to_patch<std::uint8_t>(mres, out.record, 0);
      for (int r = 0; r < cfg.patch_rows; ++r)
        for (int c = 0; c < cfg.patch_cols; ++c) out.mask->data(s, r, c) = mshaped(r, c);
    }
  }
  return out;
}

namespace {

LabelMask restore_impl(const LabelMask& pred, const CropPadRecord& record,
                       const Spacing& original_spacing, int original_rows, int original_cols,
                       const PreprocessConfig& cfg) {
  if (pred.rows() != record.patch_rows || pred.cols() != record.patch_cols)
    fail(ErrorKind::Shape, "prediction extents do not match the preprocessing record");

  LabelMask out;
  out.schema = pred.schema;
  out.data = LabelGrid(pred.slices(), original_rows, original_cols);
  for (int s = 0; s < pred.slices(); ++s) {
    Image2<std::uint8_t> patch(pred.rows(), pred.cols());
    for (int r = 0; r < pred.rows(); ++r)
      for (int c = 0; c < pred.cols(); ++c) patch(r, c) = pred.data(s, r, c);

    const Image2<std::uint8_t> unshaped = invert_patch<std::uint8_t>(patch, record, 0);
    // Back from the target pitch to the original pitch. Extents are forced to
    // the original ones; the rounding in resampled_extent is reversible here
    // because `unshaped` came from the original grid.
    Image2<std::uint8_t> orig;
    if (original_spacing.dx == cfg.target_dx && original_spacing.dy == cfg.target_dy) {
      orig = unshaped;
    } else {
      orig = resample_mask_slice(unshaped, cfg.target_dx, cfg.target_dy,
                                 cfg.target_dx * unshaped.rows() / original_rows,
                                 cfg.target_dy * unshaped.cols() / original_cols,
                                 cfg.mask_interp_order, cfg.mask_threshold);
      if (orig.rows() != original_rows || orig.cols() != original_cols)
        fail(ErrorKind::Runtime, "inverse resampling did not restore the original extents");
    }
    for (int r = 0; r < original_rows; ++r)
      for (int c = 0; c < original_cols; ++c) out.data(s, r, c) = orig(r, c);
  }
  return out;
}

}  // namespace

LabelMask restore_prediction(const LabelMask& pred, const PreprocessedCase& geometry,
                             const PreprocessConfig& cfg) {
  return restore_impl(pred, geometry.record, geometry.original_spacing, geometry.original_rows,
                      geometry.original_cols, cfg);
}

LabelMask restore_prediction(const LabelMask& pred, const CaseSidecar& sidecar,
                             const PreprocessConfig& cfg) {
  return restore_impl(pred, sidecar.record, sidecar.original_spacing, sidecar.original_rows,
                      sidecar.original_cols, cfg);
}

void save_sidecar(const CaseSidecar& sc, const std::filesystem::path& path) {
  json doc;
  doc["case_id"] = sc.case_id;
  doc["crop_pad"] = {{"orig_rows", sc.record.orig_rows},   {"orig_cols", sc.record.orig_cols},
                     {"patch_rows", sc.record.patch_rows}, {"patch_cols", sc.record.patch_cols},
                     {"orig_row0", sc.record.orig_row0},   {"orig_col0", sc.record.orig_col0},
                     {"patch_row0", sc.record.patch_row0}, {"patch_col0", sc.record.patch_col0},
                     {"span_rows", sc.record.span_rows},   {"span_cols", sc.record.span_cols}};
  doc["original_spacing"] = {{"dz", sc.original_spacing.dz},
                             {"dx", sc.original_spacing.dx},
                             {"dy", sc.original_spacing.dy}};
  doc["original_rows"] = sc.original_rows;
  doc["original_cols"] = sc.original_cols;
  doc["fingerprint"] = {{"p_low", sc.fingerprint.p_low},
                        {"p_high", sc.fingerprint.p_high},
                        {"mean", sc.fingerprint.mean},
                        {"std", sc.fingerprint.stddev}};
  io::atomic_write_text(path, doc.dump(2) + "\n");
}

CaseSidecar load_sidecar(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, "cannot parse sidecar " + path.string() + ": " + e.what());
  }
  CaseSidecar sc;
  try {
    sc.case_id = doc.at("case_id").get<std::string>();
    const auto& cp = doc.at("crop_pad");
    sc.record.orig_rows = cp.at("orig_rows").get<int>();
    sc.record.orig_cols = cp.at("orig_cols").get<int>();
    sc.record.patch_rows = cp.at("patch_rows").get<int>();
    sc.record.patch_cols = cp.at("patch_cols").get<int>();
    sc.record.orig_row0 = cp.at("orig_row0").get<int>();
    sc.record.orig_col0 = cp.at("orig_col0").get<int>();
    sc.record.patch_row0 = cp.at("patch_row0").get<int>();
    sc.record.patch_col0 = cp.at("patch_col0").get<int>();
    sc.record.span_rows = cp.at("span_rows").get<int>();
    sc.record.span_cols = cp.at("span_cols").get<int>();
    const auto& sp = doc.at("original_spacing");
    sc.original_spacing = {sp.at("dz").get<double>(), sp.at("dx").get<double>(),
                           sp.at("dy").get<double>()};
    sc.original_rows = doc.at("original_rows").get<int>();
    sc.original_cols = doc.at("original_cols").get<int>();
    const auto& fp = doc.at("fingerprint");
    sc.fingerprint.p_low = fp.at("p_low").get<double>();
    sc.fingerprint.p_high = fp.at("p_high").get<double>();
    sc.fingerprint.mean = fp.at("mean").get<double>();
    sc.fingerprint.stddev = fp.at("std").get<double>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, "sidecar " + path.string() + " is missing required fields: " + e.what());
  }
  return sc;
}

std::filesystem::path prep_image_path(const std::filesystem::path& dir, const std::string& id) {
  return dir / (id + "_img.nii.gz");
}
std::filesystem::path prep_mask_path(const std::filesystem::path& dir, const std::string& id) {
  return dir / (id + "_mask.nii.gz");
}
std::filesystem::path prep_sidecar_path(const std::filesystem::path& dir, const std::string& id) {
  return dir / (id + ".json");
}

}  // namespace stroke::prep
