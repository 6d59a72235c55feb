#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "stroke/core/types.hpp"
#include "stroke/io/nifti.hpp"
#include "stroke/prep/fingerprint.hpp"
#include "stroke/prep/preprocess.hpp"

namespace stroke::prep {

// A case after normalization, in-plane resampling to the target pitch and
// patch shaping. Slices stay independent; dz is untouched.
struct PreprocessedCase {
  Volume image;                       // normalized, patch-shaped
  std::optional<LabelMask> mask;      // binary, patch-shaped
  CropPadRecord record;               // resampled-grid <-> patch mapping
  Spacing original_spacing;
  int original_rows = 0, original_cols = 0;
  DatasetFingerprint fingerprint;
  io::NiftiMeta meta;                 // carried through verbatim
};

PreprocessedCase preprocess_case(const Volume& volume, const LabelMask* mask,
                                 const DatasetFingerprint& fp, const PreprocessConfig& cfg,
                                 const io::NiftiMeta* meta = nullptr);

// Maps a prediction on the preprocessed grid back to the original geometry:
// undo the patch shaping, then resample to the original in-plane pitch.
LabelMask restore_prediction(const LabelMask& pred, const PreprocessedCase& geometry,
                             const PreprocessConfig& cfg);

// Same, driven by a sidecar loaded from disk.
struct CaseSidecar {
  std::string case_id;
  CropPadRecord record;
  Spacing original_spacing;
  int original_rows = 0, original_cols = 0;
  DatasetFingerprint fingerprint;
};

void save_sidecar(const CaseSidecar& sidecar, const std::filesystem::path& path);
CaseSidecar load_sidecar(const std::filesystem::path& path);

LabelMask restore_prediction(const LabelMask& pred, const CaseSidecar& sidecar,
                             const PreprocessConfig& cfg);

// Standard artifact names inside a preprocessed-cache directory.
std::filesystem::path prep_image_path(const std::filesystem::path& dir, const std::string& id);
std::filesystem::path prep_mask_path(const std::filesystem::path& dir, const std::string& id);
std::filesystem::path prep_sidecar_path(const std::filesystem::path& dir, const std::string& id);

}  // namespace stroke::prep
