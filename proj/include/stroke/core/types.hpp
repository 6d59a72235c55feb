#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "stroke/core/grid.hpp"

namespace stroke {

// Physical voxel pitch in millimeters. dz is the slice thickness, dx/dy the
// in-plane pitch along the row/col axes.
struct Spacing {
  double dz = 1.0;
  double dx = 1.0;
  double dy = 1.0;

  void validate() const;
  bool operator==(const Spacing&) const = default;
};

// A scalar CT volume in Hounsfield units (float32 internally regardless of
// the on-disk type), indexed (slice, row, col).
struct Volume {
  VoxelGrid data;
  Spacing spacing;
  std::string case_id;

  int slices() const noexcept { return data.slices(); }
  int rows() const noexcept { return data.rows(); }
  int cols() const noexcept { return data.cols(); }

  // Checks spacing and that every voxel is finite.
  void validate() const;
};

struct LabelEntry {
  int id = 0;
  std::string name;
  bool operator==(const LabelEntry&) const = default;
};

// Ordered list of label ids; id 0 is always the background.
struct LabelSchema {
  std::vector<LabelEntry> labels;

  bool has(int id) const noexcept;
  const std::string* name_of(int id) const noexcept;
  int max_id() const noexcept;
  void validate() const;
  bool operator==(const LabelSchema&) const = default;

  static LabelSchema binary(const std::string& foreground_name = "lesion");
};

// Integer segmentation grid aligned with a Volume.
struct LabelMask {
  LabelGrid data;
  LabelSchema schema;

  int slices() const noexcept { return data.slices(); }
  int rows() const noexcept { return data.rows(); }
  int cols() const noexcept { return data.cols(); }

  // Every voxel must carry an id present in the schema.
  void validate() const;
};

enum class SplitTag { Train, Val, Test, Unassigned };

const char* split_tag_name(SplitTag tag);
SplitTag split_tag_from_name(const std::string& name);

struct CaseRecord {
  std::string case_id;
  std::filesystem::path image_path;
  std::optional<std::filesystem::path> mask_path;
  SplitTag split = SplitTag::Unassigned;
  std::optional<int> fold;
};

}  // namespace stroke
