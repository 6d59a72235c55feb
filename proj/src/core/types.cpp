#include "stroke/core/types.hpp"

#include <cmath>
#include <set>

#include "stroke/core/error.hpp"

namespace stroke {

void Spacing::validate() const {
  for (double v : {dz, dx, dy}) {
    if (!(v > 0.0) || !std::isfinite(v))
      fail(ErrorKind::Contract, "spacing components must be strictly positive and finite");
  }
}

void Volume::validate() const {
  spacing.validate();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data.raw()[i]))
      fail(ErrorKind::Data, "volume '" + case_id + "' contains a non-finite voxel at linear index " +
                                std::to_string(i));
  }
}

bool LabelSchema::has(int id) const noexcept {
  for (const auto& e : labels)
    if (e.id == id) return true;
  return false;
}

const std::string* LabelSchema::name_of(int id) const noexcept {
  for (const auto& e : labels)
    if (e.id == id) return &e.name;
  return nullptr;
}

int LabelSchema::max_id() const noexcept {
  int m = 0;
  for (const auto& e : labels) m = std::max(m, e.id);
  return m;
}

void LabelSchema::validate() const {
  std::set<int> seen;
  bool background = false;
  for (const auto& e : labels) {
    if (e.id < 0) fail(ErrorKind::Schema, "label ids must be non-negative");
    if (!seen.insert(e.id).second)
      fail(ErrorKind::Schema, "duplicate label id " + std::to_string(e.id));
    if (e.id == 0) {
      if (e.name != "background")
        fail(ErrorKind::Schema, "label id 0 must be named \"background\"");
      background = true;
    }
  }
  if (!background) fail(ErrorKind::Schema, "schema is missing background label id 0");
}

LabelSchema LabelSchema::binary(const std::string& foreground_name) {
  return LabelSchema{{{0, "background"}, {1, foreground_name}}};
}

void LabelMask::validate() const {
  schema.validate();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!schema.has(data.raw()[i]))
      fail(ErrorKind::Schema,
           "mask voxel value " + std::to_string(int(data.raw()[i])) + " is not in the label schema");
  }
}

const char* split_tag_name(SplitTag tag) {
  switch (tag) {
    case SplitTag::Train: return "train";
    case SplitTag::Val: return "val";
    case SplitTag::Test: return "test";
    case SplitTag::Unassigned: return "unassigned";
  }
  return "unassigned";
}

SplitTag split_tag_from_name(const std::string& name) {
  if (name == "train") return SplitTag::Train;
  if (name == "val") return SplitTag::Val;
  if (name == "test") return SplitTag::Test;
  if (name == "unassigned") return SplitTag::Unassigned;
  fail(ErrorKind::Config, "unknown split tag '" + name + "'");
}

}  // namespace stroke
