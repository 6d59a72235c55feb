#include "stroke/io/manifest.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <json.hpp>

#include "stroke/core/error.hpp"
#include "stroke/core/rng.hpp"
#include "stroke/io/atomic_file.hpp"

namespace stroke::io {

using nlohmann::json;

const CaseRecord* DatasetManifest::find(const std::string& case_id) const {
  for (const auto& c : cases)
    if (c.case_id == case_id) return &c;
  return nullptr;
}

void DatasetManifest::validate(bool check_files) const {
  label_schema.validate();
  std::set<std::string> ids;
  for (const auto& c : cases) {
    if (c.case_id.empty()) fail(ErrorKind::Config, "manifest contains a case with an empty id");
    if (!ids.insert(c.case_id).second)
      fail(ErrorKind::Config, "duplicate case_id '" + c.case_id + "' in manifest");
    if (c.fold && *c.fold < 0)
      fail(ErrorKind::Config, "case '" + c.case_id + "' has a negative fold index");
    if (check_files) {
      if (!std::filesystem::exists(resolve(c.image_path)))
        fail(ErrorKind::Data, "case '" + c.case_id + "': image file missing: " +
                                  resolve(c.image_path).string());
      if (c.mask_path && !std::filesystem::exists(resolve(*c.mask_path)))
        fail(ErrorKind::Data,
             "case '" + c.case_id + "': mask file missing: " + resolve(*c.mask_path).string());
    }
  }
}

DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files) {
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, "cannot parse manifest " + path.string() + ": " + e.what());
  }

  DatasetManifest m;
  m.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  try {
    m.dataset_name = doc.at("dataset_name").get<std::string>();
    m.seed = doc.value("seed", std::uint64_t{0});
    for (const auto& l : doc.at("label_schema"))
      m.label_schema.labels.push_back({l.at("id").get<int>(), l.at("name").get<std::string>()});
    for (const auto& c : doc.at("cases")) {
      CaseRecord rec;
      rec.case_id = c.at("case_id").get<std::string>();
      rec.image_path = c.at("image").get<std::string>();
      if (c.contains("mask") && !c.at("mask").is_null())
        rec.mask_path = std::filesystem::path(c.at("mask").get<std::string>());
      if (c.contains("fold") && !c.at("fold").is_null()) rec.fold = c.at("fold").get<int>();
      if (c.contains("split")) rec.split = split_tag_from_name(c.at("split").get<std::string>());
      m.cases.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, "manifest " + path.string() + " is missing required fields: " + e.what());
  }
  m.validate(check_files);
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  manifest.validate(false);
  json doc;
  doc["dataset_name"] = manifest.dataset_name;
  doc["seed"] = manifest.seed;
  doc["label_schema"] = json::array();
  for (const auto& l : manifest.label_schema.labels)
    doc["label_schema"].push_back({{"id", l.id}, {"name", l.name}});
  doc["cases"] = json::array();
  for (const auto& c : manifest.cases) {
    json jc;
    jc["case_id"] = c.case_id;
    jc["image"] = c.image_path.generic_string();
    if (c.mask_path) jc["mask"] = c.mask_path->generic_string();
    if (c.fold) jc["fold"] = *c.fold;
    if (c.split != SplitTag::Unassigned) jc["split"] = split_tag_name(c.split);
    doc["cases"].push_back(std::move(jc));
  }
  atomic_write_text(path, doc.dump(2) + "\n");
}

DatasetManifest assign_folds(const DatasetManifest& manifest, int k, std::uint64_t seed) {
  if (k < 2) fail(ErrorKind::Config, "fold count must be >= 2, got " + std::to_string(k));
  if (manifest.cases.empty()) fail(ErrorKind::Config, "cannot assign folds to an empty manifest");

  std::vector<std::string> ids;
  ids.reserve(manifest.cases.size());
  for (const auto& c : manifest.cases) ids.push_back(c.case_id);
  std::sort(ids.begin(), ids.end());

  SplitMix64 rng(seed);
  rng.shuffle(ids);

  std::map<std::string, int> fold_of;
  for (std::size_t i = 0; i < ids.size(); ++i) fold_of[ids[i]] = static_cast<int>(i % k);

  DatasetManifest out = manifest;
  out.seed = seed;
  for (auto& c : out.cases) c.fold = fold_of.at(c.case_id);
  return out;
}

}  // namespace stroke::io
