#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "stroke/core/error.hpp"
#include "stroke/core/ops.hpp"
#include "stroke/core/rng.hpp"
#include "stroke/io/atomic_file.hpp"
#include "stroke/io/manifest.hpp"
#include "stroke/io/nifti.hpp"
#include "stroke/io/phantom.hpp"

using namespace stroke;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("stroke_io_" + std::to_string(SplitMix64(::getpid()).next_u64() >> 32) + "_" +
            std::to_string(rand()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

Volume random_volume(int ns, int nr, int nc, std::uint64_t seed) {
  Volume v;
  v.case_id = "case";
  v.spacing = {5.0, 0.75, 0.75};  // exactly representable in the float32 header
  v.data = VoxelGrid(ns, nr, nc);
  SplitMix64 rng(seed);
  for (auto& x : v.data.raw()) x = static_cast<float>(rng.next_gaussian() * 100.0);
  return v;
}

// Minimal hand-built NIfTI-1 header for reader tests.
std::vector<char> reference_header(std::int16_t datatype, std::int16_t ns, std::int16_t nr,
                                   std::int16_t nc, float pd1, float pd2, float pd3,
                                   const char* magic = "n+1") {
  std::vector<char> h(348, 0);
  std::int32_t size = 348;
  std::memcpy(h.data(), &size, 4);
  std::int16_t dim[8] = {3, ns, nr, nc, 1, 1, 1, 1};
  std::memcpy(h.data() + 40, dim, sizeof(dim));
  std::memcpy(h.data() + 70, &datatype, 2);
  std::int16_t bitpix = datatype == 2 ? 8 : (datatype == 4 ? 16 : 32);
  std::memcpy(h.data() + 72, &bitpix, 2);
  float pixdim[8] = {1.f, pd1, pd2, pd3, 0.f, 0.f, 0.f, 0.f};
  std::memcpy(h.data() + 76, pixdim, sizeof(pixdim));
  float vox_offset = 352.f;
  std::memcpy(h.data() + 108, &vox_offset, 4);
  float slope = 1.f, inter = 0.f;
  std::memcpy(h.data() + 112, &slope, 4);
  std::memcpy(h.data() + 116, &inter, 4);
  std::memcpy(h.data() + 344, magic, 4);
  return h;
}

void write_raw_file(const fs::path& p, const std::vector<char>& header,
                    const std::vector<char>& payload) {
  std::ofstream out(p, std::ios::binary);
  out.write(header.data(), header.size());
  const char zeros[4] = {0, 0, 0, 0};
  out.write(zeros, 4);
  out.write(payload.data(), payload.size());
}

}  // namespace

TEST_CASE("volume round trip within 1e-5, spacing exact") {
  TempDir tmp;
  const Volume v = random_volume(3, 10, 12, 99);
  for (const char* name : {"vol.nii", "vol.nii.gz"}) {
    const fs::path p = tmp.path / name;
    io::write_volume(v, p);
    const Volume back = io::read_volume(p, "case");
    REQUIRE(back.data.same_extents(v.data));
    CHECK(back.spacing == v.spacing);
    for (std::size_t i = 0; i < v.data.size(); ++i)
      CHECK(back.data.raw()[i] == doctest::Approx(v.data.raw()[i]).epsilon(1e-5));
  }
}

TEST_CASE("reference header pixdim maps to spacing {dz, dx, dy}") {
  TempDir tmp;
  const fs::path p = tmp.path / "ref.nii";
  const auto hdr = reference_header(16, 2, 3, 4, 1.0f, 0.45f, 0.45f);
  std::vector<char> payload(2 * 3 * 4 * sizeof(float), 0);
  write_raw_file(p, hdr, payload);

  const Volume v = io::read_volume(p);
  CHECK(v.spacing.dz == doctest::Approx(1.0));
  CHECK(v.spacing.dx == doctest::Approx(0.45));
  CHECK(v.spacing.dy == doctest::Approx(0.45));
  CHECK(v.slices() == 2);
  CHECK(v.rows() == 3);
  CHECK(v.cols() == 4);
}

TEST_CASE("bad magic is a format error, ni1 gets a dedicated message") {
  TempDir tmp;
  const std::vector<char> payload(8, 0);

  const fs::path bad = tmp.path / "bad.nii";
  write_raw_file(bad, reference_header(2, 1, 2, 2, 1, 1, 1, "xxx"), payload);
  CHECK_THROWS_WITH_AS(io::read_volume(bad), doctest::Contains("magic"), Error);

  const fs::path two_file = tmp.path / "pair.nii";
  write_raw_file(two_file, reference_header(2, 1, 2, 2, 1, 1, 1, "ni1"), payload);
  CHECK_THROWS_WITH_AS(io::read_volume(two_file), doctest::Contains("ni1"), Error);
}

TEST_CASE("unsupported datatype and NaN voxels are rejected") {
  TempDir tmp;
  const fs::path p = tmp.path / "f64.nii";
  auto hdr = reference_header(64, 1, 2, 2, 1, 1, 1);  // float64 code
  std::vector<char> payload(4 * 8, 0);
  write_raw_file(p, hdr, payload);
  try {
    io::read_volume(p);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Unsupported);
  }

  const fs::path nan_path = tmp.path / "nan.nii";
  std::vector<char> fpayload(4 * sizeof(float));
  float vals[4] = {1.f, std::numeric_limits<float>::quiet_NaN(), 3.f, 4.f};
  std::memcpy(fpayload.data(), vals, sizeof(vals));
  write_raw_file(nan_path, reference_header(16, 1, 2, 2, 1, 1, 1), fpayload);
  try {
    io::read_volume(nan_path);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Data);
  }
}

TEST_CASE("scl_slope and scl_inter are applied on volume read") {
  TempDir tmp;
  const fs::path p = tmp.path / "scaled.nii";
  auto hdr = reference_header(4, 1, 1, 2, 1, 1, 1);
  float slope = 2.f, inter = -10.f;
  std::memcpy(hdr.data() + 112, &slope, 4);
  std::memcpy(hdr.data() + 116, &inter, 4);
  std::vector<char> payload(2 * sizeof(std::int16_t));
  std::int16_t raw[2] = {5, -3};
  std::memcpy(payload.data(), raw, sizeof(raw));
  write_raw_file(p, hdr, payload);

  const Volume v = io::read_volume(p);
  CHECK(v.data(0, 0, 0) == doctest::Approx(0.0));
  CHECK(v.data(0, 0, 1) == doctest::Approx(-16.0));
}

TEST_CASE("mask round trip is bit exact and schema-checked") {
  TempDir tmp;
  LabelMask mask{LabelGrid(3, 6, 6), LabelSchema::binary()};
  SplitMix64 rng(5);
  for (auto& v : mask.data.raw()) v = static_cast<std::uint8_t>(rng.next_below(2));

  const fs::path p = tmp.path / "mask.nii.gz";
  io::write_mask(mask, p);
  const LabelMask back = io::read_mask(p, mask.schema);
  CHECK(back.data == mask.data);

  // Binary schema cannot absorb label 1..4 phantasms: value 1 is fine but a
  // schema missing id 1 must reject the file.
  LabelSchema bg_only{{{0, "background"}}};
  CHECK_THROWS_AS(io::read_mask(p, bg_only), Error);
}

TEST_CASE("five-label mask round trip preserves the label histogram") {
  TempDir tmp;
  LabelSchema schema{{{0, "background"},
                      {1, "clear_acute_infarct"},
                      {2, "remote_infarct"},
                      {3, "blurred_acute_infarct"},
                      {4, "infarct"}}};
  LabelMask mask{LabelGrid(4, 9, 9), schema};
  SplitMix64 rng(11);
  for (auto& v : mask.data.raw()) v = static_cast<std::uint8_t>(rng.next_below(5));

  std::map<int, std::uint64_t> before;
  for (auto v : mask.data.raw()) ++before[v];

  const fs::path p = tmp.path / "multi.nii";
  io::write_mask(mask, p);
  const LabelMask back = io::read_mask(p, schema);

  std::map<int, std::uint64_t> after;
  for (auto v : back.data.raw()) ++after[v];
  CHECK(before == after);
}

TEST_CASE("masks with float payload are a format error") {
  TempDir tmp;
  const fs::path p = tmp.path / "floatmask.nii";
  std::vector<char> payload(4 * sizeof(float), 0);
  write_raw_file(p, reference_header(16, 1, 2, 2, 1, 1, 1), payload);
  try {
    io::read_mask(p, LabelSchema::binary());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Format);
  }
}

TEST_CASE("assign_folds deals evenly and deterministically") {
  io::DatasetManifest m;
  m.dataset_name = "t";
  for (int i = 0; i < 10; ++i)
    m.cases.push_back({"case_" + std::to_string(i), "img.nii", std::nullopt});
  m.label_schema = LabelSchema::binary();

  const io::DatasetManifest folded = io::assign_folds(m, 5, 42);
  std::map<int, int> sizes;
  for (const auto& c : folded.cases) ++sizes[*c.fold];
  REQUIRE(sizes.size() == 5);
  for (const auto& [f, n] : sizes) CHECK(n == 2);

  // 11 cases: sizes {3,2,2,2,2} in some order.
  m.cases.push_back({"case_10", "img.nii", std::nullopt});
  const io::DatasetManifest folded11 = io::assign_folds(m, 5, 42);
  std::multiset<int> sizes11;
  std::map<int, int> count11;
  for (const auto& c : folded11.cases) ++count11[*c.fold];
  for (const auto& [f, n] : count11) sizes11.insert(n);
  CHECK(sizes11 == std::multiset<int>{2, 2, 2, 2, 3});

  // Input order must not matter.
  io::DatasetManifest shuffled = m;
  std::reverse(shuffled.cases.begin(), shuffled.cases.end());
  const io::DatasetManifest folded_rev = io::assign_folds(shuffled, 5, 42);
  for (const auto& c : folded11.cases) {
    const CaseRecord* r = folded_rev.find(c.case_id);
    REQUIRE(r != nullptr);
    CHECK(*r->fold == *c.fold);
  }

  CHECK_THROWS_AS(io::assign_folds(m, 1, 42), Error);
}

TEST_CASE("fold partition is exhaustive and exclusive") {
  for (int n : {3, 4, 5, 17, 50}) {
    io::DatasetManifest m;
    m.dataset_name = "t";
    m.label_schema = LabelSchema::binary();
    for (int i = 0; i < n; ++i)
      m.cases.push_back({"c" + std::to_string(i), "img.nii", std::nullopt});
    const io::DatasetManifest folded = io::assign_folds(m, 5, 7);

    int assigned = 0;
    std::map<int, int> sizes;
    for (const auto& c : folded.cases) {
      REQUIRE(c.fold.has_value());
      CHECK(*c.fold >= 0);
      CHECK(*c.fold < 5);
      ++assigned;
      ++sizes[*c.fold];
    }
    CHECK(assigned == n);  // exhaustive; exclusivity is structural (one fold per case)
    int lo = n, hi = 0;
    for (int f = 0; f < 5; ++f) {
      lo = std::min(lo, sizes.count(f) ? sizes[f] : 0);
      hi = std::max(hi, sizes.count(f) ? sizes[f] : 0);
    }
    CHECK(hi - lo <= 1);
  }
}

TEST_CASE("manifest JSON round trip and validation") {
  TempDir tmp;
  const Volume v = random_volume(2, 4, 4, 3);
  io::write_volume(v, tmp.path / "img.nii.gz");

  io::DatasetManifest m;
  m.dataset_name = "phantoms";
  m.seed = 17;
  m.label_schema = LabelSchema::binary();
  m.base_dir = tmp.path;
  m.cases.push_back({"c0", "img.nii.gz", std::nullopt, SplitTag::Train, 2});

  io::save_manifest(m, tmp.path / "manifest.json");
  const io::DatasetManifest back = io::load_manifest(tmp.path / "manifest.json");
  CHECK(back.dataset_name == "phantoms");
  CHECK(back.seed == 17);
  REQUIRE(back.cases.size() == 1);
  CHECK(back.cases[0].case_id == "c0");
  CHECK(back.cases[0].fold == 2);
  CHECK(back.cases[0].split == SplitTag::Train);

  // Duplicate ids rejected.
  io::DatasetManifest dup = m;
  dup.cases.push_back({"c0", "img.nii.gz", std::nullopt});
  CHECK_THROWS_AS(dup.validate(false), Error);

  // Missing file rejected at validation time.
  io::DatasetManifest missing = m;
  missing.cases[0].image_path = "nope.nii";
  CHECK_THROWS_AS(missing.validate(true), Error);
}

TEST_CASE("phantom: analytic values with zero noise") {
  io::PhantomSpec spec;
  spec.slices = 6;
  spec.rows = 32;
  spec.cols = 32;
  spec.spacing = {5.0, 1.0, 1.0};
  spec.brain = {15.0, 16.0, 16.0, 14.0, 14.0, 14.0};
  spec.lesion = {15.0, 16.0, 16.0, 5.0, 5.0, 5.0};
  spec.lesion_offset_hu = -10.0;
  spec.brain_hu = 35.0;
  spec.background_hu = 0.0;
  spec.noise_std = 0.0;

  const auto [vol, mask] = io::generate_phantom(spec);
  std::uint64_t lesion_count = 0;
  for (int s = 0; s < spec.slices; ++s)
    for (int r = 0; r < spec.rows; ++r)
      for (int c = 0; c < spec.cols; ++c) {
        if (mask.data(s, r, c) == 1) {
          CHECK(vol.data(s, r, c) == 25.0f);
          ++lesion_count;
        }
      }
  CHECK(lesion_count > 0);
  CHECK(lesion_count == foreground_voxel_count(mask, 1));
}

TEST_CASE("phantom: degenerate lesion is a spec error") {
  io::PhantomSpec spec;
  spec.brain = {20, 32, 32, 15, 20, 20};
  spec.lesion = {20, 32, 32, 0, 0, 0};
  CHECK_THROWS_AS(io::generate_phantom(spec), Error);

  io::PhantomSpec outside;
  outside.brain = {20, 32, 32, 10, 10, 10};
  outside.lesion = {20, 45, 32, 4, 4, 4};
  CHECK_THROWS_AS(io::generate_phantom(outside), Error);
}

TEST_CASE("phantom: voxelized lesion volume matches the analytic ellipsoid") {
  io::PhantomSpec spec;
  spec.slices = 24;
  spec.rows = 48;
  spec.cols = 48;
  spec.spacing = {1.0, 1.0, 1.0};
  spec.brain = {12.0, 24.0, 24.0, 11.0, 20.0, 20.0};
  spec.lesion = {12.0, 24.0, 24.0, 4.0, 6.0, 6.0};

  const auto [vol, mask] = io::generate_phantom(spec);
  const double analytic = 4.0 / 3.0 * 3.14159265358979323846 * 4.0 * 6.0 * 6.0;  // ~603.2
  const auto count = static_cast<double>(foreground_voxel_count(mask, 1));
  CHECK(count == doctest::Approx(analytic).epsilon(0.05));
}

TEST_CASE("phantom determinism: same spec, bit-identical output") {
  io::PhantomSpec spec;
  spec.slices = 4;
  spec.rows = 24;
  spec.cols = 24;
  spec.brain = {10.0, 12.0, 12.0, 9.0, 10.0, 10.0};
  spec.lesion = {10.0, 12.0, 12.0, 3.0, 4.0, 4.0};
  spec.noise_std = 3.0;
  spec.seed = 1234;

  const auto [v1, m1] = io::generate_phantom(spec);
  const auto [v2, m2] = io::generate_phantom(spec);
  CHECK(v1.data == v2.data);
  CHECK(m1.data == m2.data);
}
