#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stroke/core/error.hpp"
#include "stroke/core/rng.hpp"
#include "stroke/io/phantom.hpp"
#include "stroke/prep/fingerprint.hpp"
#include "stroke/prep/pipeline.hpp"
#include "stroke/prep/preprocess.hpp"

using namespace stroke;
using namespace stroke::prep;

namespace {

Volume volume_from(const std::vector<float>& vals, int ns, int nr, int nc) {
  Volume v;
  v.case_id = "t";
  v.spacing = {1.0, 1.0, 1.0};
  v.data = VoxelGrid(ns, nr, nc);
  REQUIRE(vals.size() == v.data.size());
  std::copy(vals.begin(), vals.end(), v.data.raw().begin());
  return v;
}

// Reference percentile: linear interpolation between closest ranks over an
// explicitly sorted copy. Kept separate from the implementation on purpose.
double oracle_percentile(std::vector<double> sorted_values, double q) {
  std::sort(sorted_values.begin(), sorted_values.end());
  const double h = q * (sorted_values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted_values.size() - 1);
  return sorted_values[lo] + (h - lo) * (sorted_values[hi] - sorted_values[lo]);
}

}  // namespace

TEST_CASE("fingerprint of a constant volume") {
  const Volume v = volume_from(std::vector<float>(27, 7.f), 3, 3, 3);
  const DatasetFingerprint fp = compute_fingerprint({v});
  CHECK(fp.p_low == doctest::Approx(7.0));
  CHECK(fp.p_high == doctest::Approx(7.0));
  CHECK(fp.mean == doctest::Approx(7.0));
  CHECK(fp.stddev == doctest::Approx(0.0));
}

TEST_CASE("fingerprint percentiles match the rank-interpolation oracle") {
  std::vector<float> vals(1000);
  std::iota(vals.begin(), vals.end(), 0.f);
  // Scramble so sortedness is not an accident of construction.
  SplitMix64 rng(3);
  rng.shuffle(vals);

  const Volume v = volume_from(vals, 10, 10, 10);
  const DatasetFingerprint fp = compute_fingerprint({v});

  std::vector<double> oracle_vals(vals.begin(), vals.end());
  CHECK(fp.p_low == doctest::Approx(oracle_percentile(oracle_vals, 0.005)).epsilon(1e-12));
  CHECK(fp.p_high == doctest::Approx(oracle_percentile(oracle_vals, 0.995)).epsilon(1e-12));
  CHECK(fp.p_low == doctest::Approx(4.995));
  CHECK(fp.p_high == doctest::Approx(994.005));
}

TEST_CASE("fingerprint is invariant under dataset duplication") {
  // Quantized intensities (integer HU, as CT produces) sit in plateaus of
  // repeated values, where rank-interpolated percentiles are duplication
  // invariant. For continuous populations the invariance only holds up to
  // the local inter-rank gap.
  std::vector<float> vals;
  for (int k = 0; k < 200; ++k)
    for (int rep = 0; rep < 40; ++rep) vals.push_back(static_cast<float>(k - 50));
  SplitMix64 rng(8);
  rng.shuffle(vals);
  const Volume v = volume_from(vals, 20, 20, 20);

  const DatasetFingerprint one = compute_fingerprint({v});
  const DatasetFingerprint two = compute_fingerprint({v, v});
  CHECK(one.p_low == doctest::Approx(two.p_low).epsilon(1e-9));
  CHECK(one.p_high == doctest::Approx(two.p_high).epsilon(1e-9));
  CHECK(one.mean == doctest::Approx(two.mean).epsilon(1e-9));
  CHECK(one.stddev == doctest::Approx(two.stddev).epsilon(1e-9));
}

TEST_CASE("fingerprint of an empty population is a data error") {
  std::vector<const Volume*> none;
  CHECK_THROWS_AS(compute_fingerprint(std::span<const Volume* const>(none)), Error);
}

TEST_CASE("ct_normalize arithmetic") {
  PreprocessConfig cfg;
  DatasetFingerprint fp{-100.0, 300.0, 40.0, 80.0};

  const Volume v = volume_from({120.f, 40.f, 500.f, 300.f}, 1, 2, 2);
  const Volume out = ct_normalize(v, fp, cfg);
  CHECK(out.data(0, 0, 0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(out.data(0, 0, 1) == doctest::Approx(0.0));
  // Above p_high saturates to the p_high value.
  CHECK(out.data(0, 1, 0) == out.data(0, 1, 1));
}

TEST_CASE("ct_normalize of a constant volume at the mean is all zeros") {
  PreprocessConfig cfg;
  DatasetFingerprint fp{7.0, 7.0, 7.0, 0.0};
  const Volume v = volume_from(std::vector<float>(8, 7.f), 2, 2, 2);
  const Volume out = ct_normalize(v, fp, cfg);
  for (float x : out.data.raw()) CHECK(x == 0.0f);
}

TEST_CASE("ct_normalize is monotone non-decreasing") {
  SplitMix64 rng(21);
  DatasetFingerprint fp{-20.0, 180.0, 60.0, 45.0};
  PreprocessConfig cfg;
  for (int trial = 0; trial < 50; ++trial) {
    const float a = static_cast<float>(rng.next_gaussian() * 120);
    const float b = static_cast<float>(rng.next_gaussian() * 120);
    const Volume v = volume_from({a, b, 0, 0}, 1, 2, 2);
    const Volume out = ct_normalize(v, fp, cfg);
    if (a <= b)
      CHECK(out.data(0, 0, 0) <= out.data(0, 0, 1));
    else
      CHECK(out.data(0, 0, 0) >= out.data(0, 0, 1));
  }
}

TEST_CASE("normalized training population is centered") {
  // With the fingerprint computed on the same population, the normalized
  // clipped population has mean 0 and std = std/(std+eps).
  SplitMix64 rng(13);
  std::vector<float> vals(6 * 16 * 16);
  for (auto& x : vals) x = static_cast<float>(rng.next_gaussian() * 25 + 35);
  const Volume v = volume_from(vals, 6, 16, 16);

  const DatasetFingerprint fp = compute_fingerprint({v});
  PreprocessConfig cfg;
  const Volume out = ct_normalize(v, fp, cfg);

  double mean = 0;
  for (float x : out.data.raw()) mean += x;
  mean /= static_cast<double>(out.data.size());
  CHECK(std::abs(mean) < 1e-3);

  double ss = 0;
  for (float x : out.data.raw()) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(out.data.size()));
  CHECK(sd == doctest::Approx(fp.stddev / (fp.stddev + cfg.epsilon)).epsilon(1e-3));
}

TEST_CASE("resample identity short-circuit is bit-identical") {
  SplitMix64 rng(9);
  Image2<float> img(13, 17);
  for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = static_cast<float>(rng.next_gaussian());
  const Image2<float> out = resample_image_slice(img, 0.7, 0.7, 0.7, 0.7, 3);
  CHECK(out == img);

  Image2<std::uint8_t> m(13, 17);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.next_below(2);
  CHECK(resample_mask_slice(m, 0.7, 0.7, 0.7, 0.7) == m);
}

TEST_CASE("resample extent arithmetic: 512x512 at 0.5mm -> 256x256 at 1mm") {
  Image2<float> img(512, 512, 1.f);
  const Image2<float> out = resample_image_slice(img, 0.5, 0.5, 1.0, 1.0, 3);
  CHECK(out.rows() == 256);
  CHECK(out.cols() == 256);
  // Constant field stays constant.
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.data()[i] == doctest::Approx(1.f));
}

TEST_CASE("resampling collapsing an axis to zero is a configuration error") {
  Image2<float> img(2, 2, 1.f);
  CHECK_THROWS_AS(resample_image_slice(img, 1.0, 1.0, 100.0, 100.0, 3), Error);
}

TEST_CASE("linear and cubic resampling reproduce a linear ramp") {
  // f(r, c) = 3 + 2r + 5c sampled on a 16x16 grid at 1mm, upsampled to 0.5mm.
  const int n = 16;
  Image2<float> img(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) img(r, c) = 3.f + 2.f * r + 5.f * c;

  for (int order : {1, 3}) {
    const Image2<float> out = resample_image_slice(img, 1.0, 1.0, 0.5, 0.5, order);
    REQUIRE(out.rows() == 2 * n);
    REQUIRE(out.cols() == 2 * n);
    // Output pixel (i, j) sits at source coordinate ((i+0.5)/2 - 0.5); where
    // the interpolation stencil stays off the replicated border (source
    // coordinate in [1, n-2], i.e. 3 output pixels in) the interpolant must
    // equal the ramp exactly.
    for (int i = 3; i < 2 * n - 3; ++i)
      for (int j = 3; j < 2 * n - 3; ++j) {
        const double rs = (i + 0.5) * 0.5 - 0.5;
        const double cs = (j + 0.5) * 0.5 - 0.5;
        const double expected = 3.0 + 2.0 * rs + 5.0 * cs;
        CHECK(out(i, j) == doctest::Approx(expected).epsilon(1e-5));
      }
  }
}

TEST_CASE("mask resampling keeps values binary and geometry sane") {
  // Centered 10x10 square in 100x100 at 0.5mm; downsample to 1mm.
  Image2<std::uint8_t> m(100, 100, 0);
  for (int r = 45; r < 55; ++r)
    for (int c = 45; c < 55; ++c) m(r, c) = 1;

  const Image2<std::uint8_t> out = resample_mask_slice(m, 0.5, 0.5, 1.0, 1.0);
  REQUIRE(out.rows() == 50);
  REQUIRE(out.cols() == 50);
  int count = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK((out.data()[i] == 0 || out.data()[i] == 1));
    count += out.data()[i];
  }
  // ~5x5 square: within +-2 rows/cols of 25.
  CHECK(count >= 3 * 3);
  CHECK(count <= 7 * 7);

  // All-ones mask survives any spacing change.
  Image2<std::uint8_t> ones(20, 20, 1);
  const auto up = resample_mask_slice(ones, 1.0, 1.0, 0.7, 0.7);
  for (std::size_t i = 0; i < up.size(); ++i) CHECK(up.data()[i] == 1);

  // Non-binary input is a contract error.
  Image2<std::uint8_t> multi(4, 4, 2);
  CHECK_THROWS_AS(resample_mask_slice(multi, 1.0, 1.0, 2.0, 2.0), Error);
}

TEST_CASE("multi-label resampling picks the argmax label") {
  LabelSchema schema{{{0, "background"}, {1, "a"}, {2, "b"}}};
  Image2<std::uint8_t> m(40, 40, 0);
  for (int r = 4; r < 16; ++r)
    for (int c = 4; c < 16; ++c) m(r, c) = 1;
  for (int r = 24; r < 36; ++r)
    for (int c = 24; c < 36; ++c) m(r, c) = 2;

  const Image2<std::uint8_t> out = resample_label_slice(m, schema, 0.5, 0.5, 1.0, 1.0);
  REQUIRE(out.rows() == 20);
  CHECK(out(5, 5) == 1);
  CHECK(out(15, 15) == 2);
  CHECK(out(10, 10) == 0);
}

TEST_CASE("shape_to_patch: pad, crop, and inverses") {
  // Exact size: identity.
  {
    Image2<float> img(512, 512, 2.f);
    const CropPadRecord rec = make_crop_pad_record(512, 512, 512, 512);
    CHECK(rec.is_identity());
    const auto out = shape_to_patch(img, rec, -1.f);
    CHECK(out == img);
  }
  // 500 -> 512: symmetric 6/6 padding.
  {
    Image2<float> img(500, 500);
    for (int r = 0; r < 500; ++r)
      for (int c = 0; c < 500; ++c) img(r, c) = float(r * 500 + c);
    const CropPadRecord rec = make_crop_pad_record(500, 500, 512, 512);
    CHECK(rec.patch_row0 == 6);
    CHECK(rec.patch_col0 == 6);
    const auto out = shape_to_patch(img, rec, -7.f);
    CHECK(out(0, 0) == -7.f);
    CHECK(out(6, 6) == img(0, 0));
    const auto back = invert_patch(out, rec, 0.f);
    CHECK(back == img);
  }
  // 600 -> 512: center crop at offset (44, 44); re-embedding restores offsets.
  {
    Image2<float> img(600, 600);
    for (int r = 0; r < 600; ++r)
      for (int c = 0; c < 600; ++c) img(r, c) = float(r * 600 + c);
    const CropPadRecord rec = make_crop_pad_record(600, 600, 512, 512);
    CHECK(rec.orig_row0 == 44);
    CHECK(rec.orig_col0 == 44);
    const auto out = shape_to_patch(img, rec, 0.f);
    CHECK(out(0, 0) == img(44, 44));
    const auto back = invert_patch(out, rec, -1.f);
    CHECK(back(43, 43) == -1.f);  // cropped-away ring is filled
    CHECK(back(44, 44) == img(44, 44));
    CHECK(back(555, 555) == img(555, 555));
  }
}

TEST_CASE("preprocess_case round trips predictions to the original grid") {
  io::PhantomSpec spec;
  spec.slices = 4;
  spec.rows = 60;
  spec.cols = 60;
  spec.spacing = {5.0, 0.9, 0.9};
  spec.brain = {10.0, 27.0, 27.0, 9.5, 22.0, 22.0};
  spec.lesion = {10.0, 27.0, 27.0, 5.0, 9.0, 9.0};
  spec.noise_std = 1.0;
  spec.seed = 5;
  auto [vol, mask] = io::generate_phantom(spec);

  const DatasetFingerprint fp = compute_fingerprint({vol});
  PreprocessConfig cfg;
  cfg.patch_rows = 64;
  cfg.patch_cols = 64;

  const PreprocessedCase prep = preprocess_case(vol, &mask, fp, cfg);
  CHECK(prep.image.rows() == 64);
  CHECK(prep.image.cols() == 64);
  CHECK(prep.image.slices() == 4);
  REQUIRE(prep.mask.has_value());

  // Mask voxels stayed binary through resampling.
  for (auto v : prep.mask->data.raw()) CHECK((v == 0 || v == 1));

  // Treat the preprocessed ground truth as a "prediction" and map it back:
  // it should land close to the original mask (boundary wobble only).
  const LabelMask restored = restore_prediction(*prep.mask, prep, cfg);
  REQUIRE(restored.data.same_extents(mask.data));
  std::uint64_t inter = 0, a = 0, b = 0;
  for (std::size_t i = 0; i < mask.data.size(); ++i) {
    const bool x = mask.data.raw()[i] == 1;
    const bool y = restored.data.raw()[i] == 1;
    inter += (x && y);
    a += x;
    b += y;
  }
  REQUIRE(a > 0);
  const double dice = 2.0 * inter / static_cast<double>(a + b);
  CHECK(dice > 0.9);
}

TEST_CASE("sidecar round trip") {
  CaseSidecar sc;
  sc.case_id = "c3";
  sc.record = make_crop_pad_record(54, 54, 64, 64);
  sc.original_spacing = {5.0, 0.9, 0.9};
  sc.original_rows = 60;
  sc.original_cols = 60;
  sc.fingerprint = {-10.0, 80.0, 33.0, 12.5};

  const auto dir = std::filesystem::temp_directory_path() / "stroke_prep_sidecar_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "c3.json";
  save_sidecar(sc, path);
  const CaseSidecar back = load_sidecar(path);
  CHECK(back.case_id == "c3");
  CHECK(back.record.orig_rows == 54);
  CHECK(back.record.patch_rows == 64);
  CHECK(back.original_spacing == Spacing{5.0, 0.9, 0.9});
  CHECK(back.fingerprint.mean == doctest::Approx(33.0));
  std::filesystem::remove_all(dir);
}
