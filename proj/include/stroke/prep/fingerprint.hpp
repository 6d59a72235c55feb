#pragma once

#include <span>
#include <vector>

#include "stroke/core/types.hpp"

namespace stroke::prep {

// Dataset-wide intensity statistics driving CT normalization. Percentiles
// use linear interpolation between closest ranks; mean/std are taken over
// the population after clipping to [p_low, p_high] (population std).
struct DatasetFingerprint {
  double p_low = 0;    // 0.5th percentile
  double p_high = 0;   // 99.5th percentile
  double mean = 0;
  double stddev = 0;

  void validate() const;
};

// q in [0, 1]; values need not be pre-sorted.
double percentile_linear(std::vector<float> values, double q);

// Fingerprint over every voxel of the given volumes (the configured
// population is whole-volume, not foreground-only).
DatasetFingerprint compute_fingerprint(std::span<const Volume* const> volumes,
                                       double low_q = 0.005, double high_q = 0.995);
DatasetFingerprint compute_fingerprint(const std::vector<Volume>& volumes,
                                       double low_q = 0.005, double high_q = 0.995);

}  // namespace stroke::prep
