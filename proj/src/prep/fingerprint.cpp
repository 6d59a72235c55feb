#include "stroke/prep/fingerprint.hpp"

#include <algorithm>
#include <cmath>

#include "stroke/core/error.hpp"

namespace stroke::prep {

void DatasetFingerprint::validate() const {
  if (!(p_low <= p_high)) fail(ErrorKind::Contract, "fingerprint requires p_low <= p_high");
  if (!(stddev >= 0)) fail(ErrorKind::Contract, "fingerprint requires std >= 0");
  for (double v : {p_low, p_high, mean, stddev})
    if (!std::isfinite(v)) fail(ErrorKind::Contract, "fingerprint fields must be finite");
}

double percentile_linear(std::vector<float> values, double q) {
  if (values.empty()) fail(ErrorKind::Data, "percentile of an empty population");
  if (q < 0 || q > 1) fail(ErrorKind::Contract, "percentile q must be in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return static_cast<double>(values[lo]) +
         frac * (static_cast<double>(values[hi]) - static_cast<double>(values[lo]));
}

DatasetFingerprint compute_fingerprint(std::span<const Volume* const> volumes, double low_q,
                                       double high_q) {
  std::size_t total = 0;
  for (const Volume* v : volumes) total += v->data.size();
  if (total == 0) fail(ErrorKind::Data, "fingerprint population is empty");

  std::vector<float> pop;
  pop.reserve(total);
  for (const Volume* v : volumes)
    pop.insert(pop.end(), v->data.raw().begin(), v->data.raw().end());

  DatasetFingerprint fp;
  std::sort(pop.begin(), pop.end());
  auto at = [&](double q) {
    const double h = q * static_cast<double>(pop.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, pop.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return static_cast<double>(pop[lo]) +
           frac * (static_cast<double>(pop[hi]) - static_cast<double>(pop[lo]));
  };
  fp.p_low = at(low_q);
  fp.p_high = at(high_q);

  double sum = 0;
  for (float v : pop) sum += std::clamp(static_cast<double>(v), fp.p_low, fp.p_high);
  fp.mean = sum / static_cast<double>(pop.size());

  double ss = 0;
  for (float v : pop) {
    const double d = std::clamp(static_cast<double>(v), fp.p_low, fp.p_high) - fp.mean;
    ss += d * d;
  }
  fp.stddev = std::sqrt(ss / static_cast<double>(pop.size()));
  return fp;
}

DatasetFingerprint compute_fingerprint(const std::vector<Volume>& volumes, double low_q,
                                       double high_q) {
  std::vector<const Volume*> ptrs;
  ptrs.reserve(volumes.size());
  for (const auto& v : volumes) ptrs.push_back(&v);
  return compute_fingerprint(std::span<const Volume* const>(ptrs), low_q, high_q);
}

}  // namespace stroke::prep
