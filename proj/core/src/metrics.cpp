#include "imask/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "imask/errors.hpp"

namespace imask {

double psnr(ConstSpan x, ConstSpan ref, double peak) {
  if (x.size() != ref.size()) throw DimensionError("psnr", ref.size(), x.size());
  if (!(peak > 0.0)) throw ConfigError("psnr: peak must be positive");
  double err = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) err += (x[i] - ref[i]) * (x[i] - ref[i]);
  if (err == 0.0) return kPsnrCap;
  const double value = 10.0 * std::log10(peak * peak * static_cast<double>(x.size()) / err);
  return std::min(value, kPsnrCap);
}

double rel_dist(ConstSpan x, ConstSpan ref) {
  if (x.size() != ref.size()) throw DimensionError("rel_dist", ref.size(), x.size());
  double num = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) num += (x[i] - ref[i]) * (x[i] - ref[i]);
  const double den = dot(ref, ref);
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return num / den;
}

}  // namespace imask
