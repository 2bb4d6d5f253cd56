#include "scatgen/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "scatgen/errors.hpp"

namespace scatgen {

double mse_clamped(const Image& reference, const Image& candidate) {
  if (reference.height != candidate.height || reference.width != candidate.width ||
      reference.channels != candidate.channels)
    throw dimension_mismatch_error("mse: image shapes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < reference.data.size(); ++i) {
    const double a = std::min(1.0, std::max(0.0, reference.data[i]));
    const double b = std::min(1.0, std::max(0.0, candidate.data[i]));
    const double d = a - b;
    s += d * d;
  }
  return s / static_cast<double>(reference.data.size());
}

double psnr(const Image& reference, const Image& candidate) {
  const double mse = mse_clamped(reference, candidate);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

std::string format_psnr(double psnr_db) {
  if (std::isinf(psnr_db)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", psnr_db);
  return buf;
}

}  // namespace scatgen
