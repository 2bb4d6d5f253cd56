#include "scatgen/wavelet_bank.hpp"

#include <cmath>
#include <string>

#include "scatgen/errors.hpp"

namespace scatgen {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;
constexpr int kAliasRange = 2;  // sum over (2*kAliasRange+1)^2 grid aliases

bool is_pow2(int n) { return n >= 1 && (n & (n - 1)) == 0; }

/// Frequency bin k of an N-grid mapped to its principal value in [-pi, pi).
double bin_freq(int k, int n) {
  const int half = n / 2;
  const int s = (k >= half) ? k - n : k;
  return kTwoPi * static_cast<double>(s) / static_cast<double>(n);
}

/// Anisotropic Gaussian bump in the wavelet's own coordinates.
double gabor(double v1, double v2, double center, double sigma, double slant) {
  const double dr = v1 - center;
  const double da = v2 / slant;
  return std::exp(-0.5 * sigma * sigma * (dr * dr + da * da));
}

/// Periodized Gabor response at frequency (w1, w2): the continuous bump is
/// evaluated at scale * R(-theta) * (w + 2*pi*a) and summed over aliases a.
double periodized_gabor(double w1, double w2, double scale, double cos_t,
                        double sin_t, double center, double sigma,
                        double slant) {
  double acc = 0.0;
  for (int a1 = -kAliasRange; a1 <= kAliasRange; ++a1) {
    for (int a2 = -kAliasRange; a2 <= kAliasRange; ++a2) {
      const double u1 = w1 + kTwoPi * a1;
      const double u2 = w2 + kTwoPi * a2;
      const double v1 = scale * (cos_t * u1 + sin_t * u2);
      const double v2 = scale * (-sin_t * u1 + cos_t * u2);
      acc += gabor(v1, v2, center, sigma, slant);
    }
  }
  return acc;
}

}  // namespace

const std::vector<double>& FilterBank::wavelet(int l, int q) const {
  return wavelets[static_cast<std::size_t>((l - 1) * Q + q)];
}

FilterBank build_filter_bank(int J, int Q, int grid_size,
                             const MorletParams& morlet) {
  if (J < 1) throw invalid_parameter_error("J must be >= 1");
  if (Q < 1) throw invalid_parameter_error("Q must be >= 1");
  if (!is_pow2(grid_size))
    throw invalid_parameter_error("grid_size must be a power of two, got " +
                                  std::to_string(grid_size));
  if (grid_size < (1 << J))
    throw invalid_parameter_error(
        "grid_size must be >= 2^J: " + std::to_string(grid_size) + " < " +
        std::to_string(1 << J));

  FilterBank bank;
  bank.J = J;
  bank.Q = Q;
  bank.grid_size = grid_size;
  bank.morlet = morlet;

  const int n = grid_size;
  const std::size_t bins = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
  const double slant = morlet.slant_numerator / static_cast<double>(Q);

  bank.wavelets.reserve(static_cast<std::size_t>(J) * Q);
  for (int l = 1; l <= J; ++l) {
    const double scale = static_cast<double>(1 << (l - 1));
    for (int q = 0; q < Q; ++q) {
      const double theta = 3.14159265358979323846 * q / Q;
      const double ct = std::cos(theta);
      const double st = std::sin(theta);

      // Zero-mean correction: beta is the ratio of the two periodized bumps
      // at the zero bin, so the corrected response vanishes there exactly.
      const double dc_shifted = periodized_gabor(0.0, 0.0, scale, ct, st,
                                                 morlet.xi, morlet.sigma, slant);
      const double dc_centered = periodized_gabor(0.0, 0.0, scale, ct, st,
                                                  0.0, morlet.sigma, slant);
      const double beta = dc_shifted / dc_centered;

      std::vector<double> filt(bins);
      for (int k1 = 0; k1 < n; ++k1) {
        const double w1 = bin_freq(k1, n);
        for (int k2 = 0; k2 < n; ++k2) {
          const double w2 = bin_freq(k2, n);
          const double main = periodized_gabor(w1, w2, scale, ct, st,
                                               morlet.xi, morlet.sigma, slant);
          const double corr = periodized_gabor(w1, w2, scale, ct, st, 0.0,
                                               morlet.sigma, slant);
          filt[static_cast<std::size_t>(k1) * n + k2] = main - beta * corr;
        }
      }
      bank.wavelets.push_back(std::move(filt));
    }
  }

  // Gaussian low-pass one octave below the coarsest wavelet, exact unit DC.
  const double sigma_j = morlet.sigma * static_cast<double>(1 << J);
  bank.lowpass.resize(bins);
  for (int k1 = 0; k1 < n; ++k1) {
    const double w1 = bin_freq(k1, n);
    for (int k2 = 0; k2 < n; ++k2) {
      const double w2 = bin_freq(k2, n);
      double acc = 0.0;
      for (int a1 = -kAliasRange; a1 <= kAliasRange; ++a1) {
        for (int a2 = -kAliasRange; a2 <= kAliasRange; ++a2) {
          const double u1 = (w1 + kTwoPi * a1) * sigma_j;
          const double u2 = (w2 + kTwoPi * a2) * sigma_j;
          acc += std::exp(-0.5 * (u1 * u1 + u2 * u2));
        }
      }
      bank.lowpass[static_cast<std::size_t>(k1) * n + k2] = acc;
    }
  }
  const double dc = bank.lowpass[0];
  for (double& v : bank.lowpass) v /= dc;

  // One global constant on the wavelet family enforces the contraction
  // bound tightly while keeping the low-pass at unit DC gain: choose the
  // largest c with phi^2 + c^2 * W <= 1 everywhere, where W is the
  // symmetrized wavelet energy. Scaling the low-pass too cannot satisfy
  // both constraints whenever the raw supremum sits away from DC.
  double c2 = 1e300;
  for (int k1 = 0; k1 < n; ++k1) {
    const int m1 = (n - k1) % n;
    for (int k2 = 0; k2 < n; ++k2) {
      const int m2 = (n - k2) % n;
      const std::size_t idx = static_cast<std::size_t>(k1) * n + k2;
      const std::size_t mirror = static_cast<std::size_t>(m1) * n + m2;
      double wav = 0.0;
      for (const auto& w : bank.wavelets)
        wav += 0.5 * (w[idx] * w[idx] + w[mirror] * w[mirror]);
      if (wav <= 1e-300) continue;
      const double lp = bank.lowpass[idx];
      const double budget = 1.0 - lp * lp;
      if (budget / wav < c2) c2 = budget / wav;
    }
  }
  const double scale_w = std::sqrt(c2);
  for (auto& w : bank.wavelets)
    for (double& v : w) v *= scale_w;

  bank.lp_bound = littlewood_paley_bound(bank);
  return bank;
}

namespace {

template <typename Reduce>
double littlewood_paley_scan(const FilterBank& bank, double init, Reduce red) {
  const int n = bank.grid_size;
  double result = init;
  for (int k1 = 0; k1 < n; ++k1) {
    const int m1 = (n - k1) % n;
    for (int k2 = 0; k2 < n; ++k2) {
      const int m2 = (n - k2) % n;
      const std::size_t idx = static_cast<std::size_t>(k1) * n + k2;
      const std::size_t mirror = static_cast<std::size_t>(m1) * n + m2;
      const double lp = bank.lowpass[idx];
      double sum = lp * lp;
      for (const auto& w : bank.wavelets) {
        sum += 0.5 * (w[idx] * w[idx] + w[mirror] * w[mirror]);
      }
      result = red(result, sum);
    }
  }
  return result;
}

}  // namespace

double littlewood_paley_bound(const FilterBank& bank) {
  return littlewood_paley_scan(bank, 0.0,
                               [](double a, double b) { return a > b ? a : b; });
}

double littlewood_paley_lower(const FilterBank& bank) {
  return littlewood_paley_scan(
      bank, 1e300, [](double a, double b) { return a < b ? a : b; });
}

}  // namespace scatgen
