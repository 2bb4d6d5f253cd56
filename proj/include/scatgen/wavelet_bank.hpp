#pragma once

#include <vector>

namespace scatgen {

/// Mother-wavelet constants. The defaults are the standard Morlet
/// parameterization for dyadic scattering banks: envelope width 0.8,
/// center frequency 3*pi/4 on the first axis, elliptical slant 4/Q.
struct MorletParams {
  double sigma = 0.8;
  double xi = 2.35619449019234492885;  // 3*pi/4
  double slant_numerator = 4.0;        // slant = slant_numerator / Q
};

/// Multiscale, multi-orientation Morlet bank plus Gaussian low-pass,
/// all held as frequency responses on the periodized grid.
///
/// For this family the frequency responses are real-valued (the spatial
/// filters are the complex analytic wavelets), so each filter is stored as
/// a real grid_size x grid_size array. Wavelet (l, q), 1 <= l <= J,
/// 0 <= q < Q, is the mother dilated by 2^(l-1) and rotated by q*pi/Q;
/// l = 1 is the finest scale, centered at frequency 3*pi/4.
///
/// Immutable after construction; safe for concurrent reads.
struct FilterBank {
  int J = 0;
  int Q = 0;
  int grid_size = 0;
  MorletParams morlet;

  /// J*Q frequency responses, index (l-1)*Q + q, row-major over bins.
  std::vector<std::vector<double>> wavelets;
  /// phi_J frequency response, unit gain at the zero bin.
  std::vector<double> lowpass;
  /// Measured Littlewood-Paley supremum after normalization.
  double lp_bound = 0.0;

  const std::vector<double>& wavelet(int l, int q) const;
  int n_wavelets() const { return J * Q; }
};

/// Builds the normalized bank. Filters are evaluated directly in the
/// frequency domain, periodized by summing over grid aliases; each wavelet
/// gets an exact zero-mean correction at the DC bin, and the whole bank is
/// rescaled by one global constant so the Littlewood-Paley supremum is <= 1.
///
/// Throws invalid_parameter_error unless J >= 1, Q >= 1, grid_size is a
/// power of two and grid_size >= 2^J.
FilterBank build_filter_bank(int J, int Q, int grid_size,
                             const MorletParams& morlet = {});

/// sup over frequencies of |phi_J|^2 + 1/2 * sum_{l,q} (|psi(w)|^2 + |psi(-w)|^2).
double littlewood_paley_bound(const FilterBank& bank);

/// inf of the same function: the frame lower bound, a snugness diagnostic.
double littlewood_paley_lower(const FilterBank& bank);

}  // namespace scatgen
