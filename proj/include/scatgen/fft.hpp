#pragma once

#include <complex>
#include <vector>

namespace scatgen {

using cplx = std::complex<double>;

/// Iterative radix-2 complex FFT for power-of-two sizes. A plan precomputes
/// the bit-reversal permutation and twiddle factors for one length and can
/// be reused across any number of transforms; plans are immutable and safe
/// for concurrent use.
class Fft {
 public:
  explicit Fft(int n);

  int size() const { return n_; }

  /// In-place forward DFT (negative-exponent convention), no scaling.
  void forward(cplx* a) const;
  /// In-place inverse DFT, scaled by 1/n.
  void inverse(cplx* a) const;

  /// 2-D transforms on a row-major n x n buffer.
  void forward2d(cplx* a) const;
  void inverse2d(cplx* a) const;

 private:
  void transform(cplx* a, bool inverse) const;
  void rows(cplx* a, bool inverse) const;
  void cols(cplx* a, bool inverse) const;

  int n_ = 0;
  int log2n_ = 0;
  std::vector<int> rev_;
  // tw_[half + j] = exp(-i*pi*j/half) for half = 1,2,4,..,n/2.
  std::vector<cplx> tw_;
};

}  // namespace scatgen
