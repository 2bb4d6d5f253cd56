#include "scatgen/fft.hpp"

#include <cmath>

#include "scatgen/errors.hpp"

namespace scatgen {

namespace {
constexpr double kPi = 3.14159265358979323846;

bool is_pow2(int n) { return n >= 1 && (n & (n - 1)) == 0; }
}  // namespace

Fft::Fft(int n) : n_(n) {
  if (!is_pow2(n)) throw invalid_parameter_error("fft size must be a power of two");
  log2n_ = 0;
  while ((1 << log2n_) < n) ++log2n_;

  rev_.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    int r = 0;
    for (int b = 0; b < log2n_; ++b) r |= ((i >> b) & 1) << (log2n_ - 1 - b);
    rev_[static_cast<std::size_t>(i)] = r;
  }

  tw_.resize(static_cast<std::size_t>(n > 1 ? n : 2));
  for (int half = 1; half < n; half <<= 1) {
    for (int j = 0; j < half; ++j) {
      const double ang = -kPi * static_cast<double>(j) / static_cast<double>(half);
      tw_[static_cast<std::size_t>(half + j)] = cplx(std::cos(ang), std::sin(ang));
    }
  }
}

void Fft::transform(cplx* a, bool inverse) const {
  for (int i = 0; i < n_; ++i) {
    const int r = rev_[static_cast<std::size_t>(i)];
    if (i < r) std::swap(a[i], a[r]);
  }
  for (int half = 1; half < n_; half <<= 1) {
    const int len = half << 1;
    for (int base = 0; base < n_; base += len) {
      for (int j = 0; j < half; ++j) {
        cplx w = tw_[static_cast<std::size_t>(half + j)];
        if (inverse) w = std::conj(w);
        const cplx u = a[base + j];
        const cplx v = a[base + j + half] * w;
        a[base + j] = u + v;
        a[base + j + half] = u - v;
      }
    }
  }
  if (inverse) {
    const double s = 1.0 / static_cast<double>(n_);
    for (int i = 0; i < n_; ++i) a[i] *= s;
  }
}

void Fft::forward(cplx* a) const { transform(a, false); }
void Fft::inverse(cplx* a) const { transform(a, true); }

void Fft::rows(cplx* a, bool inverse) const {
  for (int y = 0; y < n_; ++y) transform(a + static_cast<std::ptrdiff_t>(y) * n_, inverse);
}

void Fft::cols(cplx* a, bool inverse) const {
  std::vector<cplx> col(static_cast<std::size_t>(n_));
  for (int x = 0; x < n_; ++x) {
    for (int y = 0; y < n_; ++y) col[static_cast<std::size_t>(y)] = a[static_cast<std::ptrdiff_t>(y) * n_ + x];
    transform(col.data(), inverse);
    for (int y = 0; y < n_; ++y) a[static_cast<std::ptrdiff_t>(y) * n_ + x] = col[static_cast<std::size_t>(y)];
  }
}

void Fft::forward2d(cplx* a) const {
  rows(a, false);
  cols(a, false);
}

void Fft::inverse2d(cplx* a) const {
  rows(a, true);
  cols(a, true);
}

}  // namespace scatgen
