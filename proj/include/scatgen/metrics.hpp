#pragma once

#include <utility>

#include "scatgen/image.hpp"
#include "scatgen/tensor.hpp"

namespace scatgen {

/// Mean absolute error over all entries plus its subgradient
/// sign(x_hat - x) / N, with sign(0) = 0.
template <typename T>
std::pair<double, Tensor<T>> l1_loss(const Tensor<T>& x_hat, const Tensor<T>& x) {
  x_hat.check_same_shape(x, "l1_loss");
  const std::size_t n = x_hat.size();
  Tensor<T> grad = x_hat;
  double loss = 0.0;
  const T inv_n = static_cast<T>(1.0 / static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const T d = x_hat.data[i] - x.data[i];
    loss += std::abs(static_cast<double>(d));
    grad.data[i] = d > T(0) ? inv_n : (d < T(0) ? -inv_n : T(0));
  }
  return {loss / static_cast<double>(n), std::move(grad)};
}

/// Mean squared error between an image and a model output clamped to [0,1].
/// Both must share (height, width, channels).
double mse_clamped(const Image& reference, const Image& candidate);

/// PSNR in dB with unit peak: 10*log10(1/MSE) on clamped values; +infinity
/// when the MSE is exactly zero.
double psnr(const Image& reference, const Image& candidate);

/// Formats PSNR for CSV output; infinity serializes as "inf".
std::string format_psnr(double psnr_db);

}  // namespace scatgen
