#pragma once

#include "scatgen/tensor.hpp"

namespace scatgen {

/// The layer zoo is exactly what the generator needs: dense, ReLU, 2x
/// bilinear upsampling, and 7x7 same-size convolution with half-sample
/// symmetric padding. Every forward has a matching hand-derived
/// reverse-mode backward. All loops run in a fixed order, so results are
/// bit-reproducible for fixed inputs.

constexpr int kConvKernel = 7;
constexpr int kConvPad = 3;

// ---- ReLU -----------------------------------------------------------------

template <typename T>
void relu_inplace(Tensor<T>& t);

/// grad_in = grad_out where the recorded output is positive, else 0.
template <typename T>
void relu_backward(const Tensor<T>& output, const Tensor<T>& grad_out,
                   Tensor<T>& grad_in);

// ---- Dense ----------------------------------------------------------------

/// x: [batch, in], w: [in, out], bias: [out] -> y: [batch, out].
template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& w,
                        const Tensor<T>& bias);

template <typename T>
void dense_backward(const Tensor<T>& x, const Tensor<T>& w,
                    const Tensor<T>& grad_out, Tensor<T>& grad_w,
                    Tensor<T>& grad_bias, Tensor<T>* grad_x);

// ---- Bilinear 2x upsampling -------------------------------------------------

/// Output pixel (i, j) samples the input at ((i+0.5)/2 - 0.5, (j+0.5)/2 - 0.5)
/// with edge-clamped bilinear taps; spatial dims double.
template <typename T>
Tensor<T> bilinear_upsample2x(const Tensor<T>& t);

/// Transpose of the upsampling: scatters output grads onto the input taps.
template <typename T>
Tensor<T> bilinear_upsample2x_backward(const Tensor<T>& grad_out, int in_h,
                                       int in_w);

// ---- 7x7 same convolution with symmetric padding ----------------------------

/// t: [batch, h, w, c_in], kernel: [7, 7, c_in, c_out] flat, bias: [c_out].
/// Cross-correlation convention; the border is padded by 3 with half-sample
/// symmetric reflection (edge pixel duplicated: ..c b a | a b c..).
template <typename T>
Tensor<T> conv2d_symmetric(const Tensor<T>& t, const Tensor<T>& kernel,
                           const Tensor<T>& bias);

template <typename T>
void conv2d_symmetric_backward(const Tensor<T>& t, const Tensor<T>& kernel,
                               const Tensor<T>& grad_out, Tensor<T>& grad_kernel,
                               Tensor<T>& grad_bias, Tensor<T>* grad_in);

/// Reflected index for half-sample symmetric padding (iterated for tiny n).
inline int reflect_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -1 - i;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

}  // namespace scatgen
