#include "scatgen/layers.hpp"

#include <cmath>
#include <vector>

namespace scatgen {

namespace {

/// Copies one batch item into a zero-padded (h+6, w+6, c) buffer with
/// half-sample symmetric borders, so the conv hot loop has no edge branches.
template <typename T>
void pad_symmetric(const Tensor<T>& t, int b, std::vector<T>& padded) {
  const int h = t.shape[1], w = t.shape[2], c = t.shape[3];
  const int pw = w + 2 * kConvPad;
  for (int y = -kConvPad; y < h + kConvPad; ++y) {
    const int sy = reflect_index(y, h);
    T* dst = padded.data() +
             (static_cast<std::size_t>(y + kConvPad) * pw) * c;
    for (int x = -kConvPad; x < w + kConvPad; ++x) {
      const int sx = reflect_index(x, w);
      const T* src = &t.data[((static_cast<std::size_t>(b) * h + sy) * w + sx) * c];
      for (int ch = 0; ch < c; ++ch) dst[ch] = src[ch];
      dst += c;
    }
  }
}

/// Innermost conv kernels on restrict pointers so the channel loops
/// vectorize; everything hot funnels through these.
template <typename T>
inline void axpy_rows(const T* __restrict in, const T* __restrict weights,
                      T* __restrict acc, int n_in, int n_out) {
  const std::size_t stride = static_cast<std::size_t>(n_out);
  int i = 0;
  for (; i + 4 <= n_in; i += 4) {
    const T v0 = in[i], v1 = in[i + 1], v2 = in[i + 2], v3 = in[i + 3];
    const T* __restrict w0 = weights + static_cast<std::size_t>(i) * stride;
    const T* __restrict w1 = w0 + stride;
    const T* __restrict w2 = w1 + stride;
    const T* __restrict w3 = w2 + stride;
    for (int o = 0; o < n_out; ++o)
      acc[o] += v0 * w0[o] + v1 * w1[o] + v2 * w2[o] + v3 * w3[o];
  }
  for (; i < n_in; ++i) {
    const T v = in[i];
    const T* __restrict w = weights + static_cast<std::size_t>(i) * stride;
    for (int o = 0; o < n_out; ++o) acc[o] += v * w[o];
  }
}

/// grad_kernel[ci][o] += in[ci] * g[o] for one tap position.
template <typename T>
inline void outer_accum(const T* __restrict in, const T* __restrict g,
                        T* __restrict gk, int n_in, int n_out) {
  const std::size_t stride = static_cast<std::size_t>(n_out);
  int i = 0;
  for (; i + 4 <= n_in; i += 4) {
    const T v0 = in[i], v1 = in[i + 1], v2 = in[i + 2], v3 = in[i + 3];
    T* __restrict r0 = gk + static_cast<std::size_t>(i) * stride;
    T* __restrict r1 = r0 + stride;
    T* __restrict r2 = r1 + stride;
    T* __restrict r3 = r2 + stride;
    for (int o = 0; o < n_out; ++o) {
      const T gv = g[o];
      r0[o] += v0 * gv;
      r1[o] += v1 * gv;
      r2[o] += v2 * gv;
      r3[o] += v3 * gv;
    }
  }
  for (; i < n_in; ++i) {
    const T v = in[i];
    T* __restrict row = gk + static_cast<std::size_t>(i) * stride;
    for (int o = 0; o < n_out; ++o) row[o] += v * g[o];
  }
}

/// grad_in[ci] += sum_o kt[o][ci] * g[o] with kt the transposed kernel tap.
template <typename T>
inline void axpy_transposed(const T* __restrict kt, const T* __restrict g,
                            T* __restrict gi, int n_in, int n_out) {
  const std::size_t stride = static_cast<std::size_t>(n_in);
  int o = 0;
  for (; o + 4 <= n_out; o += 4) {
    const T g0 = g[o], g1 = g[o + 1], g2 = g[o + 2], g3 = g[o + 3];
    const T* __restrict r0 = kt + static_cast<std::size_t>(o) * stride;
    const T* __restrict r1 = r0 + stride;
    const T* __restrict r2 = r1 + stride;
    const T* __restrict r3 = r2 + stride;
    for (int i = 0; i < n_in; ++i)
      gi[i] += r0[i] * g0 + r1[i] * g1 + r2[i] * g2 + r3[i] * g3;
  }
  for (; o < n_out; ++o) {
    const T gv = g[o];
    const T* __restrict row = kt + static_cast<std::size_t>(o) * stride;
    for (int i = 0; i < n_in; ++i) gi[i] += row[i] * gv;
  }
}

/// 1-D tap table for the 2x bilinear upsampling: out[i] pulls from input
/// indices lo/hi with weights (1-frac)/frac.
struct UpTap {
  int lo, hi;
  double w_lo, w_hi;
};

inline UpTap up_tap(int i, int n_in) {
  const double s = (static_cast<double>(i) + 0.5) / 2.0 - 0.5;
  double fl = std::floor(s);
  int lo = static_cast<int>(fl);
  int hi = lo + 1;
  const double frac = s - fl;
  if (lo < 0) lo = 0;
  if (hi > n_in - 1) hi = n_in - 1;
  return UpTap{lo, hi, 1.0 - frac, frac};
}

}  // namespace

template <typename T>
void relu_inplace(Tensor<T>& t) {
  for (T& v : t.data)
    if (v < T(0)) v = T(0);
}

template <typename T>
void relu_backward(const Tensor<T>& output, const Tensor<T>& grad_out,
                   Tensor<T>& grad_in) {
  output.check_same_shape(grad_out, "relu_backward");
  grad_in = grad_out;
  for (std::size_t i = 0; i < output.data.size(); ++i)
    if (!(output.data[i] > T(0))) grad_in.data[i] = T(0);
}

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& w,
                        const Tensor<T>& bias) {
  const int batch = x.shape[0], n_in = x.shape[1], n_out = w.shape[1];
  if (w.shape[0] != n_in || bias.shape[0] != n_out)
    throw dimension_mismatch_error("dense_forward: weight shapes");
  Tensor<T> y = Tensor<T>::zeros2(batch, n_out);
  for (int b = 0; b < batch; ++b) {
    T* out = y.data.data() + static_cast<std::size_t>(b) * n_out;
    for (int o = 0; o < n_out; ++o) out[o] = bias.data[static_cast<std::size_t>(o)];
    axpy_rows(x.data.data() + static_cast<std::size_t>(b) * n_in, w.data.data(),
              out, n_in, n_out);
  }
  return y;
}

template <typename T>
void dense_backward(const Tensor<T>& x, const Tensor<T>& w,
                    const Tensor<T>& grad_out, Tensor<T>& grad_w,
                    Tensor<T>& grad_bias, Tensor<T>* grad_x) {
  const int batch = x.shape[0], n_in = x.shape[1], n_out = w.shape[1];
  if (grad_out.shape[0] != batch || grad_out.shape[1] != n_out)
    throw dimension_mismatch_error("dense_backward: grad shape");
  grad_w = Tensor<T>::zeros2(n_in, n_out);
  grad_bias = Tensor<T>::zeros1(n_out);

  for (int b = 0; b < batch; ++b) {
    const T* g = grad_out.data.data() + static_cast<std::size_t>(b) * n_out;
    for (int o = 0; o < n_out; ++o) grad_bias.data[static_cast<std::size_t>(o)] += g[o];
    const T* in = x.data.data() + static_cast<std::size_t>(b) * n_in;
    for (int i = 0; i < n_in; ++i) {
      const T v = in[i];
      T* gw = grad_w.data.data() + static_cast<std::size_t>(i) * n_out;
      for (int o = 0; o < n_out; ++o) gw[o] += v * g[o];
    }
  }
  if (grad_x) {
    *grad_x = Tensor<T>::zeros2(batch, n_in);
    for (int b = 0; b < batch; ++b) {
      const T* g = grad_out.data.data() + static_cast<std::size_t>(b) * n_out;
      T* gx = grad_x->data.data() + static_cast<std::size_t>(b) * n_in;
      for (int i = 0; i < n_in; ++i) {
        const T* wrow = w.data.data() + static_cast<std::size_t>(i) * n_out;
        T acc = T(0);
        for (int o = 0; o < n_out; ++o) acc += wrow[o] * g[o];
        gx[i] = acc;
      }
    }
  }
}

template <typename T>
Tensor<T> bilinear_upsample2x(const Tensor<T>& t) {
  const int batch = t.shape[0], h = t.shape[1], w = t.shape[2], c = t.shape[3];
  Tensor<T> out = Tensor<T>::zeros4(batch, 2 * h, 2 * w, c);
  std::vector<UpTap> ty(static_cast<std::size_t>(2 * h)), tx(static_cast<std::size_t>(2 * w));
  for (int i = 0; i < 2 * h; ++i) ty[static_cast<std::size_t>(i)] = up_tap(i, h);
  for (int j = 0; j < 2 * w; ++j) tx[static_cast<std::size_t>(j)] = up_tap(j, w);

  for (int b = 0; b < batch; ++b) {
    for (int i = 0; i < 2 * h; ++i) {
      const UpTap& a = ty[static_cast<std::size_t>(i)];
      for (int j = 0; j < 2 * w; ++j) {
        const UpTap& d = tx[static_cast<std::size_t>(j)];
        const T* p00 = &t.data[((static_cast<std::size_t>(b) * h + a.lo) * w + d.lo) * c];
        const T* p01 = &t.data[((static_cast<std::size_t>(b) * h + a.lo) * w + d.hi) * c];
        const T* p10 = &t.data[((static_cast<std::size_t>(b) * h + a.hi) * w + d.lo) * c];
        const T* p11 = &t.data[((static_cast<std::size_t>(b) * h + a.hi) * w + d.hi) * c];
        T* o = &out.data[((static_cast<std::size_t>(b) * 2 * h + i) * 2 * w + j) * c];
        const T w00 = static_cast<T>(a.w_lo * d.w_lo);
        const T w01 = static_cast<T>(a.w_lo * d.w_hi);
        const T w10 = static_cast<T>(a.w_hi * d.w_lo);
        const T w11 = static_cast<T>(a.w_hi * d.w_hi);
        for (int ch = 0; ch < c; ++ch)
          o[ch] = w00 * p00[ch] + w01 * p01[ch] + w10 * p10[ch] + w11 * p11[ch];
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> bilinear_upsample2x_backward(const Tensor<T>& grad_out, int in_h,
                                       int in_w) {
  const int batch = grad_out.shape[0], c = grad_out.shape[3];
  if (grad_out.shape[1] != 2 * in_h || grad_out.shape[2] != 2 * in_w)
    throw dimension_mismatch_error("upsample backward: grad shape");
  Tensor<T> g = Tensor<T>::zeros4(batch, in_h, in_w, c);
  std::vector<UpTap> ty(static_cast<std::size_t>(2 * in_h)), tx(static_cast<std::size_t>(2 * in_w));
  for (int i = 0; i < 2 * in_h; ++i) ty[static_cast<std::size_t>(i)] = up_tap(i, in_h);
  for (int j = 0; j < 2 * in_w; ++j) tx[static_cast<std::size_t>(j)] = up_tap(j, in_w);

  for (int b = 0; b < batch; ++b) {
    for (int i = 0; i < 2 * in_h; ++i) {
      const UpTap& a = ty[static_cast<std::size_t>(i)];
      for (int j = 0; j < 2 * in_w; ++j) {
        const UpTap& d = tx[static_cast<std::size_t>(j)];
        const T* go = &grad_out.data[((static_cast<std::size_t>(b) * 2 * in_h + i) * 2 * in_w + j) * c];
        T* g00 = &g.data[((static_cast<std::size_t>(b) * in_h + a.lo) * in_w + d.lo) * c];
        T* g01 = &g.data[((static_cast<std::size_t>(b) * in_h + a.lo) * in_w + d.hi) * c];
        T* g10 = &g.data[((static_cast<std::size_t>(b) * in_h + a.hi) * in_w + d.lo) * c];
        T* g11 = &g.data[((static_cast<std::size_t>(b) * in_h + a.hi) * in_w + d.hi) * c];
        const T w00 = static_cast<T>(a.w_lo * d.w_lo);
        const T w01 = static_cast<T>(a.w_lo * d.w_hi);
        const T w10 = static_cast<T>(a.w_hi * d.w_lo);
        const T w11 = static_cast<T>(a.w_hi * d.w_hi);
        for (int ch = 0; ch < c; ++ch) {
          const T gv = go[ch];
          g00[ch] += w00 * gv;
          g01[ch] += w01 * gv;
          g10[ch] += w10 * gv;
          g11[ch] += w11 * gv;
        }
      }
    }
  }
  return g;
}

template <typename T>
Tensor<T> conv2d_symmetric(const Tensor<T>& t, const Tensor<T>& kernel,
                           const Tensor<T>& bias) {
  const int batch = t.shape[0], h = t.shape[1], w = t.shape[2], cin = t.shape[3];
  const int cout = kernel.shape[3];
  if (kernel.shape[0] != kConvKernel || kernel.shape[1] != kConvKernel ||
      kernel.shape[2] != cin)
    throw dimension_mismatch_error("conv2d: kernel shape");
  if (bias.shape[0] != cout) throw dimension_mismatch_error("conv2d: bias shape");

  Tensor<T> out = Tensor<T>::zeros4(batch, h, w, cout);
  const int ph = h + 2 * kConvPad, pw = w + 2 * kConvPad;
  std::vector<T> padded(static_cast<std::size_t>(ph) * pw * cin);

  for (int b = 0; b < batch; ++b) {
    pad_symmetric(t, b, padded);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        T* __restrict acc = &out.data[((static_cast<std::size_t>(b) * h + y) * w + x) * cout];
        for (int o = 0; o < cout; ++o) acc[o] = bias.data[static_cast<std::size_t>(o)];
        for (int ky = 0; ky < kConvKernel; ++ky) {
          // One padded row segment covers all 7 kx taps contiguously.
          const T* prow = padded.data() +
                          (static_cast<std::size_t>(y + ky) * pw + x) * cin;
          const T* krow = kernel.data.data() +
                          static_cast<std::size_t>(ky) * kConvKernel * cin * cout;
          axpy_rows(prow, krow, acc, kConvKernel * cin, cout);
        }
      }
    }
  }
  return out;
}

template <typename T>
void conv2d_symmetric_backward(const Tensor<T>& t, const Tensor<T>& kernel,
                               const Tensor<T>& grad_out, Tensor<T>& grad_kernel,
                               Tensor<T>& grad_bias, Tensor<T>* grad_in) {
  const int batch = t.shape[0], h = t.shape[1], w = t.shape[2], cin = t.shape[3];
  const int cout = kernel.shape[3];
  if (grad_out.shape[0] != batch || grad_out.shape[1] != h ||
      grad_out.shape[2] != w || grad_out.shape[3] != cout)
    throw dimension_mismatch_error("conv2d backward: grad shape");
  grad_kernel = Tensor<T>::zeros4(kConvKernel, kConvKernel, cin, cout);
  grad_bias = Tensor<T>::zeros1(cout);
  if (grad_in) *grad_in = Tensor<T>::zeros4(batch, h, w, cin);

  const int ph = h + 2 * kConvPad, pw = w + 2 * kConvPad;
  const std::size_t tap_len = static_cast<std::size_t>(kConvKernel) * cin;
  std::vector<T> padded(static_cast<std::size_t>(ph) * pw * cin);
  std::vector<T> padded_grad;

  // Kernel transposed per row to [ky][cout][7*cin] so input-gradient
  // accumulation runs on unit strides.
  std::vector<T> kernel_t;
  if (grad_in) {
    kernel_t.resize(static_cast<std::size_t>(kConvKernel) * cout * tap_len);
    for (int ky = 0; ky < kConvKernel; ++ky)
      for (int kx = 0; kx < kConvKernel; ++kx)
        for (int ci = 0; ci < cin; ++ci)
          for (int o = 0; o < cout; ++o)
            kernel_t[(static_cast<std::size_t>(ky) * cout + o) * tap_len +
                     static_cast<std::size_t>(kx) * cin + ci] =
                kernel.data[((static_cast<std::size_t>(ky) * kConvKernel + kx) * cin + ci) * cout + o];
  }

  for (int b = 0; b < batch; ++b) {
    pad_symmetric(t, b, padded);
    if (grad_in) padded_grad.assign(static_cast<std::size_t>(ph) * pw * cin, T(0));

    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const T* g = &grad_out.data[((static_cast<std::size_t>(b) * h + y) * w + x) * cout];
        for (int o = 0; o < cout; ++o) grad_bias.data[static_cast<std::size_t>(o)] += g[o];
        for (int ky = 0; ky < kConvKernel; ++ky) {
          const std::size_t row_off = (static_cast<std::size_t>(y + ky) * pw + x) * cin;
          outer_accum(padded.data() + row_off, g,
                      grad_kernel.data.data() + static_cast<std::size_t>(ky) * tap_len * cout,
                      static_cast<int>(tap_len), cout);
          if (grad_in)
            axpy_transposed(kernel_t.data() + static_cast<std::size_t>(ky) * cout * tap_len,
                            g, padded_grad.data() + row_off,
                            static_cast<int>(tap_len), cout);
        }
      }
    }

    if (grad_in) {
      // Fold the padded-border gradients back through the reflection map.
      for (int y = -kConvPad; y < h + kConvPad; ++y) {
        const int sy = reflect_index(y, h);
        for (int x = -kConvPad; x < w + kConvPad; ++x) {
          const int sx = reflect_index(x, w);
          const T* src = padded_grad.data() +
                         (static_cast<std::size_t>(y + kConvPad) * pw +
                          static_cast<std::size_t>(x + kConvPad)) * cin;
          T* dst = &grad_in->data[((static_cast<std::size_t>(b) * h + sy) * w + sx) * cin];
          for (int ci = 0; ci < cin; ++ci) dst[ci] += src[ci];
        }
      }
    }
  }
}

#define SCATGEN_INSTANTIATE_LAYERS(T)                                          \
  template void relu_inplace<T>(Tensor<T>&);                                   \
  template void relu_backward<T>(const Tensor<T>&, const Tensor<T>&,           \
                                 Tensor<T>&);                                  \
  template Tensor<T> dense_forward<T>(const Tensor<T>&, const Tensor<T>&,      \
                                      const Tensor<T>&);                       \
  template void dense_backward<T>(const Tensor<T>&, const Tensor<T>&,          \
                                  const Tensor<T>&, Tensor<T>&, Tensor<T>&,    \
                                  Tensor<T>*);                                 \
  template Tensor<T> bilinear_upsample2x<T>(const Tensor<T>&);                 \
  template Tensor<T> bilinear_upsample2x_backward<T>(const Tensor<T>&, int,    \
                                                     int);                     \
  template Tensor<T> conv2d_symmetric<T>(const Tensor<T>&, const Tensor<T>&,   \
                                         const Tensor<T>&);                    \
  template void conv2d_symmetric_backward<T>(                                  \
      const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>&,        \
      Tensor<T>&, Tensor<T>*);

SCATGEN_INSTANTIATE_LAYERS(float)
SCATGEN_INSTANTIATE_LAYERS(double)

#undef SCATGEN_INSTANTIATE_LAYERS

}  // namespace scatgen
