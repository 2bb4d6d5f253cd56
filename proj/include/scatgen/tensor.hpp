#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "scatgen/errors.hpp"

namespace scatgen {

/// Dense row-major tensor of up to 4 axes in (batch, height, width,
/// channels) order. Unused trailing axes have extent 1.
template <typename T>
struct Tensor {
  std::array<int, 4> shape{1, 1, 1, 1};
  int ndim = 0;
  std::vector<T> data;

  Tensor() = default;

  static Tensor zeros1(int a) {
    Tensor t;
    t.ndim = 1;
    t.shape = {a, 1, 1, 1};
    t.data.assign(static_cast<std::size_t>(a), T(0));
    return t;
  }
  static Tensor zeros2(int a, int b) {
    Tensor t;
    t.ndim = 2;
    t.shape = {a, b, 1, 1};
    t.data.assign(static_cast<std::size_t>(a) * b, T(0));
    return t;
  }
  static Tensor zeros4(int a, int b, int c, int d) {
    Tensor t;
    t.ndim = 4;
    t.shape = {a, b, c, d};
    t.data.assign(static_cast<std::size_t>(a) * b * c * d, T(0));
    return t;
  }

  std::size_t size() const { return data.size(); }

  T& at2(int a, int b) { return data[static_cast<std::size_t>(a) * shape[1] + b]; }
  T at2(int a, int b) const { return data[static_cast<std::size_t>(a) * shape[1] + b]; }

  T& at4(int b, int y, int x, int c) {
    return data[((static_cast<std::size_t>(b) * shape[1] + y) * shape[2] + x) *
                    shape[3] +
                c];
  }
  T at4(int b, int y, int x, int c) const {
    return data[((static_cast<std::size_t>(b) * shape[1] + y) * shape[2] + x) *
                    shape[3] +
                c];
  }

  bool same_shape(const Tensor& o) const {
    return ndim == o.ndim && shape == o.shape;
  }

  void check_same_shape(const Tensor& o, const char* what) const {
    if (!same_shape(o))
      throw dimension_mismatch_error(std::string(what) + ": tensor shapes differ");
  }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace scatgen
