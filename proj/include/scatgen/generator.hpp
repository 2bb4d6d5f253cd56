#pragma once

#include <cstdint>
#include <string>
#include <type_traits>
#include <vector>

#include "scatgen/tensor.hpp"

namespace scatgen {

/// Convolutional generator: dense reshape to a 4x4 grid, then n_upsample
/// stages of (2x bilinear upsample -> 7x7 conv -> bias -> ReLU), then a
/// final 7x7 conv + bias + ReLU without upsampling. Output side is
/// 4 * 2^n_upsample; channels halve per stage from c0 with a floor of 8.
template <typename T>
struct GeneratorParams {
  int d_in = 0;
  int c0 = 0;
  int n_upsample = 0;
  static constexpr int kBase = 4;

  Tensor<T> w0;  // [d_in, 16*c0]
  Tensor<T> b0;  // [16*c0]

  struct Stage {
    Tensor<T> kernel;  // [7, 7, c_in, c_out]
    Tensor<T> bias;    // [c_out]
  };
  std::vector<Stage> stages;  // n_upsample entries
  Stage output;               // c_U -> 3

  int side() const { return kBase << n_upsample; }

  static std::vector<int> channel_ladder(int c0, int n_upsample) {
    std::vector<int> c(static_cast<std::size_t>(n_upsample) + 1);
    for (int j = 0; j <= n_upsample; ++j) c[static_cast<std::size_t>(j)] = std::max(c0 >> j, 8);
    return c;
  }

  /// Parameter blocks in declared (checkpoint) order.
  std::vector<Tensor<T>*> blocks();
  std::vector<const Tensor<T>*> blocks() const;
  std::vector<std::string> block_names() const;

  std::size_t n_params() const;

  /// Zero-filled clone with identical structure (for gradients/moments).
  GeneratorParams<T> zeros_like() const;
};

/// Uniform(-a, a) weights with a = sqrt(6 / fan_in), zero biases. One child
/// RNG stream per block, so adding blocks does not reshuffle earlier ones.
template <typename T>
GeneratorParams<T> init_generator(int d_in, int c0, int n_upsample,
                                  std::uint64_t seed);

/// Saved forward activations, consumed by the backward pass.
template <typename T>
struct GeneratorTrace {
  Tensor<T> a0;                 // post-ReLU dense output as [batch,4,4,c0]
  std::vector<Tensor<T>> ups;   // upsampled inputs per stage
  std::vector<Tensor<T>> acts;  // post-ReLU stage outputs
  Tensor<T> out;                // final post-ReLU output
};

/// Fraction of ReLU outputs equal to zero, accumulated over layers.
struct SparsityStats {
  std::size_t zeros = 0;
  std::size_t total = 0;
  double fraction() const {
    return total == 0 ? 0.0 : static_cast<double>(zeros) / static_cast<double>(total);
  }
};

/// z: [batch, d_in] -> [batch, side, side, 3], nonnegative (final ReLU).
/// (The trace parameter is a non-deduced context so nullptr works directly.)
template <typename T>
Tensor<T> generator_forward(const GeneratorParams<T>& p, const Tensor<T>& z,
                            GeneratorTrace<std::type_identity_t<T>>* trace = nullptr,
                            SparsityStats* sparsity = nullptr);

/// Reverse-mode gradients of generator_forward given a recorded trace.
/// grads must be zeros_like(p); z_grad (optional) receives dL/dz.
template <typename T>
void generator_backward(const GeneratorParams<T>& p, const Tensor<T>& z,
                        const GeneratorTrace<T>& trace,
                        const Tensor<T>& upstream, GeneratorParams<T>& grads,
                        Tensor<T>* z_grad = nullptr);

/// Convenience wrapper that reruns the forward internally.
template <typename T>
void generator_backward(const GeneratorParams<T>& p, const Tensor<T>& z,
                        const Tensor<T>& upstream, GeneratorParams<T>& grads,
                        Tensor<T>* z_grad = nullptr);

}  // namespace scatgen
