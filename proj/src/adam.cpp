#include "scatgen/adam.hpp"

#include <cmath>

#include "scatgen/errors.hpp"

namespace scatgen {

template <typename T>
void adam_step(GeneratorParams<T>& params, const GeneratorParams<T>& grads,
               AdamState<T>& state, const AdamConfig& cfg) {
  auto pb = params.blocks();
  auto gb = grads.blocks();
  auto mb = state.m.blocks();
  auto vb = state.v.blocks();
  const auto names = params.block_names();
  if (gb.size() != pb.size())
    throw dimension_mismatch_error("adam_step: gradient structure differs");

  for (std::size_t i = 0; i < gb.size(); ++i) {
    if (gb[i]->size() != pb[i]->size())
      throw dimension_mismatch_error("adam_step: block " + names[i] + " shape");
    for (const T g : gb[i]->data)
      if (!std::isfinite(static_cast<double>(g)))
        throw nonfinite_error("nonfinite gradient in block " + names[i]);
  }

  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T one_m_b1 = static_cast<T>(1.0 - cfg.beta1);
  const T one_m_b2 = static_cast<T>(1.0 - cfg.beta2);
  const T lr1 = static_cast<T>(cfg.learning_rate / bc1);
  const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
  const T eps = static_cast<T>(cfg.eps);

  for (std::size_t i = 0; i < pb.size(); ++i) {
    T* p = pb[i]->data.data();
    const T* g = gb[i]->data.data();
    T* m = mb[i]->data.data();
    T* v = vb[i]->data.data();
    const std::size_t n = pb[i]->size();
    for (std::size_t k = 0; k < n; ++k) {
      m[k] = b1 * m[k] + one_m_b1 * g[k];
      v[k] = b2 * v[k] + one_m_b2 * g[k] * g[k];
      p[k] -= lr1 * m[k] / (std::sqrt(v[k]) * inv_sqrt_bc2 + eps);
    }
  }
}

template void adam_step<float>(GeneratorParams<float>&,
                               const GeneratorParams<float>&,
                               AdamState<float>&, const AdamConfig&);
template void adam_step<double>(GeneratorParams<double>&,
                                const GeneratorParams<double>&,
                                AdamState<double>&, const AdamConfig&);

}  // namespace scatgen
