#pragma once

#include "scatgen/generator.hpp"

namespace scatgen {

/// First/second moment accumulators shaped like the generator parameters.
template <typename T>
struct AdamState {
  GeneratorParams<T> m;
  GeneratorParams<T> v;
  long long t = 0;

  static AdamState like(const GeneratorParams<T>& p) {
    AdamState s;
    s.m = p.zeros_like();
    s.v = p.zeros_like();
    return s;
  }
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update, in place. Checks every gradient block for
/// finiteness first and aborts the step (state untouched) with the offending
/// block name on failure.
template <typename T>
void adam_step(GeneratorParams<T>& params, const GeneratorParams<T>& grads,
               AdamState<T>& state, const AdamConfig& cfg);

}  // namespace scatgen
