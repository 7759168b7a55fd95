#pragma once

#include <cmath>
#include <cstdint>

#include "otssl/nn/model.hpp"

namespace otssl {

// Bias-corrected ADAM (Kingma & Ba defaults).
struct AdamState {
  ModelParams m;  // first moments
  ModelParams v;  // second moments
  std::uint64_t step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  explicit AdamState(const Architecture& arch) : m(arch), v(arch) {
    m.fill(0.0);
    v.fill(0.0);
  }
};

inline void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state) {
  if (!(params.arch == grads.arch) || !(params.arch == state.m.arch))
    throw shape_error("adam_step: parameter/gradient/state architecture mismatch");
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);

  Tensor* blocks_p[8];
  const Tensor* blocks_g[8];
  Tensor* blocks_m[8];
  Tensor* blocks_v[8];
  int k = 0;
  params.for_each_block([&](const char*, Tensor& b) { blocks_p[k++] = &b; });
  k = 0;
  grads.for_each_block([&](const char*, const Tensor& b) { blocks_g[k++] = &b; });
  k = 0;
  state.m.for_each_block([&](const char*, Tensor& b) { blocks_m[k++] = &b; });
  k = 0;
  state.v.for_each_block([&](const char*, Tensor& b) { blocks_v[k++] = &b; });

  for (int b = 0; b < 8; ++b) {
    double* p = blocks_p[b]->data();
    const double* g = blocks_g[b]->data();
    double* m = blocks_m[b]->data();
    double* v = blocks_v[b]->data();
    const std::size_t n = blocks_p[b]->size();
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

}  // namespace otssl
