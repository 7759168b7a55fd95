#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "otssl/errors.hpp"
#include "otssl/tensor.hpp"

namespace otssl {

// Valid (no padding) cross-correlation, stride 1. weights: OC x IC x KH x KW.
inline Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  if (input.rank() != 3 || weights.rank() != 4)
    throw shape_error("conv2d_forward: expected CHW input and OIHW weights");
  const std::size_t ic = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t oc = weights.dim(0), kh = weights.dim(2), kw = weights.dim(3);
  if (weights.dim(1) != ic) throw shape_error("conv2d_forward: channel mismatch");
  if (bias.size() != oc) throw shape_error("conv2d_forward: bias size mismatch");
  if (h < kh || w < kw) throw shape_error("conv2d_forward: input smaller than kernel");
  const std::size_t oh = h - kh + 1, ow = w - kw + 1;

  Tensor out({oc, oh, ow});
  for (std::size_t o = 0; o < oc; ++o) {
    double* out_ch = out.data() + o * oh * ow;
    for (std::size_t i = 0; i < oh * ow; ++i) out_ch[i] = bias[o];
    for (std::size_t c = 0; c < ic; ++c) {
      const double* in_ch = input.data() + c * h * w;
      const double* w_ch = weights.data() + (o * ic + c) * kh * kw;
      for (std::size_t kr = 0; kr < kh; ++kr)
        for (std::size_t kc = 0; kc < kw; ++kc) {
          const double coeff = w_ch[kr * kw + kc];
          for (std::size_t r = 0; r < oh; ++r) {
            const double* in_row = in_ch + (r + kr) * w + kc;
            double* out_row = out_ch + r * ow;
            for (std::size_t col = 0; col < ow; ++col) out_row[col] += coeff * in_row[col];
          }
        }
    }
  }
  return out;
}

struct ConvGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};

inline ConvGrads conv2d_backward(const Tensor& input, const Tensor& weights,
                                 const Tensor& grad_out) {
  const std::size_t ic = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t oc = weights.dim(0), kh = weights.dim(2), kw = weights.dim(3);
  const std::size_t oh = h - kh + 1, ow = w - kw + 1;
  if (grad_out.shape() != std::vector<std::size_t>{oc, oh, ow})
    throw shape_error("conv2d_backward: grad shape mismatch");

  ConvGrads g{Tensor(input.shape()), Tensor(weights.shape()), Tensor({oc})};
  for (std::size_t o = 0; o < oc; ++o) {
    const double* go_ch = grad_out.data() + o * oh * ow;
    double acc = 0.0;
    for (std::size_t i = 0; i < oh * ow; ++i) acc += go_ch[i];
    g.bias[o] = acc;

    for (std::size_t c = 0; c < ic; ++c) {
      const double* in_ch = input.data() + c * h * w;
      double* gin_ch = g.input.data() + c * h * w;
      const double* w_ch = weights.data() + (o * ic + c) * kh * kw;
      double* gw_ch = g.weights.data() + (o * ic + c) * kh * kw;
      for (std::size_t kr = 0; kr < kh; ++kr)
        for (std::size_t kc = 0; kc < kw; ++kc) {
          const double coeff = w_ch[kr * kw + kc];
          double wsum = 0.0;
          for (std::size_t r = 0; r < oh; ++r) {
            const double* go_row = go_ch + r * ow;
            const double* in_row = in_ch + (r + kr) * w + kc;
            double* gin_row = gin_ch + (r + kr) * w + kc;
            for (std::size_t col = 0; col < ow; ++col) {
              wsum += go_row[col] * in_row[col];
              gin_row[col] += coeff * go_row[col];
            }
          }
          gw_ch[kr * kw + kc] = wsum;
        }
    }
  }
  return g;
}

struct PoolResult {
  Tensor output;
  std::vector<std::uint32_t> argmax;  // flat input index per output element
};

inline PoolResult maxpool2x2_forward(const Tensor& input) {
  if (input.rank() != 3) throw shape_error("maxpool2x2: expected CHW input");
  const std::size_t ch = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (h % 2 != 0 || w % 2 != 0) throw shape_error("maxpool2x2: odd spatial size");
  const std::size_t oh = h / 2, ow = w / 2;

  PoolResult res{Tensor({ch, oh, ow}), std::vector<std::uint32_t>(ch * oh * ow)};
  std::size_t out_idx = 0;
  for (std::size_t c = 0; c < ch; ++c) {
    const double* in_ch = input.data() + c * h * w;
    for (std::size_t r = 0; r < oh; ++r)
      for (std::size_t col = 0; col < ow; ++col) {
        const std::size_t base = (2 * r) * w + 2 * col;
        std::size_t best = base;
        double best_v = in_ch[base];
        // Fixed window scan order makes argmax ties deterministic.
        for (const std::size_t off : {std::size_t{1}, w, w + 1}) {
          if (in_ch[base + off] > best_v) {
            best_v = in_ch[base + off];
            best = base + off;
          }
        }
        res.output[out_idx] = best_v;
        res.argmax[out_idx] = static_cast<std::uint32_t>(c * h * w + best);
        ++out_idx;
      }
  }
  return res;
}

inline Tensor maxpool2x2_backward(const std::vector<std::uint32_t>& argmax,
                                  const Tensor& grad_out,
                                  const std::vector<std::size_t>& input_shape) {
  Tensor grad_in(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) grad_in[argmax[i]] += grad_out[i];
  return grad_in;
}

inline void relu_inplace(Tensor& t) {
  for (double& v : t.values())
    if (v < 0.0) v = 0.0;
}

// grad wrt pre-activation: pass-through where the pre-activation is positive.
inline Tensor relu_backward(const Tensor& pre, const Tensor& grad_out) {
  Tensor g(pre.shape());
  for (std::size_t i = 0; i < pre.size(); ++i) g[i] = pre[i] > 0.0 ? grad_out[i] : 0.0;
  return g;
}

// y = W x + b with W rows contiguous.
inline void dense_forward(const Tensor& weights, const Tensor& bias, const double* x, double* y) {
  const std::size_t rows = weights.dim(0), cols = weights.dim(1);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = weights.data() + r * cols;
    double acc = bias[r];
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
}

inline void dense_backward(const Tensor& weights, const double* x, const double* grad_y,
                           Tensor& grad_w, Tensor& grad_b, double* grad_x) {
  const std::size_t rows = weights.dim(0), cols = weights.dim(1);
  for (std::size_t c = 0; c < cols; ++c) grad_x[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double g = grad_y[r];
    grad_b[r] += g;
    const double* wr = weights.data() + r * cols;
    double* gwr = grad_w.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      gwr[c] += g * x[c];
      grad_x[c] += g * wr[c];
    }
  }
}

// Numerically stable logistic; the result is kept strictly inside (0, 1).
inline double sigmoid(double z) {
  double p;
  if (z >= 0.0) {
    p = 1.0 / (1.0 + std::exp(-z));
  } else {
    const double e = std::exp(z);
    p = e / (1.0 + e);
  }
  if (p <= 0.0) return std::numeric_limits<double>::min();
  if (p >= 1.0) return 1.0 - std::numeric_limits<double>::epsilon() / 2;
  return p;
}

inline constexpr double kBceProbClamp = 1e-7;

// Binary cross-entropy with probability clamping to [1e-7, 1 - 1e-7].
inline double bce_loss(double p, int y) {
  if (y != 0 && y != 1) throw config_error("bce_loss: label must be 0 or 1");
  const double pc = std::min(std::max(p, kBceProbClamp), 1.0 - kBceProbClamp);
  return y == 1 ? -std::log(pc) : -std::log(1.0 - pc);
}

// d bce / dp; zero outside the clamp range where the loss is flat.
inline double bce_loss_grad(double p, int y) {
  if (p < kBceProbClamp || p > 1.0 - kBceProbClamp) return 0.0;
  return (p - static_cast<double>(y)) / (p * (1.0 - p));
}

}  // namespace otssl
