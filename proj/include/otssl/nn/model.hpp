#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "otssl/errors.hpp"
#include "otssl/gnss/signal.hpp"
#include "otssl/io.hpp"
#include "otssl/nn/layers.hpp"
#include "otssl/rng.hpp"
#include "otssl/tensor.hpp"

namespace otssl {

// VGG-style stack: conv 16@3x3 -> ReLU -> conv 32@3x3 -> ReLU -> maxpool 2x2
// -> flatten -> dense 256 -> ReLU -> dense 1 -> sigmoid. The spatial chain
// (26x26 input: 2x26x26 -> 16x24x24 -> 32x22x22 -> 32x11x11 -> 3872 -> 256
// -> 1) is validated at construction.
struct Architecture {
  std::size_t height = 26;
  std::size_t width = 26;
  std::size_t conv1_filters = 16;
  std::size_t conv2_filters = 32;
  std::size_t hidden = 256;

  std::size_t conv1_out_h() const { return height - 2; }
  std::size_t conv1_out_w() const { return width - 2; }
  std::size_t conv2_out_h() const { return conv1_out_h() - 2; }
  std::size_t conv2_out_w() const { return conv1_out_w() - 2; }
  std::size_t pool_out_h() const { return conv2_out_h() / 2; }
  std::size_t pool_out_w() const { return conv2_out_w() / 2; }
  std::size_t flatten_size() const { return conv2_filters * pool_out_h() * pool_out_w(); }

  void validate() const {
    if (height < 6 || width < 6)
      throw shape_error("Architecture: input too small for two 3x3 convolutions");
    if (conv2_out_h() % 2 != 0 || conv2_out_w() % 2 != 0)
      throw shape_error("Architecture: conv output must have even spatial size for 2x2 pooling");
  }

  bool operator==(const Architecture&) const = default;
};

struct ModelParams {
  Architecture arch;
  Tensor conv1_w, conv1_b;
  Tensor conv2_w, conv2_b;
  Tensor fc1_w, fc1_b;
  Tensor fc2_w, fc2_b;

  ModelParams() : ModelParams(Architecture{}) {}

  explicit ModelParams(const Architecture& a) : arch(a) {
    arch.validate();
    conv1_w = Tensor({arch.conv1_filters, 2, 3, 3});
    conv1_b = Tensor({arch.conv1_filters});
    conv2_w = Tensor({arch.conv2_filters, arch.conv1_filters, 3, 3});
    conv2_b = Tensor({arch.conv2_filters});
    fc1_w = Tensor({arch.hidden, arch.flatten_size()});
    fc1_b = Tensor({arch.hidden});
    fc2_w = Tensor({1, arch.hidden});
    fc2_b = Tensor({1});
  }

  // Canonical block order; also the checkpoint layout.
  template <typename F>
  void for_each_block(F&& f) {
    f("conv1_w", conv1_w);
    f("conv1_b", conv1_b);
    f("conv2_w", conv2_w);
    f("conv2_b", conv2_b);
    f("fc1_w", fc1_w);
    f("fc1_b", fc1_b);
    f("fc2_w", fc2_w);
    f("fc2_b", fc2_b);
  }

  template <typename F>
  void for_each_block(F&& f) const {
    const_cast<ModelParams*>(this)->for_each_block(
        [&](const char* name, Tensor& t) { f(name, static_cast<const Tensor&>(t)); });
  }

  std::size_t total_parameters() const {
    std::size_t n = 0;
    for_each_block([&](const char*, const Tensor& t) { n += t.size(); });
    return n;
  }

  void fill(double v) {
    for_each_block([&](const char*, Tensor& t) { t.fill(v); });
  }
};

// Fan-in scaled uniform init: He-style for the ReLU layers, Glorot-style for
// the sigmoid output. Biases start at zero. Draw order follows the canonical
// block order, row-major within a block.
inline ModelParams init_params(const Architecture& arch, std::uint64_t seed) {
  ModelParams p(arch);
  Rng rng(seed);
  const auto he = [&](Tensor& t, std::size_t fan_in) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (double& v : t.values()) v = rng.uniform(-limit, limit);
  };
  he(p.conv1_w, 2 * 3 * 3);
  he(p.conv2_w, arch.conv1_filters * 3 * 3);
  he(p.fc1_w, arch.flatten_size());
  const double glorot = std::sqrt(6.0 / static_cast<double>(arch.hidden + 1));
  for (double& v : p.fc2_w.values()) v = rng.uniform(-glorot, glorot);
  return p;
}

// Per-sample activations retained for backpropagation.
struct ForwardTrace {
  Tensor input;  // 2 x H x W
  Tensor conv1_pre, conv1_act;
  Tensor conv2_pre, conv2_act;
  PoolResult pool;
  Tensor fc1_pre, fc1_act;
  double logit = 0.0;
  double prob = 0.5;
};

inline Tensor stack_channels(const IQPair& x) {
  const std::size_t h = x.i_channel.dim(0), w = x.i_channel.dim(1);
  Tensor t({2, h, w});
  std::copy(x.i_channel.values().begin(), x.i_channel.values().end(), t.data());
  std::copy(x.q_channel.values().begin(), x.q_channel.values().end(), t.data() + h * w);
  return t;
}

inline ForwardTrace forward_trace(const ModelParams& p, const IQPair& x) {
  if (x.i_channel.dim(0) != p.arch.height || x.i_channel.dim(1) != p.arch.width)
    throw shape_error("forward: sample does not match model input size");

  ForwardTrace t;
  t.input = stack_channels(x);
  t.conv1_pre = conv2d_forward(t.input, p.conv1_w, p.conv1_b);
  t.conv1_act = t.conv1_pre;
  relu_inplace(t.conv1_act);
  t.conv2_pre = conv2d_forward(t.conv1_act, p.conv2_w, p.conv2_b);
  t.conv2_act = t.conv2_pre;
  relu_inplace(t.conv2_act);
  t.pool = maxpool2x2_forward(t.conv2_act);

  t.fc1_pre = Tensor({p.arch.hidden});
  dense_forward(p.fc1_w, p.fc1_b, t.pool.output.data(), t.fc1_pre.data());
  t.fc1_act = t.fc1_pre;
  relu_inplace(t.fc1_act);

  double logit = 0.0;
  dense_forward(p.fc2_w, p.fc2_b, t.fc1_act.data(), &logit);
  t.logit = logit;
  t.prob = sigmoid(logit);
  return t;
}

inline double forward(const ModelParams& p, const IQPair& x) { return forward_trace(p, x).prob; }

// Accumulates d(loss)/d(theta) into `grads` given d(loss)/d(prob).
inline void backward_into(const ModelParams& p, const ForwardTrace& t, double grad_prob,
                          ModelParams& grads) {
  const double grad_logit = grad_prob * t.prob * (1.0 - t.prob);

  // fc2
  Tensor grad_fc1_act({p.arch.hidden});
  dense_backward(p.fc2_w, t.fc1_act.data(), &grad_logit, grads.fc2_w, grads.fc2_b,
                 grad_fc1_act.data());
  // fc1
  const Tensor grad_fc1_pre = relu_backward(t.fc1_pre, grad_fc1_act);
  Tensor grad_flat({p.arch.flatten_size()});
  dense_backward(p.fc1_w, t.pool.output.data(), grad_fc1_pre.data(), grads.fc1_w, grads.fc1_b,
                 grad_flat.data());
  // pool
  Tensor grad_pool({p.arch.conv2_filters, p.arch.pool_out_h(), p.arch.pool_out_w()},
                   std::move(grad_flat.values()));
  const Tensor grad_conv2_act =
      maxpool2x2_backward(t.pool.argmax, grad_pool, t.conv2_act.shape());
  // conv2
  const Tensor grad_conv2_pre = relu_backward(t.conv2_pre, grad_conv2_act);
  ConvGrads g2 = conv2d_backward(t.conv1_act, p.conv2_w, grad_conv2_pre);
  grads.conv2_w += g2.weights;
  grads.conv2_b += g2.bias;
  // conv1
  const Tensor grad_conv1_pre = relu_backward(t.conv1_pre, g2.input);
  ConvGrads g1 = conv2d_backward(t.input, p.conv1_w, grad_conv1_pre);
  grads.conv1_w += g1.weights;
  grads.conv1_b += g1.bias;
}

// --- checkpoints -----------------------------------------------------------

inline void save_checkpoint(const ModelParams& p, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<double> flat;
  flat.reserve(p.total_parameters());
  nlohmann::json blocks = nlohmann::json::array();
  p.for_each_block([&](const char* name, const Tensor& t) {
    blocks.push_back({{"name", name}, {"shape", t.shape()}, {"offset", flat.size()}});
    flat.insert(flat.end(), t.values().begin(), t.values().end());
  });
  write_flat<double>(dir / "model.f64", flat);
  nlohmann::json manifest{
      {"format_version", 1},
      {"arch",
       {{"height", p.arch.height},
        {"width", p.arch.width},
        {"conv1_filters", p.arch.conv1_filters},
        {"conv2_filters", p.arch.conv2_filters},
        {"hidden", p.arch.hidden}}},
      {"blocks", blocks},
      {"total", flat.size()},
  };
  write_text_file(dir / "model.json", manifest.dump(2) + "\n");
}

inline ModelParams load_checkpoint(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text_file(dir / "model.json"));
  } catch (const nlohmann::json::exception& e) {
    throw io_error("malformed model.json in " + dir.string() + ": " + e.what());
  }
  Architecture arch;
  const auto& a = manifest.at("arch");
  arch.height = a.at("height").get<std::size_t>();
  arch.width = a.at("width").get<std::size_t>();
  arch.conv1_filters = a.at("conv1_filters").get<std::size_t>();
  arch.conv2_filters = a.at("conv2_filters").get<std::size_t>();
  arch.hidden = a.at("hidden").get<std::size_t>();

  ModelParams p(arch);
  const auto flat = read_flat<double>(dir / "model.f64");
  if (flat.size() != p.total_parameters())
    throw io_error("model.f64 size mismatch in " + dir.string());
  std::size_t offset = 0;
  p.for_each_block([&](const char*, Tensor& t) {
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(offset),
              flat.begin() + static_cast<std::ptrdiff_t>(offset + t.size()), t.data());
    offset += t.size();
  });
  return p;
}

}  // namespace otssl
