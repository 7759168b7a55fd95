#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <functional>

#include "otssl/gnss/signal.hpp"
#include "otssl/nn/layers.hpp"
#include "otssl/nn/model.hpp"
#include "otssl/rng.hpp"

using namespace otssl;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(-scale, scale);
  return t;
}

// Central finite difference of f with respect to t[idx].
double finite_diff(Tensor& t, std::size_t idx, const std::function<double()>& f,
                   double h = 1e-5) {
  const double saved = t[idx];
  t[idx] = saved + h;
  const double hi = f();
  t[idx] = saved - h;
  const double lo = f();
  t[idx] = saved;
  return (hi - lo) / (2.0 * h);
}

double rel_err(double got, double want) {
  return std::abs(got - want) / std::max({std::abs(got), std::abs(want), 1e-8});
}

Architecture small_arch() {
  Architecture a;
  a.height = 10;
  a.width = 10;  // 2x10x10 -> 16x8x8 -> 32x6x6 -> 32x3x3 -> 288
  return a;
}

IQPair random_image(std::size_t h, std::size_t w, Rng& rng) {
  GridSpec g;
  g.height = h;
  g.width = w;
  IQPair img(g);
  for (auto& v : img.i_channel.values()) v = rng.uniform(-1.0, 1.0);
  for (auto& v : img.q_channel.values()) v = rng.uniform(-1.0, 1.0);
  return img;
}

}  // namespace

TEST(Conv2d, ArchitectureShapes) {
  Rng rng(1);
  const Tensor input = random_tensor({2, 26, 26}, rng);
  const Tensor w = random_tensor({16, 2, 3, 3}, rng);
  const Tensor b = random_tensor({16}, rng);
  const Tensor out = conv2d_forward(input, w, b);
  EXPECT_EQ(out.shape(), (std::vector<std::size_t>{16, 24, 24}));
}

TEST(Conv2d, IdentityKernelCropsBorder) {
  Rng rng(2);
  const Tensor input = random_tensor({1, 6, 6}, rng);
  Tensor w({1, 1, 3, 3});
  w.at(0, 1 * 3 + 1, 0) = 0.0;  // silence clang-tidy style access; set below
  w.values() = {0, 0, 0, 0, 1, 0, 0, 0, 0};
  const Tensor b({1});
  const Tensor out = conv2d_forward(input, w, b);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c)
      ASSERT_DOUBLE_EQ(out.at(0, r, c), input.at(0, r + 1, c + 1));
}

TEST(Conv2d, ZeroInputYieldsBias) {
  Tensor input({3, 5, 5});
  Rng rng(3);
  const Tensor w = random_tensor({4, 3, 3, 3}, rng);
  Tensor b({4});
  b.values() = {0.5, -1.0, 2.0, 0.0};
  const Tensor out = conv2d_forward(input, w, b);
  for (std::size_t ch = 0; ch < 4; ++ch)
    for (std::size_t i = 0; i < 9; ++i) ASSERT_DOUBLE_EQ(out[ch * 9 + i], b[ch]);
}

TEST(Conv2d, GradientsMatchFiniteDifferences) {
  Rng rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor input = random_tensor({2, 6, 6}, rng);
    Tensor w = random_tensor({3, 2, 3, 3}, rng);
    Tensor b = random_tensor({3}, rng);
    const Tensor coeff = random_tensor({3, 4, 4}, rng);

    const auto loss = [&] {
      const Tensor out = conv2d_forward(input, w, b);
      double acc = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i) acc += coeff[i] * out[i];
      return acc;
    };
    const ConvGrads grads = conv2d_backward(input, w, coeff);

    for (std::size_t k = 0; k < w.size(); k += 7)
      ASSERT_LT(rel_err(grads.weights[k], finite_diff(w, k, loss)), 1e-6);
    for (std::size_t k = 0; k < b.size(); ++k)
      ASSERT_LT(rel_err(grads.bias[k], finite_diff(b, k, loss)), 1e-6);
    for (std::size_t k = 0; k < input.size(); k += 5)
      ASSERT_LT(rel_err(grads.input[k], finite_diff(input, k, loss)), 1e-6);
  }
}

TEST(MaxPool, PaperFlattenCount) {
  Rng rng(5);
  const Tensor input = random_tensor({32, 22, 22}, rng);
  const PoolResult res = maxpool2x2_forward(input);
  EXPECT_EQ(res.output.shape(), (std::vector<std::size_t>{32, 11, 11}));
  EXPECT_EQ(res.output.size(), 3872u);
}

TEST(MaxPool, ConstantInput) {
  Tensor input({2, 4, 4});
  input.fill(3.25);
  const PoolResult res = maxpool2x2_forward(input);
  for (double v : res.output.values()) ASSERT_DOUBLE_EQ(v, 3.25);
}

TEST(MaxPool, ReproducesUniqueWindowMaxima) {
  Tensor input({1, 4, 4});
  for (std::size_t i = 0; i < input.size(); ++i) input[i] = static_cast<double>(i);
  const PoolResult res = maxpool2x2_forward(input);
  EXPECT_DOUBLE_EQ(res.output.at(0, 0, 0), 5.0);
  EXPECT_DOUBLE_EQ(res.output.at(0, 0, 1), 7.0);
  EXPECT_DOUBLE_EQ(res.output.at(0, 1, 0), 13.0);
  EXPECT_DOUBLE_EQ(res.output.at(0, 1, 1), 15.0);
}

TEST(MaxPool, OddSpatialSizeThrows) {
  Tensor input({1, 5, 4});
  EXPECT_THROW(maxpool2x2_forward(input), shape_error);
}

TEST(MaxPool, BackwardRoutesToArgmax) {
  Rng rng(6);
  Tensor input = random_tensor({2, 4, 4}, rng);
  const PoolResult res = maxpool2x2_forward(input);
  Tensor gout(res.output.shape());
  for (auto& v : gout.values()) v = rng.uniform(-1.0, 1.0);
  const Tensor gin = maxpool2x2_backward(res.argmax, gout, input.shape());
  const auto loss = [&] {
    const PoolResult r = maxpool2x2_forward(input);
    double acc = 0.0;
    for (std::size_t i = 0; i < r.output.size(); ++i) acc += gout[i] * r.output[i];
    return acc;
  };
  for (std::size_t k = 0; k < input.size(); k += 3)
    ASSERT_LT(rel_err(gin[k], finite_diff(input, k, loss)), 1e-6);
}

TEST(Dense, GradientsMatchFiniteDifferences) {
  Rng rng(7);
  Tensor w = random_tensor({4, 9}, rng);
  Tensor b = random_tensor({4}, rng);
  Tensor x = random_tensor({9}, rng);
  const Tensor coeff = random_tensor({4}, rng);
  const auto loss = [&] {
    Tensor y({4});
    dense_forward(w, b, x.data(), y.data());
    double acc = 0.0;
    for (std::size_t i = 0; i < 4; ++i) acc += coeff[i] * y[i];
    return acc;
  };
  Tensor gw({4, 9}), gb({4}), gx({9});
  dense_backward(w, x.data(), coeff.data(), gw, gb, gx.data());
  for (std::size_t k = 0; k < w.size(); ++k)
    ASSERT_LT(rel_err(gw[k], finite_diff(w, k, loss)), 1e-6);
  for (std::size_t k = 0; k < x.size(); ++k)
    ASSERT_LT(rel_err(gx[k], finite_diff(x, k, loss)), 1e-6);
  for (std::size_t k = 0; k < b.size(); ++k)
    ASSERT_LT(rel_err(gb[k], finite_diff(b, k, loss)), 1e-6);
}

TEST(Relu, ZeroGradientBelowZero) {
  Tensor pre({3});
  pre.values() = {-1.0, 0.5, -2.0};
  Tensor g({3});
  g.values() = {1.0, 1.0, 1.0};
  const Tensor out = relu_backward(pre, g);
  EXPECT_DOUBLE_EQ(out[0], 0.0);
  EXPECT_DOUBLE_EQ(out[1], 1.0);
  EXPECT_DOUBLE_EQ(out[2], 0.0);
}

TEST(Bce, AnalyticValues) {
  EXPECT_NEAR(bce_loss(0.5, 0), std::log(2.0), 1e-12);
  EXPECT_NEAR(bce_loss(0.5, 1), std::log(2.0), 1e-12);
  EXPECT_NEAR(bce_loss(0.9, 0), -std::log(0.1), 1e-12);
  EXPECT_NEAR(bce_loss(1.0 - 1e-9, 1), 0.0, 1e-6);  // clamped perfect prediction
  EXPECT_TRUE(std::isfinite(bce_loss(0.0, 1)));
  EXPECT_TRUE(std::isfinite(bce_loss(1.0, 0)));
  EXPECT_THROW(bce_loss(0.5, 2), config_error);
}

TEST(Bce, GradientMatchesFiniteDifferences) {
  for (const double p : {0.2, 0.5, 0.9}) {
    for (const int y : {0, 1}) {
      const double h = 1e-7;
      const double fd = (bce_loss(p + h, y) - bce_loss(p - h, y)) / (2.0 * h);
      ASSERT_LT(rel_err(bce_loss_grad(p, y), fd), 1e-5);
    }
  }
}

TEST(Model, ShapeChainAssertedAtConstruction) {
  const ModelParams p{};  // default 26x26
  EXPECT_EQ(p.arch.flatten_size(), 3872u);
  EXPECT_EQ(p.fc1_w.shape(), (std::vector<std::size_t>{256, 3872}));
  Architecture bad;
  bad.height = 9;  // conv output 5x5 cannot be 2x2-pooled
  bad.width = 9;
  EXPECT_THROW(ModelParams{bad}, shape_error);
}

TEST(Model, ZeroParamsOutputHalf) {
  const Architecture arch = small_arch();
  ModelParams p(arch);
  Rng rng(8);
  const IQPair x = random_image(arch.height, arch.width, rng);
  EXPECT_DOUBLE_EQ(forward(p, x), 0.5);
}

TEST(Model, ForwardIsPure) {
  const Architecture arch = small_arch();
  const ModelParams p = init_params(arch, 55);
  Rng rng(9);
  const IQPair x = random_image(arch.height, arch.width, rng);
  EXPECT_EQ(forward(p, x), forward(p, x));
}

TEST(Model, OutputStrictlyInsideUnitInterval) {
  const Architecture arch = small_arch();
  Rng rng(10);
  for (int t = 0; t < 10; ++t) {
    const ModelParams p = init_params(arch, 100 + t);
    const IQPair x = random_image(arch.height, arch.width, rng);
    const double prob = forward(p, x);
    ASSERT_GT(prob, 0.0);
    ASSERT_LT(prob, 1.0);
  }
}

TEST(Model, Fc2PerturbationShiftsLogitByActivation) {
  const Architecture arch = small_arch();
  const ModelParams base = init_params(arch, 77);
  Rng rng(11);
  const IQPair x = random_image(arch.height, arch.width, rng);
  const ForwardTrace trace = forward_trace(base, x);
  const double delta = 1e-4;
  for (const std::size_t k : {0u, 17u, 101u}) {
    ModelParams nudged = base;
    nudged.fc2_w[k] += delta;
    const ForwardTrace moved = forward_trace(nudged, x);
    ASSERT_NEAR(moved.logit - trace.logit, delta * trace.fc1_act[k], 1e-10);
  }
}

TEST(Model, BackwardMatchesFiniteDifferencesOnBce) {
  const Architecture arch = small_arch();
  ModelParams params = init_params(arch, 13);
  Rng rng(14);
  const IQPair x = random_image(arch.height, arch.width, rng);
  const int label = 1;

  const auto loss = [&] { return bce_loss(forward(params, x), label); };
  ModelParams grads(arch);
  const ForwardTrace trace = forward_trace(params, x);
  backward_into(params, trace, bce_loss_grad(trace.prob, label), grads);

  Rng pick(15);
  int checked = 0;
  params.for_each_block([&](const char* name, Tensor& block) {
    Tensor* grad_block = nullptr;
    grads.for_each_block([&](const char* gname, Tensor& g) {
      if (std::string(gname) == name) grad_block = &g;
    });
    for (int k = 0; k < 6; ++k) {
      const std::size_t idx = pick.next_below(block.size());
      const double fd = finite_diff(block, idx, loss);
      const double an = (*grad_block)[idx];
      if (std::abs(fd) < 1e-10 && std::abs(an) < 1e-10) continue;  // dead ReLU path
      ASSERT_LT(rel_err(an, fd), 1e-4) << name << "[" << idx << "]";
      ++checked;
    }
  });
  EXPECT_GT(checked, 20);
}

TEST(Model, ZeroUpstreamGradientGivesZeroParameterGradients) {
  const Architecture arch = small_arch();
  const ModelParams params = init_params(arch, 19);
  Rng rng(20);
  const IQPair x = random_image(arch.height, arch.width, rng);
  ModelParams grads(arch);
  backward_into(params, forward_trace(params, x), 0.0, grads);
  grads.for_each_block([&](const char*, const Tensor& g) {
    for (double v : g.values()) ASSERT_EQ(v, 0.0);
  });
}

TEST(Model, InitializationVarianceMatchesFanInFormula) {
  const Architecture arch;  // full 26x26 model for realistic fan-ins
  double var_conv1 = 0.0, var_conv2 = 0.0, var_fc1 = 0.0, var_fc2 = 0.0;
  std::size_t n1 = 0, n2 = 0, n3 = 0, n4 = 0;
  for (int seed = 0; seed < 30; ++seed) {
    const ModelParams p = init_params(arch, 1000 + seed);
    for (double v : p.conv1_w.values()) var_conv1 += v * v, ++n1;
    for (double v : p.conv2_w.values()) var_conv2 += v * v, ++n2;
    for (double v : p.fc1_w.values()) var_fc1 += v * v, ++n3;
    for (double v : p.fc2_w.values()) var_fc2 += v * v, ++n4;
    for (double v : p.conv1_b.values()) ASSERT_EQ(v, 0.0);
  }
  // He-uniform: var = 2 / fan_in; Glorot-uniform: var = 2 / (fan_in + fan_out)
  EXPECT_NEAR(var_conv1 / n1, 2.0 / 18.0, 0.2 * 2.0 / 18.0);
  EXPECT_NEAR(var_conv2 / n2, 2.0 / 144.0, 0.2 * 2.0 / 144.0);
  EXPECT_NEAR(var_fc1 / n3, 2.0 / 3872.0, 0.2 * 2.0 / 3872.0);
  EXPECT_NEAR(var_fc2 / n4, 2.0 / 257.0, 0.2 * 2.0 / 257.0);
}

TEST(Model, CheckpointRoundTrip) {
  const Architecture arch = small_arch();
  const ModelParams p = init_params(arch, 321);
  const auto dir = std::filesystem::temp_directory_path() / "otssl_model_test";
  std::filesystem::remove_all(dir);
  save_checkpoint(p, dir);
  const ModelParams q = load_checkpoint(dir);
  EXPECT_TRUE(q.arch == p.arch);
  bool equal = true;
  p.for_each_block([&](const char* name, const Tensor& block) {
    q.for_each_block([&](const char* qname, const Tensor& qblock) {
      if (std::string(name) != qname) return;
      for (std::size_t i = 0; i < block.size(); ++i)
        if (block[i] != qblock[i]) equal = false;
    });
  });
  EXPECT_TRUE(equal);
  std::filesystem::remove_all(dir);
}
