#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "otssl/errors.hpp"
#include "otssl/gnss/dataset.hpp"
#include "otssl/nn/adam.hpp"
#include "otssl/nn/model.hpp"
#include "otssl/ot/distance.hpp"
#include "otssl/rng.hpp"

namespace otssl {

struct SSLConfig {
  double lambda = 1.0;  // smoothness trade-off; 0 recovers plain supervised training
  double sigma = 1.0;   // kernel bandwidth
  std::size_t batch_size = 50;
  std::size_t epochs = 55;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(lambda >= 0.0)) throw config_error("SSLConfig: lambda must be non-negative");
    if (!(sigma > 0.0)) throw config_error("SSLConfig: sigma must be positive");
    if (epochs == 0) throw config_error("SSLConfig: epochs must be positive");
    if (batch_size == 0) throw config_error("SSLConfig: batch_size must be positive");
    if (lambda > 0.0 && batch_size < 2)
      throw config_error("SSLConfig: batch_size must be at least 2 when lambda > 0");
  }
};

// Unordered sample pair, i < j, with its similarity weight.
struct WeightedPair {
  std::size_t i;
  std::size_t j;
  double weight = 1.0;
};
using PairSet = std::vector<WeightedPair>;

// All unordered pairs within a batch except labelled-labelled ones: the
// smoothness prior never overrides two ground-truth labels. Pairs come out
// sorted by (i, j), which keeps downstream sums order-canonical.
inline PairSet enumerate_pairs(std::span<const std::size_t> batch_indices,
                               std::span<const char> is_labelled) {
  std::vector<std::size_t> sorted(batch_indices.begin(), batch_indices.end());
  std::sort(sorted.begin(), sorted.end());
  PairSet pairs;
  for (std::size_t a = 0; a < sorted.size(); ++a)
    for (std::size_t b = a + 1; b < sorted.size(); ++b) {
      if (is_labelled[sorted[a]] && is_labelled[sorted[b]]) continue;
      pairs.push_back({sorted[a], sorted[b], 1.0});
    }
  return pairs;
}

inline void attach_weights(PairSet& pairs, const DistanceCache& cache, double sigma) {
  for (auto& p : pairs) p.weight = kernel_weight(cache.at(p.i, p.j), sigma);
}

// sum over pairs of W_ij * (f_i - f_j)^2; `predictions` is indexed by sample.
inline double smoothness_term(const PairSet& pairs, std::span<const double> predictions) {
  double total = 0.0;
  for (const auto& p : pairs) {
    const double diff = predictions[p.i] - predictions[p.j];
    total += p.weight * diff * diff;
  }
  return total;
}

namespace detail {

struct BatchEval {
  double loss = 0.0;
  std::vector<double> prob;       // by sample index; valid where computed
  std::vector<double> grad_prob;  // d loss / d prob, by sample index
  std::vector<char> needed;       // sample took part in this batch's loss
  PairSet pairs;
  std::vector<std::size_t> active;     // participating samples, ascending
  std::vector<ForwardTrace> traces;    // aligned with `active` when retained
};

// Composite objective over one mini-batch: supervised BCE over the labelled
// members plus lambda times the weighted smoothness over the admitted pairs.
// All sums run in ascending sample-index order, so the value is independent
// of the ordering inside the batch.
inline BatchEval evaluate_batch(const Dataset& train, const ModelParams& params,
                                std::span<const std::size_t> batch, const SSLConfig& cfg,
                                const DistanceCache* cache, bool keep_traces = false) {
  BatchEval ev;
  const std::size_t n = train.size();
  ev.prob.assign(n, 0.0);
  ev.grad_prob.assign(n, 0.0);
  ev.needed.assign(n, 0);

  std::vector<char> labelled(n, 0);
  for (std::size_t i = 0; i < n; ++i) labelled[i] = train.samples[i].is_labelled ? 1 : 0;

  std::vector<std::size_t> sorted(batch.begin(), batch.end());
  std::sort(sorted.begin(), sorted.end());

  for (std::size_t idx : sorted) {
    const bool needed = labelled[idx] || cfg.lambda > 0.0;
    if (!needed) continue;
    ev.needed[idx] = 1;
    ev.active.push_back(idx);
    if (keep_traces) {
      ev.traces.push_back(forward_trace(params, train.samples[idx].image));
      ev.prob[idx] = ev.traces.back().prob;
    } else {
      ev.prob[idx] = forward(params, train.samples[idx].image);
    }
  }

  for (std::size_t idx : sorted) {
    if (!labelled[idx]) continue;
    ev.loss += bce_loss(ev.prob[idx], train.samples[idx].label);
    ev.grad_prob[idx] += bce_loss_grad(ev.prob[idx], train.samples[idx].label);
  }

  if (cfg.lambda > 0.0) {
    if (cache == nullptr)
      throw config_error("evaluate_batch: lambda > 0 requires a distance cache");
    ev.pairs = enumerate_pairs(sorted, labelled);
    attach_weights(ev.pairs, *cache, cfg.sigma);
    ev.loss += cfg.lambda * smoothness_term(ev.pairs, ev.prob);
    for (const auto& p : ev.pairs) {
      const double g = 2.0 * p.weight * (ev.prob[p.i] - ev.prob[p.j]);
      ev.grad_prob[p.i] += cfg.lambda * g;
      ev.grad_prob[p.j] -= cfg.lambda * g;
    }
  }
  return ev;
}

}  // namespace detail

inline double composite_batch_loss(const Dataset& train, const ModelParams& params,
                                   std::span<const std::size_t> batch, const SSLConfig& cfg,
                                   const DistanceCache* cache) {
  return detail::evaluate_batch(train, params, batch, cfg, cache).loss;
}

struct RunResult {
  std::vector<double> epoch_val_accuracy;
  double max_accuracy = 0.0;
  double final_train_loss = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> epoch_train_loss;
};

// Optional probes for tests and diagnostics.
struct TrainHooks {
  std::vector<double>* batch_losses = nullptr;
};

inline double validation_accuracy(const ModelParams& params, const Dataset& val) {
  std::size_t correct = 0;
  for (const auto& s : val.samples) {
    const int predicted = forward(params, s.image) >= 0.5 ? 1 : 0;
    if (predicted == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(val.size());
}

// Seed sub-stream tags used by one run.
inline constexpr std::uint64_t kSeedTagInit = 0xA1;
inline constexpr std::uint64_t kSeedTagShuffle = 0xB2;

// One learning experience: fresh seed-derived initialization, per-epoch
// reshuffle into batches of batch_size (last short batch kept), one ADAM
// step per batch on the composite loss, validation after every epoch.
inline RunResult train_run(const Dataset& train, const Dataset& val, const SSLConfig& cfg,
                           const DistanceCache* cache, const TrainHooks& hooks = {}) {
  cfg.validate();
  train.validate();
  val.validate();
  if (val.n_unsup != 0) throw config_error("train_run: validation set must be fully labelled");
  if (cfg.lambda > 0.0) {
    if (cache == nullptr) throw config_error("train_run: lambda > 0 requires a distance cache");
    if (cache->size() != train.size())
      throw config_error("train_run: distance cache size does not match training set");
  }

  Architecture arch;
  arch.height = train.grid.height;
  arch.width = train.grid.width;

  ModelParams params = init_params(arch, derive_seed(cfg.seed, kSeedTagInit));
  AdamState adam(arch);
  ModelParams grads(arch);
  Rng shuffle_rng(derive_seed(cfg.seed, kSeedTagShuffle));

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  RunResult result;
  result.seed = cfg.seed;
  result.epoch_val_accuracy.reserve(cfg.epochs);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      const std::span<const std::size_t> batch(order.data() + start, len);

      auto ev = detail::evaluate_batch(train, params, batch, cfg, cache, /*keep_traces=*/true);
      grads.fill(0.0);
      for (std::size_t k = 0; k < ev.active.size(); ++k) {
        const std::size_t idx = ev.active[k];
        if (ev.grad_prob[idx] == 0.0) continue;
        backward_into(params, ev.traces[k], ev.grad_prob[idx], grads);
      }
      adam_step(params, grads, adam);

      epoch_loss += ev.loss;
      ++batches;
      if (hooks.batch_losses) hooks.batch_losses->push_back(ev.loss);
    }
    result.epoch_train_loss.push_back(epoch_loss / static_cast<double>(batches));
    result.epoch_val_accuracy.push_back(validation_accuracy(params, val));
  }

  result.max_accuracy =
      *std::max_element(result.epoch_val_accuracy.begin(), result.epoch_val_accuracy.end());
  result.final_train_loss = result.epoch_train_loss.back();
  return result;
}

}  // namespace otssl
