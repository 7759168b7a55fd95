#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "otssl/errors.hpp"
#include "otssl/gnss/dataset.hpp"
#include "otssl/io.hpp"
#include "otssl/ot/cost.hpp"
#include "otssl/ot/histogram.hpp"
#include "otssl/ot/transport.hpp"

namespace otssl {

// Wasserstein distance between two I/Q samples: per-channel EMD costs of the
// offset-and-scaled channels, summed over I and Q.
inline double pair_distance(const IQPair& x, const IQPair& y, const CostMatrix& c) {
  if (!x.same_shape(y)) throw shape_error("pair_distance: grid mismatch");
  return emd_cost(normalize_image(x.i_channel), normalize_image(y.i_channel), c) +
         emd_cost(normalize_image(x.q_channel), normalize_image(y.q_channel), c);
}

// Gaussian similarity W = exp(-d^2 / sigma); note sigma, not sigma^2.
inline double kernel_weight(double distance, double sigma) {
  if (!(sigma > 0.0)) throw config_error("kernel_weight: sigma must be positive");
  if (!(distance >= 0.0)) throw config_error("kernel_weight: distance must be non-negative");
  return std::exp(-(distance * distance) / sigma);
}

// Symmetric matrix of pairwise sample distances over one dataset. Distances
// do not depend on sigma, so one cache serves the whole bandwidth grid.
class DistanceCache {
 public:
  DistanceCache() = default;
  explicit DistanceCache(std::size_t n) : n_(n), d_(n * n, 0.0) {}

  std::size_t size() const { return n_; }
  double at(std::size_t i, std::size_t j) const { return d_[i * n_ + j]; }
  void set(std::size_t i, std::size_t j, double v) {
    d_[i * n_ + j] = v;
    d_[j * n_ + i] = v;
  }

  const std::string& dataset_hash() const { return dataset_hash_; }
  void set_dataset_hash(std::string h) { dataset_hash_ = std::move(h); }

  void save(const std::filesystem::path& dir, const GridSpec& grid) const {
    std::filesystem::create_directories(dir);
    std::vector<double> upper;
    upper.reserve(n_ * (n_ - 1) / 2);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j < n_; ++j) upper.push_back(at(i, j));
    write_flat<double>(dir / "distances.f64", upper);
    nlohmann::json meta{
        {"n_samples", n_},
        {"dataset_hash", dataset_hash_},
        {"solver_version", kSolverVersion},
        {"grid",
         {{"height", grid.height},
          {"width", grid.width},
          {"delay_span_chips", grid.delay_span_chips},
          {"doppler_span_hz", grid.doppler_span_hz}}},
    };
    write_text_file(dir / "meta.json", meta.dump(2) + "\n");
  }

  static DistanceCache load(const std::filesystem::path& dir) {
    nlohmann::json meta;
    try {
      meta = nlohmann::json::parse(read_text_file(dir / "meta.json"));
    } catch (const nlohmann::json::exception& e) {
      throw io_error("malformed meta.json in " + dir.string() + ": " + e.what());
    }
    DistanceCache cache(meta.at("n_samples").get<std::size_t>());
    cache.dataset_hash_ = meta.at("dataset_hash").get<std::string>();
    const auto upper = read_flat<double>(dir / "distances.f64");
    if (upper.size() != cache.n_ * (cache.n_ - 1) / 2)
      throw io_error("distances.f64 size mismatch in " + dir.string());
    std::size_t k = 0;
    for (std::size_t i = 0; i < cache.n_; ++i)
      for (std::size_t j = i + 1; j < cache.n_; ++j) cache.set(i, j, upper[k++]);
    return cache;
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> d_;
  std::string dataset_hash_;
};

// All pairwise distances for a dataset. Pairs are independent, so they are
// fanned out over a small worker pool; every worker writes disjoint cells
// and the result is identical for any worker count.
inline DistanceCache build_distance_cache(const Dataset& ds, const CostMatrix& c,
                                          unsigned threads = 0) {
  if (ds.size() == 0) throw config_error("build_distance_cache: empty dataset");
  const std::size_t n = ds.size();
  DistanceCache cache(n);
  cache.set_dataset_hash(dataset_hash(ds));

  struct PairIdx {
    std::uint32_t i, j;
  };
  std::vector<PairIdx> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = i + 1; j < n; ++j) pairs.push_back({i, j});

  // Normalizations are shared across pairs; precompute once.
  std::vector<Histogram> hi(n), hq(n);
  for (std::size_t i = 0; i < n; ++i) {
    hi[i] = normalize_image(ds.samples[i].image.i_channel);
    hq[i] = normalize_image(ds.samples[i].image.q_channel);
  }

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::vector<std::string> failures(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (;;) {
          const std::size_t k = next.fetch_add(1);
          if (k >= pairs.size()) break;
          const auto [i, j] = pairs[k];
          cache.set(i, j, emd_cost(hi[i], hi[j], c) + emd_cost(hq[i], hq[j], c));
        }
      } catch (const std::exception& e) {
        failures[t] = e.what();
        next.store(pairs.size());
      }
    });
  }
  for (auto& worker : pool) worker.join();
  for (const auto& message : failures)
    if (!message.empty()) throw numeric_error("build_distance_cache: " + message);
  return cache;
}

}  // namespace otssl
