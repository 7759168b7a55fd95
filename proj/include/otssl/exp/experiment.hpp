#pragma once

#include <atomic>
#include <bit>
#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "otssl/errors.hpp"
#include "otssl/exp/stats.hpp"
#include "otssl/gnss/dataset.hpp"
#include "otssl/io.hpp"
#include "otssl/ot/distance.hpp"
#include "otssl/ssl/train.hpp"

namespace otssl {

// Full experiment protocol: C/N0 x N_SUP measurement points, a (lambda,
// sigma) grid per point plus the lambda = 0 supervised baseline, many runs
// per cell, median/quartile statistics of the per-run maximum accuracy.
struct ExperimentConfig {
  std::vector<double> cn0_list{37.0, 40.0, 43.0};
  std::vector<std::size_t> nsup_list{25, 40, 50, 60, 75};
  std::vector<double> lambda_grid{1.0, 10.0, 100.0, 1000.0};
  std::vector<double> sigma_grid{0.01, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 10.0};
  std::size_t runs_per_cell = 299;
  std::size_t epochs = 55;
  std::size_t batch_size = 50;
  std::size_t n_train = 200;
  std::size_t n_val = 100;
  std::uint64_t master_seed = 0;
  std::string output_dir;
  // One dataset per (cn0, n_sup) shared across the grid (default), or a
  // fresh dataset (and cache) per run.
  bool dataset_per_run = false;
  unsigned threads = 0;
  GridSpec grid;
  MultipathDistribution multipath;

  void validate() const {
    grid.validate();
    if (cn0_list.empty() || nsup_list.empty())
      throw config_error("ExperimentConfig: empty C/N0 or N_SUP list");
    if (runs_per_cell == 0 || epochs == 0 || batch_size == 0)
      throw config_error("ExperimentConfig: counts must be positive");
    if (n_val == 0 || n_train == 0) throw config_error("ExperimentConfig: empty dataset");
    for (std::size_t nsup : nsup_list)
      if (nsup > n_train) throw config_error("ExperimentConfig: n_sup exceeds n_train");
    for (double l : lambda_grid)
      if (!(l > 0.0)) throw config_error("ExperimentConfig: grid lambdas must be positive");
    for (double s : sigma_grid)
      if (!(s > 0.0)) throw config_error("ExperimentConfig: sigmas must be positive");
    if (output_dir.empty()) throw config_error("ExperimentConfig: output_dir is required");
  }
};

// CI-scale profile: the acceptance-criteria subset of the protocol.
inline void apply_desk_profile(ExperimentConfig& cfg) {
  cfg.cn0_list = {37.0};
  cfg.nsup_list = {75};
  cfg.lambda_grid = {1.0};
  cfg.sigma_grid = {1.0};
  cfg.runs_per_cell = 31;
}

inline void to_json(nlohmann::json& j, const ExperimentConfig& cfg) {
  j = nlohmann::json{
      {"cn0_list", cfg.cn0_list},
      {"nsup_list", cfg.nsup_list},
      {"lambda_grid", cfg.lambda_grid},
      {"sigma_grid", cfg.sigma_grid},
      {"runs_per_cell", cfg.runs_per_cell},
      {"epochs", cfg.epochs},
      {"batch_size", cfg.batch_size},
      {"n_train", cfg.n_train},
      {"n_val", cfg.n_val},
      {"master_seed", cfg.master_seed},
      {"output_dir", cfg.output_dir},
      {"dataset_per_run", cfg.dataset_per_run},
      {"threads", cfg.threads},
      {"grid",
       {{"height", cfg.grid.height},
        {"width", cfg.grid.width},
        {"delay_span_chips", cfg.grid.delay_span_chips},
        {"doppler_span_hz", cfg.grid.doppler_span_hz}}},
      {"multipath",
       {{"amplitude_lo", cfg.multipath.amplitude_lo},
        {"amplitude_hi", cfg.multipath.amplitude_hi},
        {"delay_lo_chips", cfg.multipath.delay_lo_chips},
        {"delay_hi_chips", cfg.multipath.delay_hi_chips},
        {"doppler_lo_hz", cfg.multipath.doppler_lo_hz},
        {"doppler_hi_hz", cfg.multipath.doppler_hi_hz}}},
  };
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& cfg) {
  const auto get = [&j](const char* key, auto& into) {
    if (j.contains(key)) j.at(key).get_to(into);
  };
  get("cn0_list", cfg.cn0_list);
  get("nsup_list", cfg.nsup_list);
  get("lambda_grid", cfg.lambda_grid);
  get("sigma_grid", cfg.sigma_grid);
  get("runs_per_cell", cfg.runs_per_cell);
  get("epochs", cfg.epochs);
  get("batch_size", cfg.batch_size);
  get("n_train", cfg.n_train);
  get("n_val", cfg.n_val);
  get("master_seed", cfg.master_seed);
  get("output_dir", cfg.output_dir);
  get("dataset_per_run", cfg.dataset_per_run);
  get("threads", cfg.threads);
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    g.at("height").get_to(cfg.grid.height);
    g.at("width").get_to(cfg.grid.width);
    g.at("delay_span_chips").get_to(cfg.grid.delay_span_chips);
    g.at("doppler_span_hz").get_to(cfg.grid.doppler_span_hz);
  }
  if (j.contains("multipath")) {
    const auto& m = j.at("multipath");
    m.at("amplitude_lo").get_to(cfg.multipath.amplitude_lo);
    m.at("amplitude_hi").get_to(cfg.multipath.amplitude_hi);
    m.at("delay_lo_chips").get_to(cfg.multipath.delay_lo_chips);
    m.at("delay_hi_chips").get_to(cfg.multipath.delay_hi_chips);
    m.at("doppler_lo_hz").get_to(cfg.multipath.doppler_lo_hz);
    m.at("doppler_hi_hz").get_to(cfg.multipath.doppler_hi_hz);
  }
}

// Content hash of the protocol-relevant configuration (output_dir and
// thread count excluded: they do not change results).
inline std::string config_hash(const ExperimentConfig& cfg) {
  nlohmann::json j = cfg;
  j.erase("output_dir");
  j.erase("threads");
  return hex64(fnv1a64(j.dump()));
}

// --- cells and seeds ---------------------------------------------------------

struct CellKey {
  double cn0 = 0.0;
  std::size_t n_sup = 0;
  double lambda = 0.0;  // 0 marks the supervised baseline
  double sigma = 1.0;

  bool is_baseline() const { return lambda == 0.0; }
};

inline std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

inline std::string dataset_key(double cn0, std::size_t n_sup) {
  return "cn0_" + format_value(cn0) + "_nsup_" + std::to_string(n_sup);
}

inline std::string cell_key_string(const CellKey& key) {
  return dataset_key(key.cn0, key.n_sup) + "_lambda_" + format_value(key.lambda) + "_sigma_" +
         format_value(key.sigma);
}

inline std::uint64_t double_bits(double v) { return std::bit_cast<std::uint64_t>(v); }

inline std::uint64_t dataset_seed(std::uint64_t master_seed, double cn0, std::size_t n_sup) {
  std::uint64_t h = derive_seed(master_seed, fnv1a64("dataset"));
  h = derive_seed(h, double_bits(cn0));
  return derive_seed(h, n_sup);
}

// run seed = hash(master_seed, cn0, n_sup, lambda, sigma, run_index): any
// cell (or single run) is reproducible without executing the rest of the grid.
inline std::uint64_t run_seed(std::uint64_t master_seed, const CellKey& key,
                              std::size_t run_index) {
  std::uint64_t h = derive_seed(master_seed, fnv1a64("run"));
  h = derive_seed(h, double_bits(key.cn0), key.n_sup);
  h = derive_seed(h, double_bits(key.lambda), double_bits(key.sigma));
  return derive_seed(h, run_index);
}

// Baseline cells precede the (lambda, sigma) grid; order is deterministic.
inline std::vector<CellKey> enumerate_cells(const ExperimentConfig& cfg) {
  std::vector<CellKey> cells;
  for (double cn0 : cfg.cn0_list)
    for (std::size_t nsup : cfg.nsup_list) {
      cells.push_back({cn0, nsup, 0.0, 1.0});
      for (double lambda : cfg.lambda_grid)
        for (double sigma : cfg.sigma_grid) cells.push_back({cn0, nsup, lambda, sigma});
    }
  return cells;
}

struct CellStatistics {
  CellKey key;
  double median_max_accuracy = 0.0;
  double q1 = 0.0, q2 = 0.0, q3 = 0.0;
  std::size_t run_count = 0;
};

// --- per-run artifacts -------------------------------------------------------

inline std::string format_csv_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string run_result_csv(std::size_t run_id, const RunResult& r) {
  std::ostringstream out;
  out << "run_id,epoch,val_accuracy,train_loss\n";
  for (std::size_t e = 0; e < r.epoch_val_accuracy.size(); ++e)
    out << run_id << ',' << e + 1 << ',' << format_csv_double(r.epoch_val_accuracy[e]) << ','
        << format_csv_double(r.epoch_train_loss[e]) << '\n';
  return out.str();
}

inline nlohmann::json run_result_json(std::size_t run_id, const CellKey& key, const RunResult& r,
                                      const std::string& cfg_hash) {
  return nlohmann::json{
      {"run_id", run_id},
      {"seed", r.seed},
      {"cell",
       {{"cn0", key.cn0}, {"n_sup", key.n_sup}, {"lambda", key.lambda}, {"sigma", key.sigma}}},
      {"max_accuracy", r.max_accuracy},
      {"final_train_loss", r.final_train_loss},
      {"epochs", r.epoch_val_accuracy.size()},
      {"config_hash", cfg_hash},
  };
}

namespace detail {

inline std::string run_file_stem(std::size_t run_id) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "run_%04zu", run_id);
  return buf;
}

// Loads the dataset pair from disk or generates and saves it. Generation is
// deterministic, so racing processes would produce identical bytes.
inline std::pair<Dataset, Dataset> ensure_datasets(const ExperimentConfig& cfg, double cn0,
                                                   std::size_t n_sup,
                                                   const std::filesystem::path& dir) {
  const auto train_dir = dir / "train";
  const auto val_dir = dir / "val";
  if (std::filesystem::exists(train_dir / "meta.json") &&
      std::filesystem::exists(val_dir / "meta.json"))
    return {load_dataset(train_dir), load_dataset(val_dir)};
  auto [train, val] = generate_dataset(cfg.grid, cfg.n_train, n_sup, cfg.n_val, cn0,
                                       dataset_seed(cfg.master_seed, cn0, n_sup), cfg.multipath);
  save_dataset(train, train_dir);
  save_dataset(val, val_dir);
  return {std::move(train), std::move(val)};
}

inline DistanceCache ensure_cache(const Dataset& train, const CostMatrix& cost,
                                  const std::filesystem::path& dir, unsigned threads) {
  const std::string expected_hash = dataset_hash(train);
  if (std::filesystem::exists(dir / "meta.json")) {
    DistanceCache cache = DistanceCache::load(dir);
    if (cache.size() == train.size() && cache.dataset_hash() == expected_hash) return cache;
  }
  DistanceCache cache = build_distance_cache(train, cost, threads);
  cache.save(dir, train.grid);
  return cache;
}

}  // namespace detail

using ProgressFn = std::function<void(const std::string&)>;

// Executes the full grid. Work is a queue of (cell, run) jobs over a bounded
// worker pool; every job writes only its own pair of files, so results are
// independent of worker count and scheduling. Runs whose artifacts already
// exist under a matching config hash are skipped, which makes interrupted
// grids resumable.
inline std::vector<CellStatistics> run_grid(const ExperimentConfig& cfg,
                                            const ProgressFn& progress = {}) {
  cfg.validate();
  const std::filesystem::path out_root(cfg.output_dir);
  std::filesystem::create_directories(out_root);
  const std::string cfg_hash = config_hash(cfg);
  {
    nlohmann::json j = cfg;
    j["config_hash"] = cfg_hash;
    write_text_file(out_root / "config.json", j.dump(2) + "\n");
  }

  const CostMatrix cost = build_cost_matrix(cfg.grid);
  const auto cells = enumerate_cells(cfg);
  const unsigned threads =
      cfg.threads != 0 ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());

  std::vector<CellStatistics> table;
  std::mutex progress_mutex;
  const auto report_progress = [&](const std::string& line) {
    if (!progress) return;
    std::lock_guard<std::mutex> lock(progress_mutex);
    progress(line);
  };

  // Group cells per measurement point so datasets and caches load once.
  for (double cn0 : cfg.cn0_list) {
    for (std::size_t n_sup : cfg.nsup_list) {
      const std::string ds_key = dataset_key(cn0, n_sup);
      Dataset train, val;
      std::optional<DistanceCache> cache;
      if (!cfg.dataset_per_run) {
        std::tie(train, val) = detail::ensure_datasets(cfg, cn0, n_sup, out_root / "datasets" / ds_key);
        bool needs_cache = false;
        for (const auto& cell : cells)
          if (cell.cn0 == cn0 && cell.n_sup == n_sup && !cell.is_baseline()) needs_cache = true;
        if (needs_cache) {
          report_progress("cache " + ds_key);
          cache = detail::ensure_cache(train, cost, out_root / "caches" / ds_key, threads);
        }
      }

      for (const auto& cell : cells) {
        if (cell.cn0 != cn0 || cell.n_sup != n_sup) continue;
        const std::string key_str = cell_key_string(cell);
        const auto cell_dir = out_root / "cells" / key_str;
        const auto runs_dir = cell_dir / "runs";
        std::filesystem::create_directories(runs_dir);

        // Fast path: completed cell with matching configuration.
        bool cell_done = false;
        if (std::filesystem::exists(cell_dir / "cell.json")) {
          try {
            const auto j = nlohmann::json::parse(read_text_file(cell_dir / "cell.json"));
            cell_done = j.at("config_hash").get<std::string>() == cfg_hash &&
                        j.at("run_count").get<std::size_t>() == cfg.runs_per_cell;
          } catch (const std::exception&) {
            cell_done = false;
          }
        }

        std::vector<double> maxima(cfg.runs_per_cell, 0.0);
        if (!cell_done) {
          std::atomic<std::size_t> next{0};
          std::vector<std::thread> pool;
          std::vector<std::string> failures(threads);
          for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
              try {
                for (;;) {
                  const std::size_t run_id = next.fetch_add(1);
                  if (run_id >= cfg.runs_per_cell) break;
                  const auto stem = detail::run_file_stem(run_id);
                  const auto json_path = runs_dir / (stem + ".json");
                  const auto csv_path = runs_dir / (stem + ".csv");

                  if (std::filesystem::exists(json_path) && std::filesystem::exists(csv_path)) {
                    try {
                      const auto j = nlohmann::json::parse(read_text_file(json_path));
                      if (j.at("config_hash").get<std::string>() == cfg_hash) {
                        maxima[run_id] = j.at("max_accuracy").get<double>();
                        continue;  // resume: this run is already done
                      }
                    } catch (const std::exception&) {
                    }
                  }

                  SSLConfig run_cfg;
                  run_cfg.lambda = cell.lambda;
                  run_cfg.sigma = cell.sigma;
                  run_cfg.batch_size = cfg.batch_size;
                  run_cfg.epochs = cfg.epochs;
                  run_cfg.seed = run_seed(cfg.master_seed, cell, run_id);

                  RunResult result;
                  if (cfg.dataset_per_run) {
                    auto [run_train, run_val] =
                        generate_dataset(cfg.grid, cfg.n_train, n_sup, cfg.n_val, cn0,
                                         derive_seed(run_cfg.seed, fnv1a64("data")),
                                         cfg.multipath);
                    std::optional<DistanceCache> run_cache;
                    if (!cell.is_baseline())
                      run_cache = build_distance_cache(run_train, cost, 1);
                    result = train_run(run_train, run_val, run_cfg,
                                       run_cache ? &*run_cache : nullptr);
                  } else {
                    result = train_run(train, val, run_cfg, cache ? &*cache : nullptr);
                  }
                  maxima[run_id] = result.max_accuracy;
                  write_text_file(csv_path, run_result_csv(run_id, result));
                  write_text_file(json_path,
                                  run_result_json(run_id, cell, result, cfg_hash).dump(2) + "\n");
                }
              } catch (const std::exception& e) {
                failures[t] = e.what();
                next.store(cfg.runs_per_cell);
              }
            });
          }
          for (auto& worker : pool) worker.join();
          for (const auto& message : failures)
            if (!message.empty()) throw numeric_error("run_grid[" + key_str + "]: " + message);
        } else {
          for (std::size_t run_id = 0; run_id < cfg.runs_per_cell; ++run_id) {
            const auto j = nlohmann::json::parse(
                read_text_file(runs_dir / (detail::run_file_stem(run_id) + ".json")));
            maxima[run_id] = j.at("max_accuracy").get<double>();
          }
        }

        // Aggregate: concatenated epoch rows plus the cell summary.
        std::string epochs_csv = "run_id,epoch,val_accuracy,train_loss\n";
        for (std::size_t run_id = 0; run_id < cfg.runs_per_cell; ++run_id) {
          const auto csv =
              read_text_file(runs_dir / (detail::run_file_stem(run_id) + ".csv"));
          epochs_csv += csv.substr(csv.find('\n') + 1);
        }
        write_text_file(cell_dir / "epochs.csv", epochs_csv);

        CellStatistics stats;
        stats.key = cell;
        stats.run_count = cfg.runs_per_cell;
        stats.median_max_accuracy = lower_median(maxima);
        if (cfg.runs_per_cell >= 4) {
          const auto q = quartiles(maxima);
          stats.q1 = q[0];
          stats.q2 = q[1];
          stats.q3 = q[2];
        } else {
          stats.q1 = stats.q2 = stats.q3 = stats.median_max_accuracy;
        }
        table.push_back(stats);

        nlohmann::json cell_json{
            {"cn0", cell.cn0},
            {"n_sup", cell.n_sup},
            {"lambda", cell.lambda},
            {"sigma", cell.sigma},
            {"run_count", stats.run_count},
            {"median_max_accuracy", stats.median_max_accuracy},
            {"q1", stats.q1},
            {"q2", stats.q2},
            {"q3", stats.q3},
            {"config_hash", cfg_hash},
        };
        write_text_file(cell_dir / "cell.json", cell_json.dump(2) + "\n");
        report_progress("cell " + key_str + " median=" + format_value(stats.median_max_accuracy));
      }
    }
  }
  return table;
}

// Rebuilds the statistics table from a grid output directory.
inline std::vector<CellStatistics> load_cell_table(const std::filesystem::path& out_root) {
  std::vector<CellStatistics> table;
  const auto cells_dir = out_root / "cells";
  if (!std::filesystem::exists(cells_dir)) throw io_error("no cells/ under " + out_root.string());
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(cells_dir))
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "cell.json"))
      dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text_file(dir / "cell.json"));
    } catch (const nlohmann::json::exception& e) {
      throw io_error("malformed cell.json in " + dir.string() + ": " + e.what());
    }
    CellStatistics stats;
    stats.key.cn0 = j.at("cn0").get<double>();
    stats.key.n_sup = j.at("n_sup").get<std::size_t>();
    stats.key.lambda = j.at("lambda").get<double>();
    stats.key.sigma = j.at("sigma").get<double>();
    stats.run_count = j.at("run_count").get<std::size_t>();
    stats.median_max_accuracy = j.at("median_max_accuracy").get<double>();
    stats.q1 = j.at("q1").get<double>();
    stats.q2 = j.at("q2").get<double>();
    stats.q3 = j.at("q3").get<double>();
    table.push_back(stats);
  }
  return table;
}

}  // namespace otssl
