// Command-line front end: dataset generation, distance cache construction,
// single-cell training, the full grid protocol, and report emission.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "otssl/otssl.hpp"

namespace {

using namespace otssl;

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw config_error("cannot parse list entry '" + item + "'");
    }
  }
  if (out.empty()) throw config_error("empty list: '" + csv + "'");
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& csv) {
  std::vector<std::size_t> out;
  for (double v : parse_double_list(csv)) out.push_back(static_cast<std::size_t>(v));
  return out;
}

// Shared --config/--profile/override handling for subcommands that consume
// an ExperimentConfig. Every JSON field has a matching flag.
struct ConfigCli {
  std::string config_path;
  std::string profile;
  std::string cn0_list, nsup_list, lambda_grid, sigma_grid;
  CLI::Option* master_seed_opt = nullptr;
  ExperimentConfig cfg;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", config_path, "JSON configuration file");
    cmd.add_option("--profile", profile, "named profile: 'desk' (CI-scale protocol subset)");
    cmd.add_option("--cn0-list", cn0_list, "comma-separated C/N0 values [dBHz]");
    cmd.add_option("--nsup-list", nsup_list, "comma-separated labelled sample counts");
    cmd.add_option("--lambda-grid", lambda_grid, "comma-separated lambda values");
    cmd.add_option("--sigma-grid", sigma_grid, "comma-separated sigma values");
    cmd.add_option("--runs-per-cell", cfg.runs_per_cell, "training runs per grid cell");
    cmd.add_option("--epochs", cfg.epochs, "epochs per run");
    cmd.add_option("--batch-size", cfg.batch_size, "mini-batch size");
    cmd.add_option("--n-train", cfg.n_train, "training samples per dataset");
    cmd.add_option("--n-val", cfg.n_val, "validation samples per dataset");
    master_seed_opt = cmd.add_option("--master-seed", cfg.master_seed, "master seed of the grid");
    cmd.add_option("--output-dir", cfg.output_dir, "output directory");
    cmd.add_option("--dataset-per-run", cfg.dataset_per_run,
                   "draw a fresh dataset for every run instead of sharing per cell");
    cmd.add_option("--threads", cfg.threads, "worker threads (0 = all cores)");
    cmd.add_option("--grid-height", cfg.grid.height, "image height");
    cmd.add_option("--grid-width", cfg.grid.width, "image width");
    cmd.add_option("--delay-span", cfg.grid.delay_span_chips, "delay half-range [chips]");
    cmd.add_option("--doppler-span", cfg.grid.doppler_span_hz, "doppler half-range [Hz]");
  }

  // Precedence: defaults < JSON file < profile < explicit flags.
  ExperimentConfig resolve(CLI::App& cmd) {
    ExperimentConfig resolved;
    if (!config_path.empty()) {
      try {
        nlohmann::json j = nlohmann::json::parse(read_text_file(config_path));
        from_json(j, resolved);
      } catch (const nlohmann::json::exception& e) {
        throw config_error("cannot parse config file " + config_path + ": " + e.what());
      }
    }
    if (!profile.empty()) {
      if (profile == "desk")
        apply_desk_profile(resolved);
      else
        throw config_error("unknown profile '" + profile + "'");
    }
    const auto touched = [&](const char* name) { return cmd.count(name) > 0; };
    if (touched("--cn0-list")) resolved.cn0_list = parse_double_list(cn0_list);
    if (touched("--nsup-list")) resolved.nsup_list = parse_size_list(nsup_list);
    if (touched("--lambda-grid")) resolved.lambda_grid = parse_double_list(lambda_grid);
    if (touched("--sigma-grid")) resolved.sigma_grid = parse_double_list(sigma_grid);
    if (touched("--runs-per-cell")) resolved.runs_per_cell = cfg.runs_per_cell;
    if (touched("--epochs")) resolved.epochs = cfg.epochs;
    if (touched("--batch-size")) resolved.batch_size = cfg.batch_size;
    if (touched("--n-train")) resolved.n_train = cfg.n_train;
    if (touched("--n-val")) resolved.n_val = cfg.n_val;
    if (touched("--master-seed")) resolved.master_seed = cfg.master_seed;
    if (touched("--output-dir")) resolved.output_dir = cfg.output_dir;
    if (touched("--dataset-per-run")) resolved.dataset_per_run = cfg.dataset_per_run;
    if (touched("--threads")) resolved.threads = cfg.threads;
    if (touched("--grid-height")) resolved.grid.height = cfg.grid.height;
    if (touched("--grid-width")) resolved.grid.width = cfg.grid.width;
    if (touched("--delay-span")) resolved.grid.delay_span_chips = cfg.grid.delay_span_chips;
    if (touched("--doppler-span")) resolved.grid.doppler_span_hz = cfg.grid.doppler_span_hz;
    return resolved;
  }
};

int cmd_generate(const ExperimentConfig& cfg, double cn0, std::size_t n_sup) {
  if (cfg.output_dir.empty()) throw config_error("generate: --output-dir is required");
  auto [train, val] = generate_dataset(cfg.grid, cfg.n_train, n_sup, cfg.n_val, cn0,
                                       dataset_seed(cfg.master_seed, cn0, n_sup), cfg.multipath);
  const std::filesystem::path out(cfg.output_dir);
  save_dataset(train, out / "train");
  save_dataset(val, out / "val");
  std::cout << "wrote " << (out / "train").string() << " (" << train.size() << " samples, "
            << train.n_sup << " labelled) and " << (out / "val").string() << " (" << val.size()
            << " samples)\n";
  return 0;
}

int cmd_distances(const std::string& dataset_dir, const std::string& out_dir, unsigned threads) {
  const Dataset ds = load_dataset(dataset_dir);
  const CostMatrix cost = build_cost_matrix(ds.grid);
  const DistanceCache cache = build_distance_cache(ds, cost, threads);
  cache.save(out_dir, ds.grid);
  std::cout << "wrote " << out_dir << " (" << cache.size() << "x" << cache.size()
            << " distances, dataset " << cache.dataset_hash() << ")\n";
  return 0;
}

int cmd_train(const std::string& train_dir, const std::string& val_dir,
              const std::string& cache_dir, const std::string& out_dir, const SSLConfig& run_cfg,
              std::size_t run_id) {
  const Dataset train = load_dataset(train_dir);
  const Dataset val = load_dataset(val_dir);
  std::optional<DistanceCache> cache;
  if (run_cfg.lambda > 0.0) {
    if (cache_dir.empty()) throw config_error("train: lambda > 0 requires --cache-dir");
    cache = DistanceCache::load(cache_dir);
    if (cache->dataset_hash() != dataset_hash(train))
      throw config_error("train: distance cache was built for a different dataset");
  }
  const RunResult result = train_run(train, val, run_cfg, cache ? &*cache : nullptr);

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path out(out_dir);
    CellKey key{train.cn0_dbhz, train.n_sup, run_cfg.lambda, run_cfg.sigma};
    write_text_file(out / "run.csv", run_result_csv(run_id, result));
    write_text_file(out / "run.json",
                    run_result_json(run_id, key, result, "standalone").dump(2) + "\n");
  }
  std::cout << "max_accuracy " << format_csv_double(result.max_accuracy) << " final_train_loss "
            << format_csv_double(result.final_train_loss) << "\n";
  return 0;
}

int cmd_grid(const ExperimentConfig& cfg) {
  const auto table = run_grid(cfg, [](const std::string& line) { std::cout << line << "\n"; });
  emit_plot_data(table, std::filesystem::path(cfg.output_dir) / "report");
  std::cout << "grid complete: " << table.size() << " cells, report under " << cfg.output_dir
            << "/report\n";
  return 0;
}

int cmd_report(const std::string& out_dir) {
  const auto table = load_cell_table(out_dir);
  emit_plot_data(table, std::filesystem::path(out_dir) / "report");
  std::cout << "report written for " << table.size() << " cells under " << out_dir
            << "/report\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wasserstein-metric semi-supervised CNN experiments on GNSS correlator images"};
  app.require_subcommand(1);

  // generate
  auto* generate = app.add_subcommand("generate", "generate a train/val dataset pair");
  ConfigCli gen_cli;
  gen_cli.attach(*generate);
  double gen_cn0 = 40.0;
  std::size_t gen_nsup = 75;
  generate->add_option("--cn0", gen_cn0, "C/N0 of the dataset [dBHz]");
  generate->add_option("--nsup", gen_nsup, "labelled training samples");

  // distances
  auto* distances = app.add_subcommand("distances", "build the pairwise distance cache");
  std::string dist_dataset, dist_out;
  unsigned dist_threads = 0;
  distances->add_option("--dataset", dist_dataset, "dataset directory")->required();
  distances->add_option("--output-dir", dist_out, "cache output directory")->required();
  distances->add_option("--threads", dist_threads, "worker threads (0 = all cores)");

  // train
  auto* train = app.add_subcommand("train", "run one training cell");
  std::string train_train, train_val, train_cache, train_out;
  SSLConfig train_cfg;
  std::size_t train_run_id = 0;
  train->add_option("--train-dir", train_train, "training dataset directory")->required();
  train->add_option("--val-dir", train_val, "validation dataset directory")->required();
  train->add_option("--cache-dir", train_cache, "distance cache directory (lambda > 0)");
  train->add_option("--output-dir", train_out, "where to write run.csv / run.json");
  train->add_option("--lambda", train_cfg.lambda, "smoothness trade-off");
  train->add_option("--sigma", train_cfg.sigma, "kernel bandwidth");
  train->add_option("--epochs", train_cfg.epochs, "epochs");
  train->add_option("--batch-size", train_cfg.batch_size, "mini-batch size");
  train->add_option("--seed", train_cfg.seed, "run seed");
  train->add_option("--run-id", train_run_id, "run identifier for the CSV");

  // grid
  auto* grid = app.add_subcommand("grid", "execute the full grid protocol");
  ConfigCli grid_cli;
  grid_cli.attach(*grid);

  // report
  auto* report = app.add_subcommand("report", "recompute statistics and plot data");
  std::string report_dir;
  report->add_option("--output-dir", report_dir, "grid output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;  // configuration error
  }

  try {
    if (generate->parsed()) return cmd_generate(gen_cli.resolve(*generate), gen_cn0, gen_nsup);
    if (distances->parsed()) return cmd_distances(dist_dataset, dist_out, dist_threads);
    if (train->parsed())
      return cmd_train(train_train, train_val, train_cache, train_out, train_cfg, train_run_id);
    if (grid->parsed()) {
      if (grid_cli.master_seed_opt->count() == 0 && grid_cli.config_path.empty())
        throw config_error("grid: --master-seed is required");
      auto cfg = grid_cli.resolve(*grid);
      if (grid_cli.master_seed_opt->count() == 0)
        throw config_error("grid: --master-seed is required (config files do not exempt it)");
      return cmd_grid(cfg);
    }
    if (report->parsed()) return cmd_report(report_dir);
  } catch (const config_error& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const shape_error& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const io_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const numeric_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
