#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "otssl/errors.hpp"
#include "otssl/exp/experiment.hpp"

namespace otssl {

// Winner(s) of one measurement point. Ties are all listed, as the protocol's
// own result tables do.
struct BestPairEntry {
  double cn0 = 0.0;
  std::size_t n_sup = 0;
  double lambda = 0.0;
  double sigma = 0.0;
  double median_max_accuracy = 0.0;
  double baseline_median = 0.0;
  double gain = 0.0;  // negative values are reported as-is
};

struct BestPairsReport {
  std::vector<BestPairEntry> entries;
  // Per-sigma quartiles at each winning lambda, mirroring the detail plots.
  std::vector<CellStatistics> winning_lambda_breakdown;
};

inline BestPairsReport best_pairs_report(const std::vector<CellStatistics>& table) {
  std::map<std::pair<double, std::size_t>, const CellStatistics*> baselines;
  for (const auto& cell : table)
    if (cell.key.is_baseline()) baselines[{cell.key.cn0, cell.key.n_sup}] = &cell;

  std::map<std::pair<double, std::size_t>, std::vector<const CellStatistics*>> points;
  for (const auto& cell : table)
    if (!cell.key.is_baseline()) points[{cell.key.cn0, cell.key.n_sup}].push_back(&cell);

  BestPairsReport report;
  for (const auto& [point, cells] : points) {
    const auto baseline_it = baselines.find(point);
    if (baseline_it == baselines.end())
      throw config_error("best_pairs_report: missing lambda = 0 baseline for " +
                         dataset_key(point.first, point.second));
    const double baseline = baseline_it->second->median_max_accuracy;

    double best = -1.0;
    for (const auto* cell : cells) best = std::max(best, cell->median_max_accuracy);

    std::vector<double> winning_lambdas;
    for (const auto* cell : cells) {
      if (cell->median_max_accuracy != best) continue;
      report.entries.push_back({point.first, point.second, cell->key.lambda, cell->key.sigma,
                                cell->median_max_accuracy, baseline, best - baseline});
      winning_lambdas.push_back(cell->key.lambda);
    }
    for (const auto* cell : cells)
      if (std::find(winning_lambdas.begin(), winning_lambdas.end(), cell->key.lambda) !=
          winning_lambdas.end())
        report.winning_lambda_breakdown.push_back(*cell);
  }

  const auto order = [](const auto& a, const auto& b) {
    return std::tie(a.cn0, a.n_sup, a.lambda, a.sigma) <
           std::tie(b.cn0, b.n_sup, b.lambda, b.sigma);
  };
  std::sort(report.entries.begin(), report.entries.end(), order);
  std::sort(report.winning_lambda_breakdown.begin(), report.winning_lambda_breakdown.end(),
            [](const CellStatistics& a, const CellStatistics& b) {
              return std::tie(a.key.cn0, a.key.n_sup, a.key.lambda, a.key.sigma) <
                     std::tie(b.key.cn0, b.key.n_sup, b.key.lambda, b.key.sigma);
            });
  return report;
}

inline std::string best_pairs_csv(const BestPairsReport& report) {
  std::ostringstream out;
  out << "# best (lambda, sigma) per (cn0, n_sup) by median max accuracy; ties all listed\n";
  out << "cn0,n_sup,lambda,sigma,median_max_accuracy,baseline_median,gain\n";
  for (const auto& e : report.entries)
    out << format_value(e.cn0) << ',' << e.n_sup << ',' << format_value(e.lambda) << ','
        << format_value(e.sigma) << ',' << format_csv_double(e.median_max_accuracy) << ','
        << format_csv_double(e.baseline_median) << ',' << format_csv_double(e.gain) << '\n';
  return out.str();
}

// Data series behind the accuracy-vs-N_SUP curves: the supervised baseline
// and the best SSL cell per measurement point.
inline std::string accuracy_vs_nsup_csv(const BestPairsReport& report) {
  std::ostringstream out;
  out << "# median max accuracy per (cn0, n_sup): lambda = 0 baseline and best SSL cell\n";
  out << "cn0,n_sup,series,lambda,sigma,median_max_accuracy\n";
  double last_cn0 = -1.0;
  std::size_t last_nsup = 0;
  for (const auto& e : report.entries) {
    if (e.cn0 != last_cn0 || e.n_sup != last_nsup) {
      out << format_value(e.cn0) << ',' << e.n_sup << ",baseline,0,0,"
          << format_csv_double(e.baseline_median) << '\n';
      last_cn0 = e.cn0;
      last_nsup = e.n_sup;
    }
    out << format_value(e.cn0) << ',' << e.n_sup << ",ssl_best," << format_value(e.lambda) << ','
        << format_value(e.sigma) << ',' << format_csv_double(e.median_max_accuracy) << '\n';
  }
  return out.str();
}

// Quartiles of the maximum accuracy against sigma for every (cn0, n_sup,
// lambda) series in the table.
inline std::string quartiles_vs_sigma_csv(std::vector<CellStatistics> table) {
  std::sort(table.begin(), table.end(), [](const CellStatistics& a, const CellStatistics& b) {
    return std::tie(a.key.cn0, a.key.n_sup, a.key.lambda, a.key.sigma) <
           std::tie(b.key.cn0, b.key.n_sup, b.key.lambda, b.key.sigma);
  });
  std::ostringstream out;
  out << "# quartiles of max accuracy vs sigma; lambda = 0 rows are the supervised baseline\n";
  out << "cn0,n_sup,lambda,sigma,q1,q2,q3,run_count\n";
  for (const auto& cell : table)
    out << format_value(cell.key.cn0) << ',' << cell.key.n_sup << ','
        << format_value(cell.key.lambda) << ',' << format_value(cell.key.sigma) << ','
        << format_csv_double(cell.q1) << ',' << format_csv_double(cell.q2) << ','
        << format_csv_double(cell.q3) << ',' << cell.run_count << '\n';
  return out.str();
}

// Writes the three report files; emission is deterministic byte-for-byte.
inline void emit_plot_data(const std::vector<CellStatistics>& table,
                           const std::filesystem::path& report_dir) {
  if (table.empty()) throw config_error("emit_plot_data: empty statistics table");
  std::filesystem::create_directories(report_dir);
  const BestPairsReport report = best_pairs_report(table);
  write_text_file(report_dir / "best_pairs.csv", best_pairs_csv(report));
  write_text_file(report_dir / "accuracy_vs_nsup.csv", accuracy_vs_nsup_csv(report));
  write_text_file(report_dir / "quartiles_vs_sigma.csv", quartiles_vs_sigma_csv(table));
}

}  // namespace otssl
