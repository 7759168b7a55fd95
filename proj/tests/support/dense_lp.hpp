#pragma once

// Test-only oracle: a generic dense two-phase primal simplex for
//     min c^T x  s.t.  A x = b,  x >= 0,
// with Bland's rule throughout. It knows nothing about transportation
// structure, which is the point: it independently certifies the production
// solver on small instances.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace testsupport {

struct LpSolution {
  double objective = 0.0;
  std::vector<double> x;
};

class DenseLp {
 public:
  DenseLp(std::vector<std::vector<double>> a, std::vector<double> b, std::vector<double> c)
      : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {}

  LpSolution solve() {
    const std::size_t m = a_.size();
    const std::size_t n = c_.size();
    for (std::size_t i = 0; i < m; ++i)
      if (b_[i] < 0.0) {
        b_[i] = -b_[i];
        for (auto& v : a_[i]) v = -v;
      }

    // Tableau: m constraint rows, then phase-2 and phase-1 objective rows.
    // Columns: n structural + m artificial + rhs.
    const std::size_t cols = n + m + 1;
    const std::size_t obj2 = m;
    const std::size_t obj1 = m + 1;
    tab_.assign(m + 2, std::vector<double>(cols, 0.0));
    basis_.assign(m, 0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) tab_[i][j] = a_[i][j];
      tab_[i][n + i] = 1.0;
      tab_[i][cols - 1] = b_[i];
      basis_[i] = n + i;
    }
    for (std::size_t j = 0; j < n; ++j) tab_[obj2][j] = c_[j];
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < cols; ++j)
        if (j < n || j == cols - 1) tab_[obj1][j] -= tab_[i][j];

    // Phase 1: drive the artificial objective to zero.
    iterate(obj1, n + m);
    if (std::abs(tab_[obj1][cols - 1]) > 1e-7)
      throw std::runtime_error("DenseLp: infeasible instance");

    // Pivot lingering artificials out where a structural column allows it;
    // what remains marks redundant rows stuck at zero.
    for (std::size_t i = 0; i < m; ++i) {
      if (basis_[i] < n) continue;
      for (std::size_t j = 0; j < n; ++j)
        if (std::abs(tab_[i][j]) > 1e-9) {
          pivot(i, j);
          break;
        }
    }

    // Phase 2 over structural columns only.
    iterate(obj2, n);

    LpSolution sol;
    sol.objective = -tab_[obj2][cols - 1];
    sol.x.assign(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      if (basis_[i] < n) sol.x[basis_[i]] = tab_[i][cols - 1];
    return sol;
  }

 private:
  static constexpr double kEps = 1e-10;

  void pivot(std::size_t row, std::size_t col) {
    const std::size_t cols = tab_[0].size();
    const double inv = 1.0 / tab_[row][col];
    for (std::size_t j = 0; j < cols; ++j) tab_[row][j] *= inv;
    tab_[row][col] = 1.0;
    for (std::size_t i = 0; i < tab_.size(); ++i) {
      if (i == row) continue;
      const double factor = tab_[i][col];
      if (factor == 0.0) continue;
      for (std::size_t j = 0; j < cols; ++j) tab_[i][j] -= factor * tab_[row][j];
      tab_[i][col] = 0.0;
    }
    basis_[row] = col;
  }

  void iterate(std::size_t obj_row, std::size_t enter_limit) {
    const std::size_t m = basis_.size();
    const std::size_t cols = tab_[0].size();
    for (std::size_t guard = 0; guard < 200000; ++guard) {
      // Bland: lowest-index negative reduced cost.
      std::size_t enter = enter_limit;
      for (std::size_t j = 0; j < enter_limit; ++j)
        if (tab_[obj_row][j] < -kEps) {
          enter = j;
          break;
        }
      if (enter == enter_limit) return;

      // Ratio test; ties resolved toward the smallest basis index.
      std::size_t leave = m;
      double best = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        if (tab_[i][enter] <= kEps) continue;
        const double ratio = tab_[i][cols - 1] / tab_[i][enter];
        if (leave == m || ratio < best - 1e-12 ||
            (std::abs(ratio - best) <= 1e-12 && basis_[i] < basis_[leave])) {
          leave = i;
          best = ratio;
        }
      }
      if (leave == m) throw std::runtime_error("DenseLp: unbounded instance");
      pivot(leave, enter);
    }
    throw std::runtime_error("DenseLp: iteration limit");
  }

  std::vector<std::vector<double>> a_;
  std::vector<double> b_;
  std::vector<double> c_;
  std::vector<std::vector<double>> tab_;
  std::vector<std::size_t> basis_;
};

// Transportation instance laid out as an equality LP over x[i*m + j].
inline LpSolution solve_transport_lp(const std::vector<double>& supply,
                                     const std::vector<double>& demand,
                                     const std::vector<std::vector<double>>& cost) {
  const std::size_t n = supply.size();
  const std::size_t m = demand.size();
  std::vector<std::vector<double>> a(n + m, std::vector<double>(n * m, 0.0));
  std::vector<double> b(n + m, 0.0);
  std::vector<double> c(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    b[i] = supply[i];
    for (std::size_t j = 0; j < m; ++j) {
      a[i][i * m + j] = 1.0;
      a[n + j][i * m + j] = 1.0;
      c[i * m + j] = cost[i][j];
    }
  }
  for (std::size_t j = 0; j < m; ++j) b[n + j] = demand[j];
  return DenseLp(a, b, c).solve();
}

}  // namespace testsupport
