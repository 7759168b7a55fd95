#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "otssl/errors.hpp"
#include "otssl/ot/cost.hpp"
#include "otssl/ot/histogram.hpp"
#include "otssl/tensor.hpp"

namespace otssl {

// Optimal solution of the Monge-Kantorovich transportation problem between
// two histograms: row sums of `flow` reproduce the source, column sums the
// target, and `cost` is the LP optimum sum(flow .* C).
struct TransportPlan {
  Tensor flow;  // n_pixels x n_pixels
  double cost = 0.0;
};

namespace detail {

struct TransportArc {
  std::int32_t row;
  std::int32_t col;
  double flow;
};

// Exact transportation simplex over the dense bipartite problem.
//
// The basis is a spanning tree over source and sink nodes. Each iteration
// recomputes node potentials from the tree, prices out a block of candidate
// arcs (rolling cursor, most-negative-in-block), and pivots along the unique
// tree cycle. A run of degenerate pivots switches pricing to Bland's rule
// (lowest-index entering arc), which guarantees termination; block pricing
// resumes after the next flow-changing pivot.
//
// The hot structures are flat: a local dense copy of the active cost
// sub-matrix, intrusive doubly-linked adjacency lists for the basis arcs,
// and epoch-stamped visit marks so nothing is cleared between pivots.
class TransportationSimplex {
 public:
  TransportationSimplex(std::vector<double> supply, std::vector<double> demand,
                        const CostMatrix& cost, const std::vector<std::int32_t>& row_ids,
                        const std::vector<std::int32_t>& col_ids)
      : supply_(std::move(supply)),
        demand_(std::move(demand)),
        n_(supply_.size()),
        m_(demand_.size()),
        max_cost_(cost.max_entry()) {
    cmat_.resize(n_ * m_);
    for (std::size_t i = 0; i < n_; ++i) {
      const double* full_row = cost.row(static_cast<std::size_t>(row_ids[i]));
      double* local_row = cmat_.data() + i * m_;
      for (std::size_t j = 0; j < m_; ++j) local_row[j] = full_row[col_ids[j]];
    }
  }

  std::vector<TransportArc> solve() {
    vogel_initialize();
    run_simplex();
    std::vector<TransportArc> result;
    result.reserve(n_ + m_ - 1);
    for (const auto& arc : arcs_) {
      if (arc.row < 0) continue;  // left the basis
      result.push_back({arc.row, arc.col, std::max(arc.flow, 0.0)});
    }
    return result;
  }

 private:
  struct Arc {
    std::int32_t row;  // -1 when the slot is no longer basic
    std::int32_t col;
    double flow;
    std::int32_t next[2];  // intrusive list links, [0] row side / [1] col side
    std::int32_t prev[2];
  };

  double cost_at(std::size_t i, std::size_t j) const { return cmat_[i * m_ + j]; }
  std::size_t node_of_row(std::size_t i) const { return i; }
  std::size_t node_of_col(std::size_t j) const { return n_ + j; }

  // --- Vogel approximation -------------------------------------------------

  // Penalty bookkeeping: two smallest costs per active row/column, rescanned
  // eagerly when the cached partner leaves the active set.
  struct MinPair {
    double best = 0.0, second = 0.0;
    std::int32_t best_at = -1, second_at = -1;
  };

  void scan_row(std::size_t i) {
    MinPair mp;
    mp.best = mp.second = std::numeric_limits<double>::infinity();
    const double* row = cmat_.data() + i * m_;
    for (std::int32_t j : active_cols_) {
      const double c = row[j];
      if (c < mp.best) {
        mp.second = mp.best;
        mp.second_at = mp.best_at;
        mp.best = c;
        mp.best_at = j;
      } else if (c < mp.second) {
        mp.second = c;
        mp.second_at = j;
      }
    }
    row_min_[i] = mp;
  }

  void scan_col(std::size_t j) {
    MinPair mp;
    mp.best = mp.second = std::numeric_limits<double>::infinity();
    for (std::int32_t i : active_rows_) {
      const double c = cost_at(static_cast<std::size_t>(i), j);
      if (c < mp.best) {
        mp.second = mp.best;
        mp.second_at = mp.best_at;
        mp.best = c;
        mp.best_at = i;
      } else if (c < mp.second) {
        mp.second = c;
        mp.second_at = i;
      }
    }
    col_min_[j] = mp;
  }

  static double penalty(const MinPair& mp) {
    if (!std::isfinite(mp.second)) return mp.best;  // single partner left: forced move
    return mp.second - mp.best;
  }

  void push_arc(std::int32_t i, std::int32_t j, double flow) {
    arcs_.push_back({i, j, flow, {-1, -1}, {-1, -1}});
  }

  void vogel_initialize() {
    active_rows_.resize(n_);
    active_cols_.resize(m_);
    for (std::size_t i = 0; i < n_; ++i) active_rows_[i] = static_cast<std::int32_t>(i);
    for (std::size_t j = 0; j < m_; ++j) active_cols_[j] = static_cast<std::int32_t>(j);
    row_min_.resize(n_);
    col_min_.resize(m_);
    for (std::size_t i = 0; i < n_; ++i) scan_row(i);
    for (std::size_t j = 0; j < m_; ++j) scan_col(j);

    std::vector<double> s = supply_;
    std::vector<double> d = demand_;
    arcs_.reserve(2 * (n_ + m_));

    while (!active_rows_.empty() && !active_cols_.empty()) {
      // Highest penalty wins; rows break ties against columns, lower index
      // breaks ties within a side. All deterministic.
      double best_pen = -1.0;
      bool from_row = true;
      std::int32_t pick = -1;
      for (std::int32_t i : active_rows_) {
        const double p = penalty(row_min_[static_cast<std::size_t>(i)]);
        if (p > best_pen) {
          best_pen = p;
          from_row = true;
          pick = i;
        }
      }
      for (std::int32_t j : active_cols_) {
        const double p = penalty(col_min_[static_cast<std::size_t>(j)]);
        if (p > best_pen) {
          best_pen = p;
          from_row = false;
          pick = j;
        }
      }

      std::int32_t i, j;
      if (from_row) {
        i = pick;
        j = row_min_[static_cast<std::size_t>(pick)].best_at;
      } else {
        j = pick;
        i = col_min_[static_cast<std::size_t>(pick)].best_at;
      }

      auto& si = s[static_cast<std::size_t>(i)];
      auto& dj = d[static_cast<std::size_t>(j)];

      // Exactly one node leaves per allocation so the arcs form a spanning
      // tree; when one side is down to its last node the other side must
      // shrink regardless of which mass runs out first.
      if (active_rows_.size() == 1 && active_cols_.size() == 1) {
        push_arc(i, j, std::min(si, dj));
        si = dj = 0.0;
        active_rows_.clear();
        active_cols_.clear();
        break;
      }
      if (active_cols_.size() == 1 || (active_rows_.size() > 1 && si <= dj)) {
        push_arc(i, j, si);
        dj = std::max(0.0, dj - si);
        si = 0.0;
        deactivate_row(i);
      } else {
        push_arc(i, j, dj);
        si = std::max(0.0, si - dj);
        dj = 0.0;
        deactivate_col(j);
      }
    }

    for (double rem : s)
      if (std::abs(rem) > 1e-7) throw numeric_error("transport: unallocated supply after init");
    for (double rem : d)
      if (std::abs(rem) > 1e-7) throw numeric_error("transport: unallocated demand after init");
    if (arcs_.size() != n_ + m_ - 1)
      throw numeric_error("transport: initial basis is not a spanning tree");

    head_.assign(n_ + m_, -1);
    for (std::size_t id = 0; id < arcs_.size(); ++id) attach_arc(static_cast<std::int32_t>(id));
  }

  void deactivate_row(std::int32_t i) {
    active_rows_.erase(std::find(active_rows_.begin(), active_rows_.end(), i));
    for (std::int32_t j : active_cols_) {
      auto& mp = col_min_[static_cast<std::size_t>(j)];
      if (mp.best_at == i || mp.second_at == i) scan_col(static_cast<std::size_t>(j));
    }
  }

  void deactivate_col(std::int32_t j) {
    active_cols_.erase(std::find(active_cols_.begin(), active_cols_.end(), j));
    for (std::int32_t i : active_rows_) {
      auto& mp = row_min_[static_cast<std::size_t>(i)];
      if (mp.best_at == j || mp.second_at == j) scan_row(static_cast<std::size_t>(i));
    }
  }

  // --- basis tree ------------------------------------------------------------

  void attach_arc(std::int32_t id) {
    Arc& arc = arcs_[static_cast<std::size_t>(id)];
    const std::size_t ends[2] = {node_of_row(static_cast<std::size_t>(arc.row)),
                                 node_of_col(static_cast<std::size_t>(arc.col))};
    for (int side = 0; side < 2; ++side) {
      const std::int32_t old_head = head_[ends[side]];
      arc.next[side] = old_head;
      arc.prev[side] = -1;
      if (old_head >= 0) arcs_[static_cast<std::size_t>(old_head)].prev[side] = id;
      head_[ends[side]] = id;
    }
  }

  void detach_arc(std::int32_t id) {
    Arc& arc = arcs_[static_cast<std::size_t>(id)];
    const std::size_t ends[2] = {node_of_row(static_cast<std::size_t>(arc.row)),
                                 node_of_col(static_cast<std::size_t>(arc.col))};
    for (int side = 0; side < 2; ++side) {
      const std::int32_t prev = arc.prev[side];
      const std::int32_t next = arc.next[side];
      if (prev >= 0)
        link_of(prev, ends[side], /*next_slot=*/true) = next;
      else
        head_[ends[side]] = next;
      if (next >= 0) link_of(next, ends[side], /*next_slot=*/false) = prev;
    }
    arc.row = -1;
  }

  // The list slot (row side or col side) an arc uses at a given node.
  std::int32_t& link_of(std::int32_t id, std::size_t node, bool next_slot) {
    Arc& arc = arcs_[static_cast<std::size_t>(id)];
    const int side = node < n_ ? 0 : 1;
    return next_slot ? arc.next[side] : arc.prev[side];
  }

  // Potentials plus parent/depth pointers via one BFS over the basis tree.
  void compute_potentials() {
    ++epoch_;
    bfs_queue_[0] = 0;
    stamp_[0] = epoch_;
    parent_node_[0] = -1;
    parent_arc_[0] = -1;
    depth_[0] = 0;
    u_[0] = 0.0;
    std::size_t head = 0, tail = 1;
    const std::size_t nodes = n_ + m_;
    while (head < tail) {
      const std::int32_t node = bfs_queue_[head++];
      const int side = static_cast<std::size_t>(node) < n_ ? 0 : 1;
      for (std::int32_t id = head_[static_cast<std::size_t>(node)]; id >= 0;
           id = arcs_[static_cast<std::size_t>(id)].next[side]) {
        const Arc& arc = arcs_[static_cast<std::size_t>(id)];
        const std::size_t ri = static_cast<std::size_t>(arc.row);
        const std::size_t cj = static_cast<std::size_t>(arc.col);
        const std::int32_t other = static_cast<std::int32_t>(side == 0 ? node_of_col(cj) : ri);
        if (stamp_[static_cast<std::size_t>(other)] == epoch_) continue;
        stamp_[static_cast<std::size_t>(other)] = epoch_;
        parent_node_[static_cast<std::size_t>(other)] = node;
        parent_arc_[static_cast<std::size_t>(other)] = id;
        depth_[static_cast<std::size_t>(other)] = depth_[static_cast<std::size_t>(node)] + 1;
        if (side == 0)
          v_[cj] = cost_at(ri, cj) - u_[ri];
        else
          u_[ri] = cost_at(ri, cj) - v_[cj];
        bfs_queue_[tail++] = other;
      }
    }
    if (tail != nodes) throw numeric_error("transport: basis tree is disconnected");
  }

  // Block pricing: most negative reduced cost within a rolling window.
  bool find_entering_block(std::size_t& ei, std::size_t& ej) {
    const std::size_t total = n_ * m_;
    double best = -opt_tol_;
    bool found = false;
    std::size_t scanned = 0;
    std::size_t i = cursor_ / m_;
    std::size_t j = cursor_ % m_;
    double ui = u_[i];
    const double* row = cmat_.data() + i * m_;
    while (scanned < total) {
      const std::size_t stop = std::min(total, scanned + block_size_);
      for (; scanned < stop; ++scanned) {
        const double r = row[j] - ui - v_[j];
        if (r < best) {
          best = r;
          ei = i;
          ej = j;
          found = true;
        }
        if (++j == m_) {
          j = 0;
          if (++i == n_) i = 0;
          ui = u_[i];
          row = cmat_.data() + i * m_;
        }
      }
      if (found) break;
    }
    cursor_ = i * m_ + j;
    return found;
  }

  bool find_entering_bland(std::size_t& ei, std::size_t& ej) {
    for (std::size_t i = 0; i < n_; ++i) {
      const double ui = u_[i];
      const double* row = cmat_.data() + i * m_;
      for (std::size_t j = 0; j < m_; ++j) {
        if (row[j] - ui - v_[j] < -opt_tol_) {
          ei = i;
          ej = j;
          return true;
        }
      }
    }
    return false;
  }

  // Tree path between the entering arc's endpoints, found by walking parent
  // pointers with depth alignment. The concatenated arc list runs from the
  // row endpoint to the col endpoint; by bipartiteness the arcs alternate
  // against/with the entering direction starting with "against".
  void collect_cycle(std::size_t ei, std::size_t ej) {
    cycle_.clear();
    path_b_.clear();
    std::int32_t a = static_cast<std::int32_t>(node_of_row(ei));
    std::int32_t b = static_cast<std::int32_t>(node_of_col(ej));
    while (depth_[static_cast<std::size_t>(a)] > depth_[static_cast<std::size_t>(b)]) {
      cycle_.push_back(parent_arc_[static_cast<std::size_t>(a)]);
      a = parent_node_[static_cast<std::size_t>(a)];
    }
    while (depth_[static_cast<std::size_t>(b)] > depth_[static_cast<std::size_t>(a)]) {
      path_b_.push_back(parent_arc_[static_cast<std::size_t>(b)]);
      b = parent_node_[static_cast<std::size_t>(b)];
    }
    while (a != b) {
      cycle_.push_back(parent_arc_[static_cast<std::size_t>(a)]);
      a = parent_node_[static_cast<std::size_t>(a)];
      path_b_.push_back(parent_arc_[static_cast<std::size_t>(b)]);
      b = parent_node_[static_cast<std::size_t>(b)];
    }
    cycle_.insert(cycle_.end(), path_b_.rbegin(), path_b_.rend());
  }

  // True if `node` sits in the subtree hanging below `below` (inclusive).
  bool in_subtree_of(std::int32_t node, std::int32_t below) const {
    while (node >= 0) {
      if (node == below) return true;
      node = parent_node_[static_cast<std::size_t>(node)];
    }
    return false;
  }

  // Re-hangs the component cut off by the leaving arc from the entering
  // arc's endpoint inside it: parent, depth and potentials are recomputed
  // for that component only. `inside` is the endpoint of the (already
  // attached) entering arc that lies in the cut component, `outside` the
  // other one, `entering` the arc id.
  void rehang_subtree(std::int32_t inside, std::int32_t outside, std::int32_t entering) {
    parent_node_[static_cast<std::size_t>(inside)] = outside;
    parent_arc_[static_cast<std::size_t>(inside)] = entering;
    depth_[static_cast<std::size_t>(inside)] = depth_[static_cast<std::size_t>(outside)] + 1;
    bfs_queue_[0] = inside;
    std::size_t head = 0, tail = 1;
    while (head < tail) {
      const std::int32_t node = bfs_queue_[head++];
      const std::size_t un = static_cast<std::size_t>(node);
      const int side = un < n_ ? 0 : 1;
      {
        const Arc& parc = arcs_[static_cast<std::size_t>(parent_arc_[un])];
        const std::size_t ri = static_cast<std::size_t>(parc.row);
        const std::size_t cj = static_cast<std::size_t>(parc.col);
        if (side == 0)
          u_[ri] = cost_at(ri, cj) - v_[cj];
        else
          v_[cj] = cost_at(ri, cj) - u_[ri];
      }
      for (std::int32_t id = head_[un]; id >= 0;
           id = arcs_[static_cast<std::size_t>(id)].next[side]) {
        if (id == parent_arc_[un]) continue;
        const Arc& arc = arcs_[static_cast<std::size_t>(id)];
        const std::int32_t other = static_cast<std::int32_t>(
            side == 0 ? node_of_col(static_cast<std::size_t>(arc.col))
                      : static_cast<std::size_t>(arc.row));
        parent_node_[static_cast<std::size_t>(other)] = node;
        parent_arc_[static_cast<std::size_t>(other)] = id;
        depth_[static_cast<std::size_t>(other)] = depth_[un] + 1;
        bfs_queue_[tail++] = other;
      }
    }
  }

  void run_simplex() {
    opt_tol_ = 1e-11 * std::max(1.0, max_cost_);
    block_size_ = std::max<std::size_t>(
        64, static_cast<std::size_t>(std::sqrt(static_cast<double>(n_ * m_))));
    const std::size_t nodes = n_ + m_;
    const std::size_t degenerate_limit = 4 * nodes;
    // Hard cap: well beyond anything a healthy solve needs at this scale.
    const std::size_t max_pivots = 400000 + 200 * nodes;
    // Incremental potential updates drift slowly; refresh from scratch at a
    // fixed cadence and always before certifying optimality.
    const std::size_t refresh_period = 1024;
    std::size_t degenerate_streak = 0;
    std::size_t since_refresh = 0;
    bool bland_mode = false;

    u_.resize(n_);
    v_.resize(m_);
    parent_node_.resize(nodes);
    parent_arc_.resize(nodes);
    depth_.resize(nodes);
    stamp_.assign(nodes, 0);
    bfs_queue_.resize(nodes);
    epoch_ = 0;

    compute_potentials();
    for (std::size_t pivot = 0; pivot < max_pivots; ++pivot) {
      if (++since_refresh >= refresh_period) {
        compute_potentials();
        since_refresh = 0;
      }
      std::size_t ei = 0, ej = 0;
      bool found = bland_mode ? find_entering_bland(ei, ej) : find_entering_block(ei, ej);
      if (!found && !bland_mode) found = find_entering_bland(ei, ej);
      if (!found) {
        // Candidate-free under possibly stale potentials: refresh and give
        // the exhaustive scan one more chance before declaring optimality.
        if (since_refresh == 0) return;
        compute_potentials();
        since_refresh = 0;
        if (!find_entering_bland(ei, ej)) return;
      }

      collect_cycle(ei, ej);

      // Leaving arc: smallest flow among arcs oriented against the entering
      // direction (even positions on the collected path); lowest arc id
      // breaks ties, which is the Bland-style choice.
      double theta = std::numeric_limits<double>::infinity();
      std::int32_t leaving = -1;
      for (std::size_t k = 0; k < cycle_.size(); k += 2) {
        const auto id = cycle_[k];
        const double f = arcs_[static_cast<std::size_t>(id)].flow;
        if (f < theta || (f == theta && id < leaving)) {
          theta = f;
          leaving = id;
        }
      }
      if (leaving < 0) throw numeric_error("transport: pivot cycle without leaving arc");

      for (std::size_t k = 0; k < cycle_.size(); ++k) {
        auto& arc = arcs_[static_cast<std::size_t>(cycle_[k])];
        arc.flow += (k % 2 == 0) ? -theta : theta;
        if (arc.flow < 0.0) arc.flow = 0.0;  // floating-point dust
      }

      // The component below the leaving arc re-hangs from the entering arc.
      const Arc& larc = arcs_[static_cast<std::size_t>(leaving)];
      const std::int32_t lrow = static_cast<std::int32_t>(node_of_row(
          static_cast<std::size_t>(larc.row)));
      const std::int32_t lcol = static_cast<std::int32_t>(node_of_col(
          static_cast<std::size_t>(larc.col)));
      const std::int32_t below =
          parent_arc_[static_cast<std::size_t>(lrow)] == leaving ? lrow : lcol;

      const std::int32_t enter_row = static_cast<std::int32_t>(node_of_row(ei));
      const std::int32_t enter_col = static_cast<std::int32_t>(node_of_col(ej));
      const bool row_inside = in_subtree_of(enter_row, below);

      detach_arc(leaving);
      push_arc(static_cast<std::int32_t>(ei), static_cast<std::int32_t>(ej), theta);
      const std::int32_t entering = static_cast<std::int32_t>(arcs_.size() - 1);
      attach_arc(entering);
      if (row_inside)
        rehang_subtree(enter_row, enter_col, entering);
      else
        rehang_subtree(enter_col, enter_row, entering);

      if (theta > 0.0) {
        degenerate_streak = 0;
        bland_mode = false;
      } else if (++degenerate_streak > degenerate_limit) {
        bland_mode = true;
      }
    }
    throw numeric_error("transport: pivot limit exceeded");
  }

  std::vector<double> supply_;
  std::vector<double> demand_;
  std::size_t n_;
  std::size_t m_;
  double max_cost_;
  std::vector<double> cmat_;  // dense active-cost copy, n_ x m_

  std::vector<Arc> arcs_;
  std::vector<std::int32_t> head_;
  std::vector<std::int32_t> active_rows_, active_cols_;
  std::vector<MinPair> row_min_, col_min_;
  std::vector<double> u_, v_;
  std::vector<std::int32_t> parent_arc_, parent_node_, depth_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t epoch_ = 0;
  std::vector<std::int32_t> bfs_queue_;
  std::vector<std::int32_t> cycle_, path_b_;
  std::size_t cursor_ = 0;
  std::size_t block_size_ = 64;
  double opt_tol_ = 1e-11;
};

// Shared preamble: marginal validation, drift repair, zero-bin stripping.
inline std::vector<TransportArc> solve_transport(const Histogram& a, const Histogram& b,
                                                 const CostMatrix& c) {
  if (a.size() != c.n_pixels() || b.size() != c.n_pixels())
    throw shape_error("emd: histogram size does not match cost matrix");
  a.validate();
  b.validate();

  const double ta = a.total();
  const double tb = b.total();
  if (std::abs(ta - tb) > kHistogramMassTolerance)
    throw numeric_error("emd: infeasible marginals (mass mismatch)");
  const double rescale = ta / tb;

  std::vector<double> supply, demand;
  std::vector<std::int32_t> row_ids, col_ids;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.mass[i] > 0.0) {
      supply.push_back(a.mass[i]);
      row_ids.push_back(static_cast<std::int32_t>(i));
    }
  for (std::size_t j = 0; j < b.size(); ++j)
    if (b.mass[j] > 0.0) {
      demand.push_back(b.mass[j] * rescale);
      col_ids.push_back(static_cast<std::int32_t>(j));
    }
  if (supply.empty() || demand.empty()) throw numeric_error("emd: empty marginal");

  TransportationSimplex solver(std::move(supply), std::move(demand), c, row_ids, col_ids);
  auto arcs = solver.solve();
  // Map back to full-grid pixel indices.
  for (auto& arc : arcs) {
    arc.row = row_ids[static_cast<std::size_t>(arc.row)];
    arc.col = col_ids[static_cast<std::size_t>(arc.col)];
  }
  return arcs;
}

}  // namespace detail

// Optimal transport cost only; the hot path for pairwise distances.
inline double emd_cost(const Histogram& a, const Histogram& b, const CostMatrix& c) {
  double cost = 0.0;
  for (const auto& arc : detail::solve_transport(a, b, c))
    cost += arc.flow * c.at(static_cast<std::size_t>(arc.row), static_cast<std::size_t>(arc.col));
  return cost;
}

// Full plan, including the dense flow matrix.
inline TransportPlan emd(const Histogram& a, const Histogram& b, const CostMatrix& c) {
  TransportPlan plan;
  plan.flow = Tensor({c.n_pixels(), c.n_pixels()});
  for (const auto& arc : detail::solve_transport(a, b, c)) {
    plan.flow.at(static_cast<std::size_t>(arc.row), static_cast<std::size_t>(arc.col)) += arc.flow;
    plan.cost +=
        arc.flow * c.at(static_cast<std::size_t>(arc.row), static_cast<std::size_t>(arc.col));
  }
  return plan;
}

}  // namespace otssl
