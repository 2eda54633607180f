#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace cdlab {

/// Primal network simplex for uncapacitated transportation problems.
///
/// Nodes 0..n_supply-1 carry supplies, nodes n_supply.. carry demands; arcs
/// run supply -> demand. An artificial root joins every node, with zero cost
/// from supplies and a large cost toward demands, so the initial tree is
/// feasible. Pivots follow the strongly feasible leaving rule, which rules
/// out cycling on degenerate bases. Reduced costs are c + pi[s] - pi[t].
///
/// Cost is the arithmetic type of costs and potentials (double or long
/// double); flows are double.
template <typename Cost = double>
class TransportSimplex {
 public:
  enum class Status { Optimal, Infeasible, IterationLimit };

  TransportSimplex(std::vector<double> supply, std::vector<double> demand)
      : n_supply_(static_cast<int>(supply.size())),
        n_demand_(static_cast<int>(demand.size())),
        supply_(std::move(supply)),
        demand_(std::move(demand)) {}

  /// Adds arc i -> j (supply index, demand index); returns its id.
  int add_arc(int i, int j, Cost cost) {
    src_.push_back(i);
    dst_.push_back(n_supply_ + j);
    cost_.push_back(cost);
    return static_cast<int>(src_.size()) - 1;
  }

  int arc_count() const { return static_cast<int>(src_.size()); }
  int arc_source(int e) const { return src_[e]; }
  int arc_target(int e) const { return dst_[e] - n_supply_; }
  Cost arc_cost(int e) const { return cost_[e]; }

  /// rc_tol: entering threshold on reduced cost (an arc enters when
  /// rc < -rc_tol).
  Status run(Cost rc_tol, std::int64_t max_pivots = -1) {
    init();
    const int m = arc_count();
    if (max_pivots < 0) max_pivots = 50LL * (m + nodes_) + 1000;
    const int block = std::max(10, static_cast<int>(std::sqrt(static_cast<double>(m))));
    int next = 0;
    std::int64_t pivots = 0;
    for (;;) {
      const int in = find_entering(next, block, rc_tol);
      if (in < 0) break;
      if (++pivots > max_pivots) return Status::IterationLimit;
      pivot(in);
    }
    pivots_ = pivots;
    for (int u = 0; u < n_supply_ + n_demand_; ++u) {
      if (pred_[u] >= m && flow_[pred_[u]] > kFlowResidual) return Status::Infeasible;
    }
    return Status::Optimal;
  }

  double flow(int e) const { return flow_[e]; }
  Cost potential_supply(int i) const { return pi_[i]; }
  Cost potential_demand(int j) const { return pi_[n_supply_ + j]; }
  Cost reduced_cost(int e) const { return cost_[e] + pi_[src_[e]] - pi_[dst_[e]]; }
  bool is_basic(int e) const { return basic_[e] != 0; }
  std::int64_t pivots() const { return pivots_; }

  /// Largest residual flow left on artificial arcs.
  static constexpr double kFlowResidual = 1e-12;

 private:
  enum Dir : signed char { Up = 1, Down = -1 };

  void init() {
    const int m = arc_count();
    nodes_ = n_supply_ + n_demand_ + 1;
    root_ = nodes_ - 1;
    Cost max_cost = 0;
    for (Cost c : cost_) max_cost = std::max(max_cost, c < 0 ? -c : c);
    const Cost art = (max_cost + 1) * static_cast<Cost>(nodes_);

    // Arc arrays extended by one artificial arc per non-root node.
    all_src_ = src_;
    all_dst_ = dst_;
    all_cost_ = cost_;
    flow_.assign(m, 0.0);
    basic_.assign(m, 0);
    all_src_.resize(m + nodes_ - 1);
    all_dst_.resize(m + nodes_ - 1);
    all_cost_.resize(m + nodes_ - 1);
    flow_.resize(m + nodes_ - 1);

    parent_.assign(nodes_, -1);
    pred_.assign(nodes_, -1);
    dir_.assign(nodes_, Up);
    depth_.assign(nodes_, 0);
    pi_.assign(nodes_, 0);
    children_.assign(nodes_, {});
    for (int u = 0; u < root_; ++u) {
      const int e = m + u;
      parent_[u] = root_;
      pred_[u] = e;
      depth_[u] = 1;
      children_[root_].push_back(u);
      if (u < n_supply_) {
        all_src_[e] = u;
        all_dst_[e] = root_;
        all_cost_[e] = 0;
        flow_[e] = supply_[u];
        dir_[u] = Up;
        pi_[u] = 0;
      } else {
        all_src_[e] = root_;
        all_dst_[e] = u;
        all_cost_[e] = art;
        flow_[e] = demand_[u - n_supply_];
        dir_[u] = Down;
        pi_[u] = art;
      }
    }
  }

  Cost rc(int e) const { return all_cost_[e] + pi_[all_src_[e]] - pi_[all_dst_[e]]; }

  /// Block search: scans arcs cyclically and returns the most negative
  /// reduced cost of the first block that contains a candidate.
  int find_entering(int& next, int block, Cost rc_tol) const {
    const int m = arc_count();
    Cost best = -rc_tol;
    int best_arc = -1;
    int seen = 0;
    for (int k = 0; k < m; ++k) {
      const int e = (next + k) % m;
      if (!basic_[e]) {
        const Cost r = rc(e);
        if (r < best) {
          best = r;
          best_arc = e;
        }
      }
      if (++seen == block) {
        if (best_arc >= 0) {
          next = (e + 1) % m;
          return best_arc;
        }
        seen = 0;
      }
    }
    return best_arc;
  }

  void pivot(int in) {
    const int first = all_src_[in];
    const int second = all_dst_[in];
    int a = first;
    int b = second;
    while (a != b) {
      if (depth_[a] >= depth_[b]) {
        a = parent_[a];
      } else {
        b = parent_[b];
      }
    }
    const int join = a;

    // Strongly feasible leaving rule: last blocking arc in cycle orientation.
    double delta = std::numeric_limits<double>::infinity();
    int u_out = -1;
    int side = 0;
    for (int u = first; u != join; u = parent_[u]) {
      if (dir_[u] == Up && flow_[pred_[u]] < delta) {
        delta = flow_[pred_[u]];
        u_out = u;
        side = 1;
      }
    }
    for (int u = second; u != join; u = parent_[u]) {
      if (dir_[u] == Down && flow_[pred_[u]] <= delta) {
        delta = flow_[pred_[u]];
        u_out = u;
        side = 2;
      }
    }
    if (u_out < 0) {
      throw std::runtime_error("network simplex: unbounded cycle");
    }

    if (delta > 0.0) {
      flow_[in] += delta;
      for (int u = first; u != join; u = parent_[u]) {
        flow_[pred_[u]] += dir_[u] == Up ? -delta : delta;
      }
      for (int u = second; u != join; u = parent_[u]) {
        flow_[pred_[u]] += dir_[u] == Up ? delta : -delta;
      }
    }
    const int out = pred_[u_out];
    flow_[out] = 0.0;
    if (out < arc_count()) basic_[out] = 0;
    if (in < arc_count()) basic_[in] = 1;

    const int u_in = side == 1 ? first : second;
    const int v_in = side == 1 ? second : first;

    detach(u_out);
    // Reverse the tree path u_in .. u_out so u_in becomes the subtree root.
    int node = u_in;
    int new_parent = v_in;
    int new_pred = in;
    signed char new_dir = all_src_[in] == u_in ? Up : Down;
    for (;;) {
      const int old_parent = parent_[node];
      const int old_pred = pred_[node];
      const signed char old_dir = dir_[node];
      if (node != u_out) detach(node);
      parent_[node] = new_parent;
      pred_[node] = new_pred;
      dir_[node] = new_dir;
      children_[new_parent].push_back(node);
      if (node == u_out) break;
      new_parent = node;
      new_pred = old_pred;
      new_dir = static_cast<signed char>(-old_dir);
      node = old_parent;
    }
    refresh_subtree(u_in);
  }

  void detach(int u) {
    auto& siblings = children_[parent_[u]];
    const auto it = std::find(siblings.begin(), siblings.end(), u);
    *it = siblings.back();
    siblings.pop_back();
  }

  void refresh_subtree(int top) {
    stack_.clear();
    stack_.push_back(top);
    while (!stack_.empty()) {
      const int u = stack_.back();
      stack_.pop_back();
      const int p = parent_[u];
      const int e = pred_[u];
      depth_[u] = depth_[p] + 1;
      pi_[u] = dir_[u] == Up ? pi_[p] - all_cost_[e] : pi_[p] + all_cost_[e];
      for (int c : children_[u]) stack_.push_back(c);
    }
  }

  int n_supply_;
  int n_demand_;
  std::vector<double> supply_;
  std::vector<double> demand_;
  std::vector<int> src_;
  std::vector<int> dst_;
  std::vector<Cost> cost_;

  int nodes_ = 0;
  int root_ = 0;
  std::vector<int> all_src_;
  std::vector<int> all_dst_;
  std::vector<Cost> all_cost_;
  std::vector<double> flow_;
  std::vector<char> basic_;
  std::vector<int> parent_;
  std::vector<int> pred_;
  std::vector<signed char> dir_;
  std::vector<int> depth_;
  std::vector<Cost> pi_;
  std::vector<std::vector<int>> children_;
  std::vector<int> stack_;
  std::int64_t pivots_ = 0;
};

}  // namespace cdlab
