#pragma once

// Exact solver for the bounded Lipschitz linear program
//
//   maximize   sum_i c_i f_i
//   subject to f_i - f_j <= |p_i - p_j| / r   for all i != j
//              -b_i <= f_i <= b_i
//
// Its dual is an uncapacitated min-cost flow: node i carries supply c_i, arc
// i -> j costs |p_i - p_j| / r, and a ground node g is joined to every i by
// arcs i -> g and g -> i of cost b_i. Node potentials of an optimal spanning
// tree (with pi_g = 0) are an optimal f. The flow problem is solved with a
// primal network simplex over a strongly feasible tree; pairwise arcs are
// generated lazily from the violated constraints of the current potentials.
//
// A solver instance is reusable. When a new problem has the same size and
// the same supplies, only costs differ, so the previous optimal tree is still
// primal feasible and the simplex restarts from it.

#include "czo/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <unordered_set>
#include <vector>

namespace czo::detail {

class TransportLP {
 public:
  static constexpr double kPricingTol = 1e-11;
  static constexpr double kSeparationTol = 1e-10;
  static constexpr int kSeedNeighbours = 8;
  static constexpr std::size_t kSeedOpposite = 4;
  static constexpr std::size_t kCutsPerNode = 3;
  static constexpr std::size_t kPoolFactor = 64;

  std::size_t pivots() const noexcept { return pivots_; }
  std::size_t separation_rounds() const noexcept { return rounds_; }
  std::size_t warm_starts() const noexcept { return warm_starts_; }
  std::size_t arc_count() const noexcept { return src_.size(); }

  /// Optimal objective; the optimal potentials land in f.
  double solve(std::span<const Point> positions, std::span<const double> bounds, std::span<const double> c,
               double r, std::vector<double>& f) {
    const int n = static_cast<int>(positions.size());
    if (bounds.size() != positions.size() || c.size() != positions.size())
      throw InputError("LP positions, bounds and supplies differ in length");
    if (!(r > 0.0)) throw InputError("LP radius must be positive");
    const bool same_shape = n == n_ && n > 0 && static_cast<int>(positions[0].size()) == dim_ &&
                            src_.size() <= kPoolFactor * static_cast<std::size_t>(n + 1);
    const bool warm = same_shape && has_tree_ && std::equal(c.begin(), c.end(), supply_.begin(), supply_.end());
    if (!same_shape) reset(positions);
    inv_r_ = 1.0 / r;
    load_geometry(positions, bounds);
    supply_.assign(c.begin(), c.end());

    if (warm) {
      ++warm_starts_;
      recompute_potentials();
    } else {
      seed_transport_arcs();
      init_tree();
    }
    for (;;) {
      run_simplex();
      ++rounds_;
      if (!separate()) break;
    }
    f.assign(pi_.begin(), pi_.begin() + n_);
    double obj = 0.0;
    for (int i = 0; i < n_; ++i) obj += c[i] * f[i];
    return obj;
  }

 private:
  int ground() const noexcept { return n_; }

  void reset(std::span<const Point> positions) {
    n_ = static_cast<int>(positions.size());
    dim_ = n_ > 0 ? static_cast<int>(positions[0].size()) : 0;
    src_.clear();
    dst_.clear();
    cost_.clear();
    flow_.clear();
    in_tree_.clear();
    pairs_.clear();
    has_tree_ = false;
    for (int i = 0; i < n_; ++i) {
      add_arc(i, ground());
      add_arc(ground(), i);
    }
    pending_seed_ = true;
  }

  void load_geometry(std::span<const Point> positions, std::span<const double> bounds) {
    coords_.resize(static_cast<std::size_t>(n_) * dim_);
    axes_.resize(coords_.size());
    for (int i = 0; i < n_; ++i)
      for (int k = 0; k < dim_; ++k) {
        coords_[static_cast<std::size_t>(i) * dim_ + k] = positions[i](k);
        axes_[static_cast<std::size_t>(k) * n_ + i] = positions[i](k);
      }
    bound_.assign(bounds.begin(), bounds.end());
    if (pending_seed_) {
      seed_pair_arcs();
      pending_seed_ = false;
    }
    for (std::size_t e = 0; e < src_.size(); ++e) cost_[e] = arc_cost(static_cast<int>(e));
  }

  double arc_cost(int e) const {
    const int s = src_[e], t = dst_[e];
    if (s == ground()) return bound_[t];
    if (t == ground()) return bound_[s];
    return pair_cost(s, t);
  }

  void add_arc(int s, int t) {
    src_.push_back(s);
    dst_.push_back(t);
    cost_.push_back(0.0);
    flow_.push_back(0.0);
    in_tree_.push_back(0);
  }

  double squared_distance(int i, int j) const {
    const double* a = &coords_[static_cast<std::size_t>(i) * dim_];
    const double* b = &coords_[static_cast<std::size_t>(j) * dim_];
    double d2 = 0.0;
    for (int k = 0; k < dim_; ++k) d2 += (a[k] - b[k]) * (a[k] - b[k]);
    return d2;
  }

  double pair_cost(int i, int j) const { return std::sqrt(squared_distance(i, j)) * inv_r_; }

  static std::uint64_t pair_key(int i, int j) {
    if (i > j) std::swap(i, j);
    return (static_cast<std::uint64_t>(i) << 32) | static_cast<std::uint32_t>(j);
  }

  bool add_pair(int i, int j) {
    if (!pairs_.insert(pair_key(i, j)).second) return false;
    const double c = pair_cost(i, j);
    add_arc(i, j);
    cost_.back() = c;
    add_arc(j, i);
    cost_.back() = c;
    return true;
  }

  // Neighbours in coordinate order along every axis give a sparse pool on
  // which lines and grids are already nearly optimal.
  void seed_pair_arcs() {
    if (n_ < 2) return;
    const int per_axis = std::max(1, kSeedNeighbours / (2 * dim_));
    std::vector<int> order(n_);
    for (int a = 0; a < dim_; ++a) {
      const double* axis = &axes_[static_cast<std::size_t>(a) * n_];
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return axis[i] < axis[j]; });
      for (int k = 0; k < n_; ++k)
        for (int off = 1; off <= per_axis && k + off < n_; ++off) add_pair(order[k], order[k + off]);
    }
  }

  // Metric costs admit an optimal flow that ships every unit straight from a
  // positive to a negative supply, so the nearest opposite-sign nodes carry
  // most of the optimal arcs.
  void seed_transport_arcs() {
    std::vector<std::pair<double, int>> cand;
    for (int i = 0; i < n_; ++i) {
      if (supply_[i] == 0.0) continue;
      cand.clear();
      for (int j = 0; j < n_; ++j)
        if ((supply_[i] > 0.0 && supply_[j] < 0.0) || (supply_[i] < 0.0 && supply_[j] > 0.0))
          cand.emplace_back(squared_distance(i, j), j);
      const std::size_t k = std::min(cand.size(), kSeedOpposite);
      std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
      for (std::size_t q = 0; q < k; ++q) add_pair(i, cand[q].second);
    }
  }

  void init_tree() {
    const int N = n_ + 1;
    std::fill(flow_.begin(), flow_.end(), 0.0);
    std::fill(in_tree_.begin(), in_tree_.end(), 0);
    parent_.assign(N, -1);
    pred_.assign(N, -1);
    depth_.assign(N, 0);
    pi_.assign(N, 0.0);
    adj_.assign(N, {});
    for (int i = 0; i < n_; ++i) {
      // Zero-flow tree arcs must point away from the root.
      const int arc = supply_[i] > 0.0 ? 2 * i : 2 * i + 1;
      flow_[arc] = std::abs(supply_[i]);
      in_tree_[arc] = 1;
      parent_[i] = ground();
      pred_[i] = arc;
      depth_[i] = 1;
      pi_[i] = supply_[i] > 0.0 ? bound_[i] : -bound_[i];
      adj_[i].push_back(arc);
      adj_[ground()].push_back(arc);
    }
    next_arc_ = 0;
    has_tree_ = true;
  }

  void recompute_potentials() {
    pi_[ground()] = 0.0;
    stack_.assign(1, ground());
    while (!stack_.empty()) {
      const int w = stack_.back();
      stack_.pop_back();
      for (int arc : adj_[w]) {
        const int nb = src_[arc] == w ? dst_[arc] : src_[arc];
        if (nb == parent_[w]) continue;
        pi_[nb] = src_[arc] == w ? pi_[w] - cost_[arc] : pi_[w] + cost_[arc];
        stack_.push_back(nb);
      }
    }
  }

  double reduced_cost(int e) const { return cost_[e] - pi_[src_[e]] + pi_[dst_[e]]; }

  int find_entering() {
    const int M = static_cast<int>(src_.size());
    const int block = std::max(16, static_cast<int>(std::sqrt(static_cast<double>(M))));
    double best_rc = -kPricingTol;
    int best = -1;
    int cnt = block;
    for (int k = 0; k < M; ++k) {
      int e = next_arc_ + k;
      if (e >= M) e -= M;
      if (!in_tree_[e]) {
        const double rc = reduced_cost(e);
        if (rc < best_rc) {
          best_rc = rc;
          best = e;
        }
      }
      if (--cnt == 0) {
        if (best >= 0) {
          next_arc_ = e + 1 >= M ? 0 : e + 1;
          return best;
        }
        cnt = block;
      }
    }
    return best;
  }

  void remove_tree_arc(int node, int arc) {
    auto& v = adj_[node];
    auto it = std::find(v.begin(), v.end(), arc);
    *it = v.back();
    v.pop_back();
  }

  void pivot(int e) {
    const int u = src_[e], v = dst_[e];
    int a = u, b = v;
    while (a != b) {
      if (depth_[a] > depth_[b]) a = parent_[a];
      else if (depth_[b] > depth_[a]) b = parent_[b];
      else {
        a = parent_[a];
        b = parent_[b];
      }
    }
    const int join = a;

    // Cunningham's rule: the last blocking arc in cycle orientation from the
    // join keeps the tree strongly feasible.
    double delta = std::numeric_limits<double>::infinity();
    int out = -1, side = 0;
    for (int w = u; w != join; w = parent_[w]) {
      const int arc = pred_[w];
      if (src_[arc] == w && flow_[arc] < delta) {
        delta = flow_[arc];
        out = w;
        side = 1;
      }
    }
    for (int w = v; w != join; w = parent_[w]) {
      const int arc = pred_[w];
      if (dst_[arc] == w && flow_[arc] <= delta) {
        delta = flow_[arc];
        out = w;
        side = 2;
      }
    }
    if (out < 0) throw NumericError("transport LP is unbounded; costs must be non-negative");

    if (delta > 0.0) {
      flow_[e] += delta;
      for (int w = u; w != join; w = parent_[w]) {
        const int arc = pred_[w];
        flow_[arc] += src_[arc] == w ? -delta : delta;
      }
      for (int w = v; w != join; w = parent_[w]) {
        const int arc = pred_[w];
        flow_[arc] += dst_[arc] == w ? -delta : delta;
      }
    }

    const int leaving = pred_[out];
    flow_[leaving] = 0.0;
    remove_tree_arc(out, leaving);
    remove_tree_arc(parent_[out], leaving);
    in_tree_[leaving] = 0;
    in_tree_[e] = 1;
    adj_[u].push_back(e);
    adj_[v].push_back(e);

    const int hang = side == 1 ? u : v;
    const int anchor = side == 1 ? v : u;
    attach(hang, anchor, e);
    stack_.assign(1, hang);
    while (!stack_.empty()) {
      const int w = stack_.back();
      stack_.pop_back();
      for (int arc : adj_[w]) {
        const int nb = src_[arc] == w ? dst_[arc] : src_[arc];
        if (nb == parent_[w]) continue;
        attach(nb, w, arc);
        stack_.push_back(nb);
      }
    }
  }

  void attach(int child, int par, int arc) {
    parent_[child] = par;
    pred_[child] = arc;
    depth_[child] = depth_[par] + 1;
    pi_[child] = src_[arc] == par ? pi_[par] - cost_[arc] : pi_[par] + cost_[arc];
  }

  void run_simplex() {
    const std::size_t limit = 64 * (src_.size() + static_cast<std::size_t>(n_)) + 100000;
    std::size_t local = 0;
    for (int e = find_entering(); e >= 0; e = find_entering()) {
      pivot(e);
      ++pivots_;
      if (++local > limit) throw NumericError("transport LP exceeded its pivot budget");
    }
  }

  // Adds, for every node, the arc pairs of its few most violated Lipschitz
  // constraints. Returns false when the potentials are feasible.
  bool separate() {
    bool added = false;
    const double r2 = 1.0 / (inv_r_ * inv_r_);
    excess_.resize(n_);
    for (int i = 0; i < n_; ++i) {
      // Branch-free pass: excess > 0 iff |pi_i - pi_j| > |p_i - p_j| / r.
      const double pi_i = pi_[i];
      for (int j = 0; j < n_; ++j) {
        const double df = pi_i - pi_[j];
        excess_[j] = df * df * r2;
      }
      for (int k = 0; k < dim_; ++k) {
        const double* axis = &axes_[static_cast<std::size_t>(k) * n_];
        const double xi = axis[i];
        for (int j = 0; j < n_; ++j) excess_[j] -= (axis[j] - xi) * (axis[j] - xi);
      }
      worst_.clear();
      for (int j = 0; j < n_; ++j) {
        if (excess_[j] <= 0.0) continue;
        const double gap = std::abs(pi_i - pi_[j]) - pair_cost(i, j);
        if (gap > kSeparationTol) worst_.emplace_back(-gap, j);
      }
      const std::size_t k = std::min(worst_.size(), kCutsPerNode);
      std::partial_sort(worst_.begin(), worst_.begin() + static_cast<std::ptrdiff_t>(k), worst_.end());
      for (std::size_t q = 0; q < k; ++q)
        if (add_pair(i, worst_[q].second)) added = true;
    }
    return added;
  }

  int n_ = -1;
  int dim_ = 0;
  double inv_r_ = 1.0;
  std::vector<double> coords_;  // point-major
  std::vector<double> axes_;    // axis-major
  std::vector<double> bound_;
  std::vector<double> supply_;

  std::vector<int> src_, dst_;
  std::vector<double> cost_, flow_;
  std::vector<char> in_tree_;
  std::unordered_set<std::uint64_t> pairs_;
  bool pending_seed_ = false;
  bool has_tree_ = false;

  std::vector<int> parent_, pred_, depth_;
  std::vector<double> pi_;
  std::vector<std::vector<int>> adj_;
  std::vector<int> stack_;
  int next_arc_ = 0;
  std::vector<double> excess_;
  std::vector<std::pair<double, int>> worst_;

  std::size_t pivots_ = 0;
  std::size_t rounds_ = 0;
  std::size_t warm_starts_ = 0;
};

}  // namespace czo::detail
