// Copyright 2026 The AUSDS Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Exact k-nearest-neighbor index over float32 vectors with squared L2
// distance. Results are ordered by (distance, id), so equal distances resolve
// towards the smaller id. Two layouts share the same contract:
//   flat      - full scan
//   ball_tree - ball tree over the top principal coordinates; each node also
//               keeps the range of residual norms off that subspace and each
//               split its separating hyperplane. Since
//               |q - p|^2 >= |U(q - p)|^2 + (rho(q) - rho(p))^2, subtrees are
//               skipped only when the ball or hyperplane bound provably
//               exceeds the current k-th best distance, so the answer is
//               identical to the full scan.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Eigenvalues>

#include "ausds/error.hpp"
#include "ausds/linalg.hpp"
#include "ausds/store.hpp"

namespace ausds {

struct Neighbor {
  SampleId id = 0;
  double distance2 = 0.0;

  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.distance2 < b.distance2 || (a.distance2 == b.distance2 && a.id < b.id);
  }
  bool operator==(const Neighbor&) const = default;
};

enum class IndexKind { flat, ball_tree };

inline IndexKind parse_index_kind(const std::string& s) {
  if (s == "flat") return IndexKind::flat;
  if (s == "ball_tree") return IndexKind::ball_tree;
  throw ConfigError("unknown index kind '" + s + "'");
}

inline std::string to_string(IndexKind k) { return k == IndexKind::flat ? "flat" : "ball_tree"; }

class ExactIndex {
 public:
  ExactIndex() = default;

  // `vectors` is row-major, ids.size() rows of `dim` floats.
  ExactIndex(std::vector<SampleId> ids, std::vector<float> vectors, std::size_t dim,
             IndexKind kind = IndexKind::ball_tree, std::size_t leaf_size = 32, std::size_t projected_dim = 16)
      : kind_(kind), dim_(dim), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
    if (vectors.size() != ids.size() * dim) throw ShapeError("index: vector payload does not match ids x dim");
    const std::size_t n = ids.size();
    std::vector<std::uint32_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0u);
    if (kind_ == IndexKind::ball_tree && n > 0) {
      fit_projection(vectors, n, std::clamp<std::size_t>(projected_dim, 1, dim));
      std::vector<double> y(n * proj_dim_);
      std::vector<double> rho(n);
      for (std::size_t i = 0; i < n; ++i) {
        rho[i] = project(std::span<const float>(vectors.data() + i * dim, dim), y.data() + i * proj_dim_);
      }
      nodes_.reserve(2 * n / leaf_size_ + 2);
      build_node(perm, y, rho, 0, n, -1);
    }
    // store points in tree order so leaves are contiguous
    ids_.resize(n);
    points_.resize(n * dim);
    for (std::size_t s = 0; s < n; ++s) {
      ids_[s] = ids[perm[s]];
      std::copy_n(vectors.begin() + static_cast<std::ptrdiff_t>(perm[s] * dim), dim,
                  points_.begin() + static_cast<std::ptrdiff_t>(s * dim));
    }
    alive_.assign(n, 1);
    alive_count_ = n;
    slot_of_.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
      if (!slot_of_.emplace(ids_[s], static_cast<std::uint32_t>(s)).second) {
        throw InvariantError("index: duplicate id " + std::to_string(ids_[s]));
      }
    }
    leaf_of_slot_.assign(n, -1);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& nd = nodes_[i];
      if (nd.left < 0) {
        for (auto s = nd.begin; s < nd.end; ++s) leaf_of_slot_[s] = static_cast<std::int32_t>(i);
      }
    }
  }

  IndexKind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return alive_count_; }
  bool contains(SampleId id) const {
    auto it = slot_of_.find(id);
    return it != slot_of_.end() && alive_[it->second];
  }

  std::span<const float> vector_of(SampleId id) const {
    auto it = slot_of_.find(id);
    if (it == slot_of_.end() || !alive_[it->second]) throw LookupError("index: id " + std::to_string(id) + " absent");
    return {points_.data() + static_cast<std::size_t>(it->second) * dim_, dim_};
  }

  // Returns false if the id was not present.
  bool remove(SampleId id) {
    auto it = slot_of_.find(id);
    if (it == slot_of_.end() || !alive_[it->second]) return false;
    const auto slot = it->second;
    alive_[slot] = 0;
    --alive_count_;
    for (auto n = kind_ == IndexKind::ball_tree ? leaf_of_slot_[slot] : -1; n >= 0; n = nodes_[n].parent) {
      --nodes_[n].alive;
    }
    return true;
  }

  std::vector<SampleId> ids() const {
    std::vector<SampleId> out;
    out.reserve(alive_count_);
    for (std::size_t s = 0; s < ids_.size(); ++s) {
      if (alive_[s]) out.push_back(ids_[s]);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  // k nearest alive points, ascending by (distance2, id). Also reports how
  // many point distances were evaluated.
  std::vector<Neighbor> search(std::span<const double> q, std::size_t k, std::size_t* evaluated = nullptr) const {
    if (q.size() != dim_) throw ShapeError("index: query dim mismatch");
    if (k == 0) throw ConfigError("k must be >= 1");
    Heap heap;
    std::size_t evals = 0;
    if (kind_ == IndexKind::flat || nodes_.empty()) {
      for (std::size_t s = 0; s < ids_.size(); ++s) {
        if (!alive_[s]) continue;
        offer(heap, k, {ids_[s], point_distance(s, q)});
        ++evals;
      }
    } else {
      Query pq{q, Vector(proj_dim_), 0.0, 0.0};
      pq.rho = project(q, pq.y.data());
      pq.y_norm = norm2(pq.y);
      search_node(0, pq, k, heap, evals);
    }
    if (evaluated) *evaluated += evals;
    std::vector<Neighbor> out;
    out.reserve(heap.size());
    while (!heap.empty()) {
      out.push_back(heap.top());
      heap.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  struct Node {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::int32_t parent = -1;
    std::uint32_t alive = 0;
    double radius = 0.0;  // in projected coordinates
    double center_norm = 0.0;
    double rho_lo = 0.0;
    double rho_hi = 0.0;
    double split = 0.0;  // children: left <= split <= right along the unit split axis
  };

  struct Query {
    std::span<const double> x;
    Vector y;
    double rho;
    double y_norm;
  };

  using Heap = std::priority_queue<Neighbor>;  // top = worst of the current best k

  static void offer(Heap& heap, std::size_t k, Neighbor nb) {
    if (heap.size() < k) {
      heap.push(nb);
    } else if (nb < heap.top()) {
      heap.pop();
      heap.push(nb);
    }
  }

  double point_distance(std::size_t slot, std::span<const double> q) const {
    return squared_distance(std::span<const float>(points_.data() + slot * dim_, dim_), q);
  }

  // Mean and top principal axes, from an evenly strided subsample. The axes
  // only steer pruning; exactness does not depend on them.
  void fit_projection(const std::vector<float>& v, std::size_t n, std::size_t m) {
    constexpr std::size_t kMaxFitRows = 4096;
    const std::size_t stride = std::max<std::size_t>(1, n / kMaxFitRows);
    mean_.assign(dim_, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < dim_; ++c) mean_[c] += static_cast<double>(v[i * dim_ + c]);
    }
    for (double& c : mean_) c /= static_cast<double>(n);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_));
    Eigen::VectorXd t(static_cast<Eigen::Index>(dim_));
    for (std::size_t i = 0; i < n; i += stride) {
      for (std::size_t c = 0; c < dim_; ++c) t[static_cast<Eigen::Index>(c)] = v[i * dim_ + c] - mean_[c];
      cov.selfadjointView<Eigen::Lower>().rankUpdate(t);
    }
    cov = cov.selfadjointView<Eigen::Lower>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw NumericError("index: eigendecomposition failed");
    // keep only directions the data actually spans, up to m
    const double top = std::max(eig.eigenvalues()[static_cast<Eigen::Index>(dim_ - 1)], 0.0);
    std::size_t rank = 0;
    while (rank < dim_ && eig.eigenvalues()[static_cast<Eigen::Index>(dim_ - 1 - rank)] > 1e-9 * top) ++rank;
    m = std::clamp<std::size_t>(rank, 1, m);
    proj_dim_ = m;
    basis_.assign(m * dim_, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
      const auto col = static_cast<Eigen::Index>(dim_ - 1 - r);  // eigenvalues ascend
      for (std::size_t c = 0; c < dim_; ++c) basis_[r * dim_ + c] = eig.eigenvectors()(static_cast<Eigen::Index>(c), col);
    }
  }

  // Writes y = U (x - mean) and returns the residual norm |x - mean - U^T y|.
  template <typename T>
  double project(std::span<const T> x, double* y) const {
    Vector d(dim_);
    for (std::size_t c = 0; c < dim_; ++c) d[c] = static_cast<double>(x[c]) - mean_[c];
    for (std::size_t r = 0; r < proj_dim_; ++r) {
      const double* u = basis_.data() + r * dim_;
      double s = 0.0;
      for (std::size_t c = 0; c < dim_; ++c) s += u[c] * d[c];
      y[r] = s;
    }
    for (std::size_t r = 0; r < proj_dim_; ++r) {
      const double* u = basis_.data() + r * dim_;
      for (std::size_t c = 0; c < dim_; ++c) d[c] -= y[r] * u[c];
    }
    return norm2(d);
  }

  // Lower bound on the distance from q to any point of the node, given a
  // lower bound `plane` on its projected distance (from the parent's split).
  double lower_bound(std::int32_t n, const Query& q, double plane) const {
    const auto& nd = nodes_[n];
    const double* c = centers_.data() + static_cast<std::size_t>(n) * proj_dim_;
    double d2 = 0.0;
    for (std::size_t i = 0; i < proj_dim_; ++i) {
      const double t = c[i] - q.y[i];
      d2 += t * t;
    }
    const double dist = std::sqrt(d2);
    const double a = std::max({0.0, dist - nd.radius, plane});
    const double b = q.rho < nd.rho_lo ? nd.rho_lo - q.rho : (q.rho > nd.rho_hi ? q.rho - nd.rho_hi : 0.0);
    // slack absorbs rounding in the projection, the radius and the norms so
    // pruning never drops a point the full scan would return
    const double scale = q.y_norm + nd.center_norm + nd.radius + q.rho + nd.rho_hi + std::abs(nd.split);
    return std::sqrt(a * a + b * b) - 1e-9 * scale - 1e-12;
  }

  void search_node(std::int32_t n, const Query& q, std::size_t k, Heap& heap, std::size_t& evals,
                   double plane = 0.0) const {
    const auto& nd = nodes_[n];
    if (nd.alive == 0) return;
    if (nd.left < 0) {
      for (auto s = nd.begin; s < nd.end; ++s) {
        if (!alive_[s]) continue;
        offer(heap, k, {ids_[s], point_distance(s, q.x)});
        ++evals;
      }
      return;
    }
    const double sq = dot(std::span<const double>(axes_.data() + static_cast<std::size_t>(n) * proj_dim_, proj_dim_), q.y);
    const double plane_l = std::max(plane, sq - nd.split);
    const double plane_r = std::max(plane, nd.split - sq);
    double lb_l = lower_bound(nd.left, q, plane_l);
    double lb_r = lower_bound(nd.right, q, plane_r);
    std::int32_t first = nd.left, second = nd.right;
    double p_first = plane_l, p_second = plane_r;
    if (lb_r < lb_l) {
      std::swap(first, second);
      std::swap(lb_l, lb_r);
      std::swap(p_first, p_second);
    }
    if (!prunable(heap, k, lb_l)) search_node(first, q, k, heap, evals, p_first);
    if (!prunable(heap, k, lb_r)) search_node(second, q, k, heap, evals, p_second);
  }

  static bool prunable(const Heap& heap, std::size_t k, double lb) {
    return heap.size() == k && lb > 0.0 && lb * lb > heap.top().distance2;
  }

  std::int32_t build_node(std::vector<std::uint32_t>& perm, const std::vector<double>& y,
                          const std::vector<double>& rho, std::size_t begin, std::size_t end, std::int32_t parent) {
    const auto index = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({});
    Node nd;
    nd.begin = static_cast<std::uint32_t>(begin);
    nd.end = static_cast<std::uint32_t>(end);
    nd.parent = parent;
    nd.alive = static_cast<std::uint32_t>(end - begin);

    const std::size_t m = proj_dim_;
    auto point = [&](std::size_t i) { return std::span<const double>(y.data() + perm[i] * m, m); };
    Vector center(m, 0.0);
    nd.rho_lo = std::numeric_limits<double>::infinity();
    nd.rho_hi = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto p = point(i);
      for (std::size_t c = 0; c < m; ++c) center[c] += p[c];
      nd.rho_lo = std::min(nd.rho_lo, rho[perm[i]]);
      nd.rho_hi = std::max(nd.rho_hi, rho[perm[i]]);
    }
    for (double& c : center) c /= static_cast<double>(end - begin);
    std::size_t far = begin;
    double far_d2 = -1.0;
    for (std::size_t i = begin; i < end; ++i) {
      const double d2 = squared_distance(point(i), center);
      if (d2 > far_d2) {
        far_d2 = d2;
        far = i;
      }
    }
    nd.radius = std::sqrt(far_d2);
    nd.center_norm = norm2(center);
    centers_.insert(centers_.end(), center.begin(), center.end());
    axes_.resize(centers_.size(), 0.0);

    if (end - begin > leaf_size_ && far_d2 > 0.0) {
      // split along the axis joining two far-apart points
      Vector a(point(far).begin(), point(far).end());
      std::size_t other = begin;
      double other_d2 = -1.0;
      for (std::size_t i = begin; i < end; ++i) {
        const double d2 = squared_distance(point(i), a);
        if (d2 > other_d2) {
          other_d2 = d2;
          other = i;
        }
      }
      Vector dir(m);
      for (std::size_t c = 0; c < m; ++c) dir[c] = point(other)[c] - a[c];
      const double dn = norm2(dir);
      for (double& c : dir) c /= dn;
      std::copy(dir.begin(), dir.end(), axes_.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(index) * m));
      std::vector<std::pair<double, std::uint32_t>> proj;
      proj.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) proj.emplace_back(dot(dir, point(i)), perm[i]);
      const std::size_t half = proj.size() / 2;
      std::nth_element(proj.begin(), proj.begin() + static_cast<std::ptrdiff_t>(half), proj.end());
      nd.split = proj[half].first;
      for (std::size_t i = 0; i < proj.size(); ++i) perm[begin + i] = proj[i].second;
      const std::size_t mid = begin + half;
      nd.left = build_node(perm, y, rho, begin, mid, index);
      nd.right = build_node(perm, y, rho, mid, end, index);
    }
    nodes_[index] = nd;
    return index;
  }

  IndexKind kind_ = IndexKind::ball_tree;
  std::size_t dim_ = 0;
  std::size_t leaf_size_ = 32;
  std::size_t proj_dim_ = 0;
  Vector mean_;
  std::vector<double> basis_;  // proj_dim_ x dim_, orthonormal rows
  std::vector<Node> nodes_;
  std::vector<double> centers_;
  std::vector<double> axes_;  // unit split axis per node, proj_dim_ each
  std::vector<SampleId> ids_;
  std::vector<float> points_;
  std::vector<std::uint8_t> alive_;
  std::size_t alive_count_ = 0;
  std::unordered_map<SampleId, std::uint32_t> slot_of_;
  std::vector<std::int32_t> leaf_of_slot_;
};

}  // namespace ausds
