#ifndef MTIR_KDTREE_HPP
#define MTIR_KDTREE_HPP

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mtir/vec3.hpp"

namespace mtir {

inline double dist2(const Vec3& a, const Vec3& b) {
  double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

// Exact nearest-neighbour tree over a fixed point set. Results are defined
// to be the lexicographic minimum of (squared distance, original index), so
// ties always resolve to the lowest index and any linear scan using the
// same rule returns the identical point.
class KdTree {
 public:
  KdTree() = default;

  explicit KdTree(std::vector<Vec3> points) : pts_(std::move(points)) {
    idx_.resize(pts_.size());
    for (size_t i = 0; i < idx_.size(); ++i) idx_[i] = int(i);
    nodes_.reserve(pts_.size());
    if (!pts_.empty()) root_ = build(0, int(pts_.size()));
  }

  bool empty() const { return pts_.empty(); }
  size_t size() const { return pts_.size(); }

  // returns the original index of the nearest point; d2_out gets the
  // squared distance
  int nearest(const Vec3& q, double* d2_out = nullptr) const {
    if (pts_.empty()) throw std::invalid_argument("KdTree: empty point set");
    Best best{1e300, INT32_MAX};
    search(root_, q, best);
    if (d2_out) *d2_out = best.d2;
    return best.idx;
  }

 private:
  struct Node {
    int split_dim = 0;
    int point = 0;        // index into idx_/pts_ ordering below
    int left = -1, right = -1;
  };
  struct Best {
    double d2;
    int idx;
  };

  int build(int lo, int hi) {
    // split on the widest dimension at the median; order within the
    // comparator falls back to the original index so builds are stable
    Vec3 mn = pts_[idx_[lo]], mx = pts_[idx_[lo]];
    for (int i = lo + 1; i < hi; ++i) {
      mn = vmin(mn, pts_[idx_[i]]);
      mx = vmax(mx, pts_[idx_[i]]);
    }
    Vec3 ext = mx - mn;
    int dim = 0;
    if (ext.y > ext[dim]) dim = 1;
    if (ext.z > ext[dim]) dim = 2;
    int mid = (lo + hi) / 2;
    std::nth_element(idx_.begin() + lo, idx_.begin() + mid, idx_.begin() + hi,
                     [&](int a, int b) {
                       double ca = pts_[a][dim], cb = pts_[b][dim];
                       return ca < cb || (ca == cb && a < b);
                     });
    int node = int(nodes_.size());
    nodes_.push_back({dim, idx_[mid], -1, -1});
    if (mid - lo > 0) nodes_[node].left = build(lo, mid);
    if (hi - (mid + 1) > 0) nodes_[node].right = build(mid + 1, hi);
    return node;
  }

  void consider(int point, const Vec3& q, Best& best) const {
    double d2 = dist2(q, pts_[point]);
    if (d2 < best.d2 || (d2 == best.d2 && point < best.idx))
      best = {d2, point};
  }

  void search(int node, const Vec3& q, Best& best) const {
    const Node& n = nodes_[node];
    consider(n.point, q, best);
    double delta = q[n.split_dim] - pts_[n.point][n.split_dim];
    int near = delta < 0.0 ? n.left : n.right;
    int far = delta < 0.0 ? n.right : n.left;
    if (near >= 0) search(near, q, best);
    // the far half-space may still hold an equal-distance lower index, so
    // only prune when it is strictly further than the best
    if (far >= 0 && delta * delta <= best.d2) search(far, q, best);
  }

  std::vector<Vec3> pts_;
  std::vector<int> idx_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace mtir

#endif
